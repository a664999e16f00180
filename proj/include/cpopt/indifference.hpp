#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cpopt/dual_solver.hpp"

namespace cpopt {

struct IndifferenceValue {
  double c = 0.0;
  double std_error = 0.0;
  int stratum = -1;  ///< -1 for the prior-weighted aggregate
  /// The fine value never meets the coarse one: c is where the benchmark
  /// becomes infeasible for the fine filtration, and std_error is +inf.
  bool feasibility_edge = false;
};

struct IndifferenceResult {
  std::string coarse;
  std::string fine;
  std::string method;  ///< "closed-form" or "root-solve"
  double c = 0.0;      ///< prior-weighted aggregate over strata of the finer filtration
  double std_error = 0.0;
  std::vector<IndifferenceValue> per_stratum;  ///< one entry per stratum of G, also when there is only one
};

/// c = (1 - (mean sqrt zG / mean sqrt zF)^2) x, for U(k) = 1 - 1/k and L(k) = -3/k.
///
/// Samples of equal length are treated as paired (common paths). Throws
/// OrderViolation when c is below -3 standard errors.
IndifferenceResult uiv_closed_form(std::span<const double> z_f, std::span<const double> z_g, double x);

/// Stratified version: each cell of `g_strata` (path indices into the paired
/// samples) gets its own value. The coarse expectation is taken over all paths
/// unless `f_stratified`, in which case it is taken over the same cell.
IndifferenceResult uiv_closed_form(std::span<const double> z_f, std::span<const double> z_g, double x,
                                   const std::vector<Stratum>& g_strata, bool f_stratified);

/// Value u of the constrained problem on a stratum at capital x with a fixed
/// absolute eps; -inf when eps is infeasible at that capital.
double stratum_value(const Preferences& prefs, std::span<const double> z, double x, double eps,
                     const SolverOptions& options = {}, const Exec& exec = {},
                     double* std_error = nullptr);

/// Solves u(F, x) = u(G, x - c) by bisection on c in [0, x (1 - 1e-9)].
///
/// Both scenarios must have attached path sets on common paths. The absolute
/// eps is taken from the solution of F at capital x and held fixed for G.
IndifferenceResult uiv_root_solve(const Scenario& coarse, const Scenario& fine, double x);

}  // namespace cpopt
