#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cpopt/exec.hpp"
#include "cpopt/information.hpp"
#include "cpopt/market.hpp"
#include "cpopt/preferences.hpp"

namespace cpopt {

struct SolverOptions {
  /// Relative tolerance on budget and risk residuals.
  double tol = 1e-10;
  /// Relative band around eps_min inside which eps is clamped instead of rejected.
  double eps_tol = 1e-6;
  int max_iter = 200;
};

struct EpsPolicy {
  enum class Kind { Absolute, Quantile };
  Kind kind = Kind::Quantile;
  /// eps itself, or q in [0, 1] with eps = eps_min + q (eps_max - eps_min).
  double value = 1.0;

  static EpsPolicy absolute(double eps) { return {Kind::Absolute, eps}; }
  static EpsPolicy quantile(double q) { return {Kind::Quantile, q}; }
  double resolve(double eps_min, double eps_max) const;
};

struct EpsBounds {
  double eps_max = 0.0;
  double eps_min = 0.0;
  double c_star = 0.0;
};

/// Paths sharing one value of the initial information.
struct Stratum {
  std::vector<std::size_t> index;  ///< path indices into the density sample
  std::vector<double> z;           ///< terminal densities of those paths
  double weight = 1.0;             ///< share of paths
  double tau_lo = 0.0;             ///< smallest change point in the cell
  double tau_hi = 0.0;             ///< largest change point in the cell
};

/// Solution of the constrained problem on one stratum.
struct StratumSolution {
  double lambda_star = 0.0;
  double y_hat = 0.0;
  double budget_residual = 0.0;
  double risk_residual = 0.0;
  double eps = 0.0;            ///< requested benchmark
  double eps_effective = 0.0;  ///< after clamping at eps_min
  EpsBounds bounds;
  bool binding = false;
  std::vector<double> r_hat;
};

struct DualSolution {
  std::vector<StratumSolution> strata;
  std::vector<double> weights;
  std::vector<double> r_hat;  ///< per path, in path order
  std::vector<std::size_t> stratum_of;
};

struct Scenario {
  MarketModel model;
  SimGrid grid;
  Filtration filtration;
  Preferences prefs;
  double x = 1.0;
  EpsPolicy eps;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 0;
  std::size_t n_strata = 1;
  Exec exec;
  SolverOptions options;

  DensitySample sample;
  std::vector<Stratum> strata;

  /// Simulates the path set once and buckets it into strata.
  void attach();
  /// Uses given terminal densities (and change points, for stratification).
  void attach(DensitySample s);
  bool attached() const { return !strata.empty(); }
};

/// Initially enlarged kinds are bucketed by change-point quantile cells; ties
/// never straddle a cell boundary. Other kinds get a single stratum.
std::vector<Stratum> stratify(const DensitySample& sample, FiltrationKind kind, std::size_t n_strata);

/// mean z Itilde_lambda(y z)
double budget_curve(const Preferences& prefs, std::span<const double> z, double lambda, double y,
                    const Exec& exec = {});
double solve_budget_multiplier(const Preferences& prefs, std::span<const double> z, double lambda,
                               double x, const SolverOptions& options = {}, const Exec& exec = {});
/// k(lambda) = mean L(-Itilde_lambda(y_hat(lambda) z))
double risk_curve(const Preferences& prefs, std::span<const double> z, double lambda, double x,
                  const SolverOptions& options = {}, const Exec& exec = {},
                  double* y_hat_out = nullptr);
EpsBounds estimate_eps_bounds(const Preferences& prefs, std::span<const double> z, double x,
                              const SolverOptions& options = {}, const Exec& exec = {});
StratumSolution solve_dual(const Preferences& prefs, std::span<const double> z, double x,
                           const EpsPolicy& eps, const SolverOptions& options = {},
                           const Exec& exec = {});

/// Per-stratum solve on the scenario's attached path set.
DualSolution solve_dual(const Scenario& scenario);

}  // namespace cpopt
