#pragma once

#include <functional>

namespace cpopt {

struct RootOptions {
  /// Stop when the bracket is narrower than xtol_rel * max(|lo|, |hi|) + xtol_abs.
  double xtol_rel = 4e-16;
  double xtol_abs = 0.0;
  /// Stop as soon as |f| <= ftol.
  double ftol = 0.0;
  int max_iter = 200;
};

struct RootResult {
  double x = 0.0;
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Root of a continuous f on [lo, hi] with f(lo), f(hi) of opposite sign.
///
/// False-position steps, with a bisection forced whenever a step fails to halve
/// the bracket, so the bracket shrinks at least geometrically. Returns the
/// endpoint with the smaller |f| when the bracket collapses.
RootResult bracketed_root(const std::function<double(double)>& f, double lo, double hi,
                          double f_lo, double f_hi, const RootOptions& options = {});

}  // namespace cpopt
