#include "cpopt/dual_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cpopt/errors.hpp"
#include "cpopt/roots.hpp"

namespace cpopt {

namespace {

double mean_of(std::span<const double> z, const Exec& exec,
               const std::function<double(std::size_t)>& term) {
  return ordered_sum(z.size(), exec, term) / static_cast<double>(z.size());
}

void require_sample(std::span<const double> z) {
  if (z.empty()) throw ConfigError("dual solver: empty density sample");
}

RootOptions log_space_options(const SolverOptions& options) {
  RootOptions opt;
  opt.xtol_rel = 0.0;
  opt.xtol_abs = 1e-15;
  opt.max_iter = options.max_iter;
  return opt;
}

}  // namespace

double EpsPolicy::resolve(double eps_min, double eps_max) const {
  if (kind == Kind::Absolute) return value;
  if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("eps quantile must lie in [0, 1]");
  if (value == 1.0) return eps_max;
  if (value == 0.0) return eps_min;
  return eps_min + value * (eps_max - eps_min);
}

double budget_curve(const Preferences& prefs, std::span<const double> z, double lambda, double y,
                    const Exec& exec) {
  require_sample(z);
  const double v = mean_of(z, exec, [&](std::size_t i) {
    return z[i] * lagrangian_inverse(prefs, lambda, y * z[i]);
  });
  if (!std::isfinite(v)) throw NonFinite("budget curve is not finite at y=" + std::to_string(y));
  return v;
}

double solve_budget_multiplier(const Preferences& prefs, std::span<const double> z, double lambda,
                               double x, const SolverOptions& options, const Exec& exec) {
  require_sample(z);
  if (!(x > 0.0)) throw ConfigError("initial capital must be positive");
  const auto h = [&](double y) { return budget_curve(prefs, z, lambda, y, exec) - x; };
  double lo = 1.0;
  double hi = 1.0;
  double f_lo = h(1.0);
  double f_hi = f_lo;
  if (f_lo == 0.0) return 1.0;
  int steps = 0;
  if (f_lo > 0.0) {
    while (f_hi > 0.0) {
      if (++steps > options.max_iter)
        throw BracketFailure("budget multiplier: no bracket after " +
                             std::to_string(options.max_iter) + " doublings");
      lo = hi;
      f_lo = f_hi;
      hi *= 2.0;
      f_hi = h(hi);
    }
  } else {
    while (f_lo < 0.0) {
      if (++steps > options.max_iter)
        throw BracketFailure("budget multiplier: no bracket after " +
                             std::to_string(options.max_iter) + " halvings");
      hi = lo;
      f_hi = f_lo;
      lo *= 0.5;
      f_lo = h(lo);
    }
  }
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  const RootResult r = bracketed_root([&](double s) { return h(std::exp(s)); }, std::log(lo),
                                      std::log(hi), f_lo, f_hi, log_space_options(options));
  const double y = std::exp(r.x);
  const double residual = h(y);
  if (!(std::abs(residual) <= options.tol * x))
    throw NoConvergence("budget multiplier: residual " + std::to_string(residual) +
                        " above tolerance");
  return y;
}

double risk_curve(const Preferences& prefs, std::span<const double> z, double lambda, double x,
                  const SolverOptions& options, const Exec& exec, double* y_hat_out) {
  const double y = solve_budget_multiplier(prefs, z, lambda, x, options, exec);
  if (y_hat_out != nullptr) *y_hat_out = y;
  const double k = mean_of(z, exec, [&](std::size_t i) {
    return prefs.loss.l(-lagrangian_inverse(prefs, lambda, y * z[i]));
  });
  if (!std::isfinite(k)) throw NonFinite("risk curve is not finite at lambda=" + std::to_string(lambda));
  return k;
}

EpsBounds estimate_eps_bounds(const Preferences& prefs, std::span<const double> z, double x,
                              const SolverOptions& options, const Exec& exec) {
  require_sample(z);
  EpsBounds b;
  b.eps_max = risk_curve(prefs, z, 0.0, x, options, exec);

  const double z_min = *std::min_element(z.begin(), z.end());
  const double z_max = *std::max_element(z.begin(), z.end());
  const double e_top = prefs.loss.dl_at_zero();
  if (!(z_min > 0.0)) {
    const auto bad = std::count_if(z.begin(), z.end(), [](double v) { return !(v > 0.0); });
    throw OutOfRange("eps bounds: H undefined at c*Z for non-positive Z (quantile " +
                     std::to_string(static_cast<double>(bad) / static_cast<double>(z.size())) + ")");
  }
  // x = mean(-Z H(c Z)); the right side decreases in c on 0 < c Z < L'(0-).
  const auto g = [&](double c) {
    return mean_of(z, exec, [&](std::size_t i) { return -z[i] * prefs.loss.h(c * z[i]); }) - x;
  };
  const double c_cap = std::isinf(e_top) ? std::numeric_limits<double>::infinity() : e_top / z_max;
  double lo = std::isinf(c_cap) ? 1.0 : 0.5 * c_cap;
  double hi = lo;
  double f_lo = g(lo);
  double f_hi = f_lo;
  int steps = 0;
  if (f_lo > 0.0) {
    while (f_hi > 0.0) {
      if (++steps > 2000) throw BracketFailure("c* equation: no bracket");
      lo = hi;
      f_lo = f_hi;
      hi = std::isinf(c_cap) ? 2.0 * hi : 0.5 * (hi + c_cap);
      if (!(hi < c_cap)) throw BracketFailure("c* equation: bracket reached the domain edge");
      f_hi = g(hi);
    }
  } else {
    while (f_lo < 0.0) {
      if (++steps > 2000) throw BracketFailure("c* equation: no bracket");
      hi = lo;
      f_hi = f_lo;
      lo *= 0.5;
      f_lo = g(lo);
    }
  }
  if (f_lo == 0.0) {
    b.c_star = lo;
  } else if (f_hi == 0.0) {
    b.c_star = hi;
  } else {
    const RootResult r = bracketed_root([&](double s) { return g(std::exp(s)); }, std::log(lo),
                                        std::log(hi), f_lo, f_hi, log_space_options(options));
    b.c_star = std::exp(r.x);
  }
  if (!(b.c_star * z_max < e_top)) {
    const auto bad = std::count_if(z.begin(), z.end(), [&](double v) { return !(b.c_star * v < e_top); });
    throw OutOfRange("eps bounds: c*Z leaves the domain of H (quantile " +
                     std::to_string(1.0 - static_cast<double>(bad) / static_cast<double>(z.size())) +
                     ")");
  }
  b.eps_min = mean_of(z, exec, [&](std::size_t i) { return prefs.loss.l(prefs.loss.h(b.c_star * z[i])); });
  return b;
}

StratumSolution solve_dual(const Preferences& prefs, std::span<const double> z, double x,
                           const EpsPolicy& eps, const SolverOptions& options, const Exec& exec) {
  StratumSolution s;
  s.bounds = estimate_eps_bounds(prefs, z, x, options, exec);
  s.eps = eps.resolve(s.bounds.eps_min, s.bounds.eps_max);
  const double band = options.eps_tol * std::abs(s.bounds.eps_min);
  if (s.eps < s.bounds.eps_min - band)
    throw Infeasible("infeasible: eps=" + std::to_string(s.eps) + " is below eps_min=" +
                         std::to_string(s.bounds.eps_min),
                     s.eps, s.bounds.eps_min);
  s.eps_effective = std::max(s.eps, s.bounds.eps_min + band);

  if (s.eps_effective >= s.bounds.eps_max) {
    s.lambda_star = 0.0;
    s.binding = false;
    s.y_hat = solve_budget_multiplier(prefs, z, 0.0, x, options, exec);
  } else {
    s.binding = true;
    const auto k = [&](double lambda) {
      return risk_curve(prefs, z, lambda, x, options, exec) - s.eps_effective;
    };
    double lo = 0.0;
    double f_lo = s.bounds.eps_max - s.eps_effective;
    double hi = 1.0;
    double f_hi = k(hi);
    int steps = 0;
    while (f_hi >= 0.0) {
      if (++steps > options.max_iter)
        throw BracketFailure("risk multiplier: k(lambda) stays above eps after " +
                             std::to_string(options.max_iter) + " doublings");
      lo = hi;
      f_lo = f_hi;
      hi *= 2.0;
      f_hi = k(hi);
    }
    RootOptions opt;
    opt.xtol_rel = 4e-16;
    opt.max_iter = options.max_iter;
    const RootResult r = bracketed_root(k, lo, hi, f_lo, f_hi, opt);
    s.lambda_star = r.x;
    s.y_hat = solve_budget_multiplier(prefs, z, s.lambda_star, x, options, exec);
  }

  s.r_hat.resize(z.size());
  parallel_for(z.size(), exec, [&](std::size_t i) {
    s.r_hat[i] = lagrangian_inverse(prefs, s.lambda_star, s.y_hat * z[i]);
  });
  s.budget_residual = mean_of(z, exec, [&](std::size_t i) { return z[i] * s.r_hat[i]; }) - x;
  s.risk_residual =
      mean_of(z, exec, [&](std::size_t i) { return prefs.loss.l(-s.r_hat[i]); }) - s.eps_effective;
  return s;
}

// ---------------------------------------------------------------------------

std::vector<Stratum> stratify(const DensitySample& sample, FiltrationKind kind, std::size_t n_strata) {
  const std::size_t n = sample.z_T.size();
  if (n == 0) throw ConfigError("stratify: empty sample");
  std::vector<Stratum> out;
  if (!initially_enlarged(kind) || n_strata <= 1 || sample.tau.size() != n) {
    Stratum s;
    s.index.resize(n);
    std::iota(s.index.begin(), s.index.end(), std::size_t{0});
    s.z = sample.z_T;
    s.weight = 1.0;
    if (!sample.tau.empty()) {
      s.tau_lo = *std::min_element(sample.tau.begin(), sample.tau.end());
      s.tau_hi = *std::max_element(sample.tau.begin(), sample.tau.end());
    }
    out.push_back(std::move(s));
    return out;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sample.tau[a] < sample.tau[b]; });
  std::size_t begin = 0;
  for (std::size_t j = 1; j <= n_strata && begin < n; ++j) {
    std::size_t end = j == n_strata ? n : (n * j) / n_strata;
    if (end <= begin) continue;
    while (end < n && sample.tau[order[end]] == sample.tau[order[end - 1]]) ++end;
    Stratum s;
    s.index.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                   order.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(s.index.begin(), s.index.end());
    s.z.reserve(s.index.size());
    for (const std::size_t i : s.index) s.z.push_back(sample.z_T[i]);
    s.weight = static_cast<double>(s.index.size()) / static_cast<double>(n);
    s.tau_lo = sample.tau[order[begin]];
    s.tau_hi = sample.tau[order[end - 1]];
    out.push_back(std::move(s));
    begin = end;
  }
  return out;
}

void Scenario::attach() {
  model.validate();
  attach(density_sample(model, grid, filtration, n_paths, seed, exec));
}

void Scenario::attach(DensitySample s) {
  if (!(x > 0.0)) throw ConfigError("initial capital must be positive");
  sample = std::move(s);
  n_paths = sample.z_T.size();
  strata = stratify(sample, filtration.kind, n_strata);
}

DualSolution solve_dual(const Scenario& scenario) {
  if (!scenario.attached()) throw ConfigError("solve_dual: scenario has no attached path set");
  DualSolution out;
  out.r_hat.resize(scenario.n_paths);
  out.stratum_of.resize(scenario.n_paths);
  for (std::size_t j = 0; j < scenario.strata.size(); ++j) {
    const Stratum& st = scenario.strata[j];
    StratumSolution sol =
        solve_dual(scenario.prefs, st.z, scenario.x, scenario.eps, scenario.options, scenario.exec);
    for (std::size_t m = 0; m < st.index.size(); ++m) {
      out.r_hat[st.index[m]] = sol.r_hat[m];
      out.stratum_of[st.index[m]] = j;
    }
    out.weights.push_back(st.weight);
    out.strata.push_back(std::move(sol));
  }
  return out;
}

}  // namespace cpopt
