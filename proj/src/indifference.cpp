#include "cpopt/indifference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cpopt/errors.hpp"
#include "cpopt/wealth.hpp"

namespace cpopt {

namespace {

double mean_sqrt(std::span<const double> z, const std::vector<std::size_t>* rows) {
  double s = 0.0;
  if (rows == nullptr) {
    for (const double v : z) s += std::sqrt(v);
    return s / static_cast<double>(z.size());
  }
  for (const std::size_t i : *rows) s += std::sqrt(z[i]);
  return s / static_cast<double>(rows->size());
}

double sample_var(std::span<const double> z, double m) {
  double ss = 0.0;
  for (const double v : z) ss += (std::sqrt(v) - m) * (std::sqrt(v) - m);
  return z.size() > 1 ? ss / static_cast<double>(z.size() - 1) : 0.0;
}

void check_order(const IndifferenceResult& r) {
  if (r.c < -3.0 * r.std_error)
    throw OrderViolation("indifference value " + std::to_string(r.c) + " is below -3 stderr (" +
                         std::to_string(r.std_error) +
                         "): the coarse filtration carries more value than the fine one");
}

}  // namespace

IndifferenceResult uiv_closed_form(std::span<const double> z_f, std::span<const double> z_g, double x) {
  if (z_f.empty() || z_g.empty()) throw ConfigError("uiv: empty density sample");
  if (z_f.size() == z_g.size()) {
    Stratum all;
    all.index.resize(z_g.size());
    std::iota(all.index.begin(), all.index.end(), std::size_t{0});
    all.weight = 1.0;
    IndifferenceResult r = uiv_closed_form(z_f, z_g, x, {all}, false);
    r.per_stratum.clear();
    return r;
  }
  const double mf = mean_sqrt(z_f, nullptr);
  const double mg = mean_sqrt(z_g, nullptr);
  const double ratio = mg / mf;
  IndifferenceResult r;
  r.method = "closed-form";
  r.c = (1.0 - ratio * ratio) * x;
  // c = x (1 - mg^2 / mf^2); independent samples.
  const double dg = -2.0 * x * mg / (mf * mf);
  const double df = 2.0 * x * mg * mg / (mf * mf * mf);
  const double var = dg * dg * sample_var(z_g, mg) / static_cast<double>(z_g.size()) +
                     df * df * sample_var(z_f, mf) / static_cast<double>(z_f.size());
  r.std_error = std::sqrt(var);
  check_order(r);
  return r;
}

IndifferenceResult uiv_closed_form(std::span<const double> z_f, std::span<const double> z_g, double x,
                                   const std::vector<Stratum>& g_strata, bool f_stratified) {
  const std::size_t n = z_g.size();
  if (z_f.size() != n) throw ConfigError("uiv: stratified samples must be paired");
  if (g_strata.empty()) throw ConfigError("uiv: no strata");
  IndifferenceResult r;
  r.method = "closed-form";
  const double mf_all = mean_sqrt(z_f, nullptr);

  // Influence of each path on the aggregate; the variance of its mean is the
  // delta-method variance of c.
  std::vector<double> infl_agg(n, 0.0);
  double agg = 0.0;
  for (std::size_t s = 0; s < g_strata.size(); ++s) {
    const Stratum& st = g_strata[s];
    const double w = st.weight;
    const double mg = mean_sqrt(z_g, &st.index);
    const double mf = f_stratified ? mean_sqrt(z_f, &st.index) : mf_all;
    const double c = (1.0 - (mg / mf) * (mg / mf)) * x;
    const double dg = -2.0 * x * mg / (mf * mf);
    const double df = 2.0 * x * mg * mg / (mf * mf * mf);
    std::vector<double> infl(n, 0.0);
    for (const std::size_t i : st.index) infl[i] += dg * (std::sqrt(z_g[i]) - mg) / w;
    if (f_stratified) {
      for (const std::size_t i : st.index) infl[i] += df * (std::sqrt(z_f[i]) - mf) / w;
    } else {
      for (std::size_t i = 0; i < n; ++i) infl[i] += df * (std::sqrt(z_f[i]) - mf);
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ss += infl[i] * infl[i];
      infl_agg[i] += w * infl[i];
    }
    IndifferenceValue v;
    v.c = c;
    v.std_error = std::sqrt(ss / static_cast<double>(n) / static_cast<double>(n));
    v.stratum = static_cast<int>(s);
    r.per_stratum.push_back(v);
    agg += w * c;
  }
  double ss = 0.0;
  for (const double v : infl_agg) ss += v * v;
  r.c = agg;
  r.std_error = std::sqrt(ss / static_cast<double>(n) / static_cast<double>(n));
  check_order(r);
  return r;
}

double stratum_value(const Preferences& prefs, std::span<const double> z, double x, double eps,
                     const SolverOptions& options, const Exec& exec, double* std_error) {
  StratumSolution sol;
  try {
    sol = solve_dual(prefs, z, x, EpsPolicy::absolute(eps), options, exec);
  } catch (const Infeasible&) {
    if (std_error != nullptr) *std_error = 0.0;
    return -std::numeric_limits<double>::infinity();
  }
  const ValueReport v = value(sol.r_hat, prefs.utility);
  if (std_error != nullptr) *std_error = v.std_error;
  return v.value;
}

IndifferenceResult uiv_root_solve(const Scenario& coarse, const Scenario& fine, double x) {
  if (!coarse.attached() || !fine.attached()) throw ConfigError("uiv: scenarios need attached path sets");
  if (coarse.n_paths != fine.n_paths) throw ConfigError("uiv: scenarios must share the path set");
  const bool f_stratified = coarse.strata.size() > 1 && coarse.strata.size() == fine.strata.size();
  if (coarse.strata.size() > 1 && !f_stratified)
    throw ConfigError("uiv: coarse filtration is stratified differently from the fine one");

  IndifferenceResult r;
  r.method = "root-solve";
  r.coarse = filtration_name(coarse.filtration.kind);
  r.fine = filtration_name(fine.filtration.kind);

  // Coarse values at capital x with the coarse eps policy; the resulting
  // absolute eps is reused for the fine scenario.
  std::vector<double> u_f;
  std::vector<double> se_f;
  std::vector<double> eps_f;
  for (const Stratum& st : coarse.strata) {
    const StratumSolution sol = solve_dual(coarse.prefs, st.z, x, coarse.eps, coarse.options, coarse.exec);
    const ValueReport v = value(sol.r_hat, coarse.prefs.utility);
    u_f.push_back(v.value);
    se_f.push_back(v.std_error);
    eps_f.push_back(sol.eps_effective);
  }
  if (!f_stratified && coarse.strata.size() != 1) throw ConfigError("uiv: unexpected coarse strata");

  const double hi_cap = x * (1.0 - 1e-9);
  double agg = 0.0;
  double agg_var = 0.0;
  for (std::size_t s = 0; s < fine.strata.size(); ++s) {
    const Stratum& st = fine.strata[s];
    const std::size_t fs = f_stratified ? s : 0;
    const double target = u_f[fs];
    const double eps = eps_f[fs];
    const auto phi = [&](double c) {
      return stratum_value(fine.prefs, st.z, x - c, eps, fine.options, fine.exec) - target;
    };
    // A single stratum of the finer filtration may be worth less than the
    // coarse average, so the bracket extends to negative c when needed.
    double lo = 0.0;
    double p_lo = phi(lo);
    for (int it = 0; p_lo < 0.0 && it < 60; ++it) {
      lo = lo == 0.0 ? -x : 2.0 * lo;
      p_lo = phi(lo);
    }
    if (p_lo < 0.0) throw NoRoot("uiv: finer filtration stays below the coarse value", lo, hi_cap);
    const double p_hi = phi(hi_cap);
    if (!(p_hi < 0.0)) throw NoRoot("uiv: value difference does not change sign", lo, hi_cap);
    double hi = hi_cap;
    double c = lo;
    if (p_lo > 0.0) {
      for (int it = 0; it < 300 && hi - lo > 1e-13 * x; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (phi(mid) >= 0.0) lo = mid; else hi = mid;
      }
      c = 0.5 * (lo + hi);
    }
    // Standard error through the slope of u(G, .) at the solution.
    double se_g = 0.0;
    stratum_value(fine.prefs, st.z, x - c, eps, fine.options, fine.exec, &se_g);
    const double h = 1e-4 * x;
    const double up = stratum_value(fine.prefs, st.z, x - c + h, eps, fine.options, fine.exec);
    const double dn = stratum_value(fine.prefs, st.z, x - c - h, eps, fine.options, fine.exec);
    const double slope = (up - dn) / (2.0 * h);
    IndifferenceValue v;
    v.c = c;
    v.stratum = static_cast<int>(s);
    v.feasibility_edge = std::isinf(dn);
    v.std_error = (std::isfinite(slope) && slope > 0.0)
                      ? std::sqrt(se_f[fs] * se_f[fs] + se_g * se_g) / slope
                      : std::numeric_limits<double>::infinity();
    r.per_stratum.push_back(v);
    agg += st.weight * c;
    agg_var += st.weight * st.weight * v.std_error * v.std_error;
  }
  r.c = agg;
  r.std_error = std::sqrt(agg_var);
  return r;
}

}  // namespace cpopt
