// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bayes_filter_oracle.hpp"
#include "kkt_oracle.hpp"
#include "lognormal.hpp"

#include "cpopt/app.hpp"
#include "cpopt/config.hpp"
#include "cpopt/dual_solver.hpp"
#include "cpopt/errors.hpp"
#include "cpopt/indifference.hpp"
#include "cpopt/information.hpp"
#include "cpopt/preferences.hpp"
#include "cpopt/wealth.hpp"

using namespace cpopt;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Preferences log_recip() { return {Utility::log(), Loss::neg_reciprocal(3.0)}; }
Preferences shifted_recip() { return {Utility::shifted_neg_reciprocal(), Loss::neg_reciprocal(3.0)}; }

MarketModel constant_model(double mu1, double mu2, double sigma, ChangePointLaw law, double horizon = 1.0) {
  MarketModel m;
  m.coeffs = {mu1, mu2, sigma, sigma};
  m.law = std::move(law);
  m.horizon = horizon;
  return m;
}

Scenario make_scenario(MarketModel model, std::size_t n_steps, FiltrationKind kind, Preferences prefs,
                       EpsPolicy eps, std::size_t n_paths, std::uint64_t seed, std::size_t n_strata = 1) {
  Scenario s;
  s.grid = SimGrid(model.horizon, n_steps);
  s.model = std::move(model);
  s.filtration = {kind, VolCase::identical()};
  s.prefs = std::move(prefs);
  s.eps = eps;
  s.n_paths = n_paths;
  s.seed = seed;
  s.n_strata = n_strata;
  s.exec.workers = 4;
  return s;
}

// Per-path utilities of a solution.
std::vector<double> utilities(const std::vector<double>& r, const Utility& u) {
  std::vector<double> out(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) out[i] = u.u(r[i]);
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stderr_of_mean(const std::vector<double>& v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

// 1 ---------------------------------------------------------------------------
Outcome lagrangian_inverses() {
  double worst = 0.0;
  for (const Preferences& p : {log_recip(), shifted_recip()}) {
    for (double lam : {0.0, 0.1, 1.0, 10.0}) {
      for (int i = 0; i < 50; ++i) {
        const double y = std::pow(10.0, -3.0 + 6.0 * i / 49.0);
        const double closed = std::holds_alternative<Utility::Log>(p.utility.variant())
                                  ? (1.0 + std::sqrt(1.0 + 12.0 * lam * y)) / (2.0 * y)
                                  : std::sqrt((1.0 + 3.0 * lam) / y);
        const double numeric = lagrangian_inverse_numeric(p, lam, y);
        worst = std::max(worst, std::abs(numeric - closed) / closed);
      }
    }
  }
  return {worst <= 1e-10, "max rel err " + fmt("%.3g", worst) + " (tol 1e-10)"};
}

// 2 ---------------------------------------------------------------------------
Outcome dual_primal_oracle() {
  const auto z = oracle::lognormal_density(oracle::normals(200, 20240601), 0.4, 1.0);
  const Preferences prefs = log_recip();
  const StratumSolution sol = solve_dual(prefs, z, 1.0, EpsPolicy::quantile(0.5));
  if (!sol.binding) return {false, "dual solution is not binding at q = 0.5"};
  const oracle::KktSolution kkt = oracle::KktOracle(z, 3.0, 1.0, sol.eps_effective).solve();
  double worst = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) worst = std::max(worst, std::abs(sol.r_hat[i] - kkt.r[i]));
  const double res = std::max(std::abs(kkt.budget_residual), std::abs(kkt.risk_residual));
  return {worst <= 1e-6 && res < 1e-12,
          "max |R_dual - R_kkt| " + fmt("%.3g", worst) + " (tol 1e-6), lambda* " +
              fmt("%.6g", sol.lambda_star) + " vs " + fmt("%.6g", kkt.lambda) + ", oracle residual " +
              fmt("%.2g", res)};
}

// 3 ---------------------------------------------------------------------------
Outcome constraint_residuals() {
  int solves = 0;
  double worst_b = 0.0, worst_r = 0.0;
  auto check = [&](const Preferences& prefs, std::span<const double> z, double x, const StratumSolution& s) {
    ++solves;
    double sb = 0.0, sr = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      sb += z[i] * s.r_hat[i];
      sr += prefs.loss.l(-s.r_hat[i]);
    }
    const double n = static_cast<double>(z.size());
    worst_b = std::max(worst_b, std::abs(sb / n - x) / x);
    if (s.binding) worst_r = std::max(worst_r, std::abs(sr / n - s.eps_effective) / std::abs(s.eps_effective));
  };
  const auto xi = oracle::normals(10000, 77);
  for (double lam : {0.2, 0.4, 0.8}) {
    const auto z = oracle::lognormal_density(xi, lam, 1.0);
    for (const Preferences& p : {log_recip(), shifted_recip()})
      for (double x : {0.5, 1.0, 4.0})
        for (double q : {0.0, 0.1, 0.5, 0.9, 1.0}) check(p, z, x, solve_dual(p, z, x, EpsPolicy::quantile(q)));
  }
  // stratified path-set solves
  Scenario sc = make_scenario(constant_model(0.10, -0.05, 0.2, ChangePointLaw::exponential(1.0)), 50,
                              FiltrationKind::InitiallyEnlargedS, log_recip(), EpsPolicy::quantile(0.5), 4000, 3, 4);
  sc.attach();
  for (const Stratum& st : sc.strata) check(sc.prefs, st.z, sc.x, solve_dual(sc.prefs, st.z, sc.x, sc.eps));
  return {worst_b <= 1e-8 && worst_r <= 1e-8,
          std::to_string(solves) + " solves, max rel budget " + fmt("%.2g", worst_b) + ", max rel risk " +
              fmt("%.2g", worst_r) + " (tol 1e-8)"};
}

// 4 ---------------------------------------------------------------------------
Outcome monotonicity_suite() {
  const auto z = oracle::lognormal_density(oracle::normals(10000, 4242), 0.4, 1.0);
  const Preferences prefs = log_recip();
  const EpsBounds b = estimate_eps_bounds(prefs, z, 1.0);
  const std::vector<double> grid{0, 0.25, 0.5, 1, 2, 4, 8, 64, 1000};
  std::vector<double> k(grid.size()), y(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) k[i] = risk_curve(prefs, z, grid[i], 1.0, {}, {}, &y[i]);
  bool ratio_ok = true, k_ok = true;
  for (std::size_t i = 2; i < grid.size(); ++i) ratio_ok = ratio_ok && y[i] / grid[i] <= y[i - 1] / grid[i - 1];
  for (std::size_t i = 1; i < grid.size(); ++i) k_ok = k_ok && k[i] <= k[i - 1];
  const bool k0_ok = k[0] == b.eps_max;
  const double gap = std::abs(k.back() - b.eps_min) / b.eps_min;
  return {ratio_ok && k_ok && k0_ok && gap <= 0.01,
          std::string("y/lambda nonincreasing ") + (ratio_ok ? "yes" : "no") + ", k nonincreasing " +
              (k_ok ? "yes" : "no") + ", k(0)==eps_max " + (k0_ok ? "yes" : "no") +
              ", |k(1000)-eps_min|/eps_min " + fmt("%.3g", gap) + " (tol 0.01)"};
}

// 5 ---------------------------------------------------------------------------
Outcome unconstrained_log_value() {
  Scenario sc = make_scenario(constant_model(0.08, 0.08, 0.2, ChangePointLaw::point_mass(kInf)), 8,
                              FiltrationKind::ProgressiveS, log_recip(), EpsPolicy::quantile(1.0), 100000, 5);
  sc.attach();
  const DualSolution sol = solve_dual(sc);
  const ValueReport v = stratified_value(sol, sc).back();
  const double dev = std::abs(v.value - 0.08);
  return {dev <= 3.0 * v.std_error && sol.strata[0].lambda_star == 0.0,
          "u " + fmt("%.6f", v.value) + " vs 0.08, |dev| " + fmt("%.3g", dev) + " <= 3*stderr " +
              fmt("%.3g", 3.0 * v.std_error)};
}

// 6 ---------------------------------------------------------------------------
Outcome uiv_closed_form_vs_analytic() {
  const auto xi = oracle::normals(100000, 606);
  DensitySample f{oracle::lognormal_density(xi, 0.2, 1.0), std::vector<double>(xi.size(), kInf)};
  DensitySample g{oracle::lognormal_density(xi, 0.4, 1.0), std::vector<double>(xi.size(), kInf)};
  const IndifferenceResult cf = uiv_closed_form(f.z_T, g.z_T, 1.0);
  const double truth = 1.0 - std::exp(-0.03);
  const bool within = std::abs(cf.c - truth) <= 3.0 * cf.std_error;

  Scenario sf = make_scenario(constant_model(0.04, 0.04, 0.2, ChangePointLaw::point_mass(kInf)), 1,
                              FiltrationKind::ProgressiveS, shifted_recip(), EpsPolicy::quantile(0.5), xi.size(), 0);
  Scenario sg = sf;
  sf.attach(f);
  sg.attach(g);
  const IndifferenceResult rs = uiv_root_solve(sf, sg, 1.0);
  const double rel = std::abs(rs.c - cf.c) / std::abs(cf.c);
  return {within && rel <= 0.01,
          "closed form c " + fmt("%.6f", cf.c) + " vs " + fmt("%.6f", truth) + " (3*stderr " +
              fmt("%.3g", 3.0 * cf.std_error) + "), root solve " + fmt("%.6f", rs.c) + " rel diff " +
              fmt("%.3g", rel) + " (tol 0.01)"};
}

// 7 ---------------------------------------------------------------------------
ReplicationSummary replication_at(std::size_t n_steps) {
  Scenario sc = make_scenario(constant_model(0.08, 0.02, 0.2, ChangePointLaw::point_mass(0.5)), n_steps,
                              FiltrationKind::InitiallyEnlargedW, log_recip(), EpsPolicy::quantile(0.5), 1000, 7);
  sc.attach();
  const DualSolution sol = solve_dual(sc);
  if (!sol.strata[0].binding) throw Error("replication scenario is not binding");
  const PathPanel panel = build_panel(sc);
  std::vector<ReplicationReport> reports(panel.paths.size());
  parallel_for(panel.paths.size(), sc.exec, [&](std::size_t i) {
    const StratumSolution& s = sol.strata[sol.stratum_of[i]];
    const ClosedFormExample ex(sc.prefs, s.lambda_star, s.y_hat, panel.grid, panel.observed[i].mpr.lambda);
    const StrategyPath pi = strategy_closed_form(ex, panel.observed[i].density, panel.observed[i].mpr.sigma);
    reports[i] = replicate(pi, panel.paths[i], sc.x, sol.r_hat[i]);
  });
  return summarize_replication(reports);
}

Outcome replication() {
  const ReplicationSummary coarse = replication_at(1u << 11);
  const ReplicationSummary fine = replication_at(1u << 12);
  return {fine.relative_rmse <= 0.02 && fine.rmse < coarse.rmse,
          "relative RMSE " + fmt("%.4g", fine.relative_rmse) + " at 2^12 steps (tol 0.02); RMSE " +
              fmt("%.4g", coarse.rmse) + " at 2^11 -> " + fmt("%.4g", fine.rmse) + " at 2^12"};
}

// 8 ---------------------------------------------------------------------------
Outcome filter_oracle() {
  const MarketModel m = constant_model(0.3, -0.3, 0.1, ChangePointLaw::exponential(1.0));
  const SimGrid grid(1.0, 16);
  double worst = 0.0;
  for (std::size_t path = 0; path < 8; ++path) {
    const PathBundle p = draw_path(m, grid, 88, path);
    const auto got = change_point_filter(m, p);
    const auto want = oracle::bayes_change_point_posterior(m, p);
    for (std::size_t k = 0; k < got.size(); ++k) worst = std::max(worst, std::abs(got[k] - want[k]));
  }
  const MarketModel flat = constant_model(0.3, 0.3, 0.1, ChangePointLaw::exponential(1.0));
  const PathBundle p = draw_path(flat, grid, 88, 0);
  const auto prior = change_point_filter(flat, p);
  bool exact = true;
  for (std::size_t k = 0; k <= grid.n_steps; ++k)
    exact = exact && prior[k] == 1.0 - flat.law.survival_from(grid.time(k));
  return {worst <= 1e-12 && exact, "max abs err vs Bayes oracle " + fmt("%.3g", worst) +
                                       " (tol 1e-12), uninformative case equals prior CDF " +
                                       (exact ? "exactly" : "NOT exactly")};
}

// 9 ---------------------------------------------------------------------------
Outcome information_ordering() {
  const MarketModel m = constant_model(0.10, -0.05, 0.2, ChangePointLaw::exponential(1.0));
  std::map<FiltrationKind, Scenario> sc;
  std::map<FiltrationKind, DualSolution> sol;
  for (FiltrationKind k : {FiltrationKind::PriceOnly, FiltrationKind::ProgressiveS, FiltrationKind::InitiallyEnlargedS}) {
    Scenario s = make_scenario(m, 50, k, log_recip(), EpsPolicy::quantile(0.5), 10000, 9, 4);
    s.attach();
    sol[k] = solve_dual(s);
    sc.emplace(k, std::move(s));
  }
  // Paired differences of prior-weighted per-path utilities (strata are
  // equal-weight cells, so path averages are the prior-weighted aggregate).
  auto diff = [&](FiltrationKind a, FiltrationKind b) {
    const auto ua = utilities(sol[a].r_hat, Utility::log());
    const auto ub = utilities(sol[b].r_hat, Utility::log());
    std::vector<double> d(ua.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = ua[i] - ub[i];
    return std::pair{mean(d), stderr_of_mean(d)};
  };
  const auto [d1, s1] = diff(FiltrationKind::PriceOnly, FiltrationKind::ProgressiveS);
  const auto [d2, s2] = diff(FiltrationKind::ProgressiveS, FiltrationKind::InitiallyEnlargedS);
  const bool order = d1 <= 3.0 * s1 && d2 <= 3.0 * s2;

  std::string uiv_detail;
  bool uiv_ok = true;
  const std::pair<FiltrationKind, FiltrationKind> pairs[] = {
      {FiltrationKind::PriceOnly, FiltrationKind::ProgressiveS},
      {FiltrationKind::ProgressiveS, FiltrationKind::InitiallyEnlargedS},
      {FiltrationKind::PriceOnly, FiltrationKind::InitiallyEnlargedS}};
  for (const auto& [f, g] : pairs) {
    const IndifferenceResult r = uiv_root_solve(sc.at(f), sc.at(g), 1.0);
    const bool ok = r.c >= -3.0 * r.std_error;
    uiv_ok = uiv_ok && ok;
    const auto edges = std::count_if(r.per_stratum.begin(), r.per_stratum.end(),
                                     [](const IndifferenceValue& v) { return v.feasibility_edge; });
    uiv_detail += " " + filtration_name(f) + "<" + filtration_name(g) + ": c=" + fmt("%.4g", r.c) + "+-" +
                  fmt("%.2g", r.std_error);
    if (edges > 0) uiv_detail += " (" + std::to_string(edges) + " strata at the feasibility edge)";
  }
  return {order && uiv_ok, "u(price)-u(prog-s) " + fmt("%.4g", d1) + " (3se " + fmt("%.2g", 3 * s1) +
                               "), u(prog-s)-u(init-s) " + fmt("%.4g", d2) + " (3se " + fmt("%.2g", 3 * s2) +
                               "); UIV" + uiv_detail};
}

// 10 --------------------------------------------------------------------------
std::map<std::string, std::string> read_dir(const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    files[e.path().filename().string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return files;
}

Outcome determinism() {
  const std::string text = R"({
    "market": {"coeffs": {"mu1": 0.1, "mu2": -0.05, "sigma1": 0.2, "sigma2": 0.2},
               "law": {"type": "exponential", "rate": 1.0}, "horizon": 1.0},
    "filtration": "prog-s",
    "preferences": {"utility": "log", "loss": "neg_reciprocal"},
    "solver": {"x": 1.0, "eps_policy": {"quantile": 0.5}, "strata": 3},
    "execution": {"n_paths": 5000, "n_steps": 20, "seed": 11},
    "frontier": {"points": 3, "filtrations": ["price", "init-s"]},
    "uiv": {"pair": ["price", "init-s"]}
  })";
  const auto root = std::filesystem::temp_directory_path() / "cpopt_acceptance_determinism";
  std::filesystem::remove_all(root);
  std::map<unsigned, std::map<std::string, std::string>> outputs;
  std::ostringstream err;
  for (unsigned w : {1u, 4u, 8u}) {
    RunConfig cfg = parse_config(text);
    cfg.workers = w;
    cfg.output.directory = (root / std::to_string(w)).string();
    for (const char* cmd : {"simulate", "solve", "value", "paths", "replicate", "uiv", "frontier"})
      if (app::run_command(cmd, cfg, err) != 0) return {false, std::string(cmd) + " failed: " + err.str()};
    outputs[w] = read_dir(cfg.output.directory);
  }
  std::filesystem::remove_all(root);
  const bool same = outputs[1] == outputs[4] && outputs[1] == outputs[8];
  return {same && outputs[1].size() >= 10,
          std::to_string(outputs[1].size()) + " artifacts from 7 subcommands, byte-identical across 1/4/8 workers: " +
              (same ? "yes" : "no")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_s;  // runtime bound; 0 for none
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "closed-form Lagrangian inverses", 1.0, lagrangian_inverses},
      {2, "dual-primal oracle equivalence", 30.0, dual_primal_oracle},
      {3, "constraint residuals", 0.0, constraint_residuals},
      {4, "monotonicity suite", 60.0, monotonicity_suite},
      {5, "unconstrained log value", 10.0, unconstrained_log_value},
      {6, "UIV closed form vs analytics", 120.0, uiv_closed_form_vs_analytic},
      {7, "replication", 120.0, replication},
      {8, "filter oracle", 0.0, filter_oracle},
      {9, "information ordering", 0.0, information_ordering},
      {10, "determinism", 0.0, determinism},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s > 0.0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += "; over runtime budget " + fmt("%.0fs", c.budget_s);
    }
    if (!o.pass) ++failed;
    std::printf("%s [%d] %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
