#include "cpopt/app.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "cpopt/errors.hpp"
#include "cpopt/indifference.hpp"
#include "cpopt/information.hpp"
#include "cpopt/wealth.hpp"

namespace cpopt::app {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

fs::path out_dir(const RunConfig& cfg) {
  fs::path dir(cfg.output.directory);
  fs::create_directories(dir);
  return dir;
}

void write_json(const RunConfig& cfg, const std::string& name, const json& j) {
  if (!cfg.output.wants("json")) return;
  std::ofstream out(out_dir(cfg) / name);
  out << j.dump(2) << "\n";
  if (!out) throw Error("cannot write " + name);
}

class CsvWriter {
 public:
  CsvWriter(const RunConfig& cfg, const std::string& name, const std::string& header)
      : enabled_(cfg.output.wants("csv")) {
    if (!enabled_) return;
    out_.open(out_dir(cfg) / name);
    out_ << header << "\n";
  }
  bool enabled() const { return enabled_; }
  std::ofstream& stream() { return out_; }

 private:
  bool enabled_;
  std::ofstream out_;
};

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json run_header(const RunConfig& cfg, FiltrationKind kind) {
  return {{"filtration", filtration_name(kind)},
          {"x", cfg.x},
          {"n_paths", cfg.n_paths},
          {"n_steps", cfg.n_steps},
          {"seed", cfg.seed}};
}

json stratum_json(const StratumSolution& s, const Stratum& st, const ValueReport& v) {
  return {{"weight", st.weight},
          {"tau_lo", number_or_null(st.tau_lo)},
          {"tau_hi", number_or_null(st.tau_hi)},
          {"lambda_star", s.lambda_star},
          {"y_hat", s.y_hat},
          {"binding", s.binding},
          {"eps", s.eps},
          {"eps_effective", s.eps_effective},
          {"eps_min", s.bounds.eps_min},
          {"eps_max", s.bounds.eps_max},
          {"c_star", s.bounds.c_star},
          {"residuals", {{"budget", s.budget_residual}, {"risk", s.binding ? s.risk_residual : 0.0}}},
          {"value", v.value},
          {"stderr", v.std_error}};
}

struct Solved {
  Scenario scenario;
  DualSolution sol;
  std::vector<ValueReport> values;  ///< per stratum, aggregate last
};

Solved solve_scenario(const RunConfig& cfg, FiltrationKind kind) {
  Solved s{cfg.scenario(kind), {}, {}};
  s.scenario.attach();
  s.sol = solve_dual(s.scenario);
  s.values = stratified_value(s.sol, s.scenario);
  return s;
}

json solution_json(const RunConfig& cfg, const Solved& s) {
  json j = run_header(cfg, s.scenario.filtration.kind);
  const auto& strata = s.sol.strata;
  double lam = 0.0, y = 0.0, eps = 0.0, eps_eff = 0.0, emin = 0.0, emax = 0.0, cst = 0.0;
  double rb = 0.0, rr = 0.0;
  bool binding = false;
  for (std::size_t i = 0; i < strata.size(); ++i) {
    const double w = s.sol.weights[i];
    lam += w * strata[i].lambda_star;
    y += w * strata[i].y_hat;
    eps += w * strata[i].eps;
    eps_eff += w * strata[i].eps_effective;
    emin += w * strata[i].bounds.eps_min;
    emax += w * strata[i].bounds.eps_max;
    cst += w * strata[i].bounds.c_star;
    rb = std::max(rb, std::abs(strata[i].budget_residual));
    if (strata[i].binding) rr = std::max(rr, std::abs(strata[i].risk_residual));
    binding = binding || strata[i].binding;
  }
  if (strata.size() == 1) {
    rb = strata[0].budget_residual;
    rr = strata[0].binding ? strata[0].risk_residual : 0.0;
  }
  j["aggregation"] = strata.size() == 1 ? "single" : "prior_weighted_mean";
  j["lambda_star"] = lam;
  j["y_hat"] = y;
  j["binding"] = binding;
  j["eps"] = eps;
  j["eps_effective"] = eps_eff;
  j["eps_min"] = emin;
  j["eps_max"] = emax;
  j["c_star"] = cst;
  j["residuals"] = {{"budget", rb}, {"risk", rr}};
  j["value"] = s.values.back().value;
  j["stderr"] = s.values.back().std_error;
  json per = json::array();
  for (std::size_t i = 0; i < strata.size(); ++i)
    per.push_back(stratum_json(strata[i], s.scenario.strata[i], s.values[i]));
  j["per_stratum"] = per;
  return j;
}

bool closed_form_wealth(const Scenario& sc) {
  const auto& c = sc.model.coeffs;
  return std::holds_alternative<Utility::Log>(sc.prefs.utility.variant()) &&
         std::holds_alternative<Loss::NegReciprocal>(sc.prefs.loss.variant()) &&
         initially_enlarged(sc.filtration.kind) && c.mu1.state_free() && c.mu2.state_free() &&
         c.sigma1.state_free() && c.sigma2.state_free();
}

bool closed_form_uiv(const Preferences& p) {
  return std::holds_alternative<Utility::ShiftedNegReciprocal>(p.utility.variant()) &&
         std::holds_alternative<Loss::NegReciprocal>(p.loss.variant());
}

// Wealth and holdings on every path of the panel, closed form when available.
struct WealthPanel {
  std::string method;
  std::vector<std::vector<double>> x_hat;
  std::vector<StrategyPath> pi;
};

WealthPanel wealth_panel(const Solved& s, const PathPanel& panel) {
  WealthPanel w;
  const std::size_t n_paths = panel.paths.size();
  if (closed_form_wealth(s.scenario)) {
    w.method = "closed-form";
    w.x_hat.resize(n_paths);
    w.pi.resize(n_paths);
    parallel_for(n_paths, s.scenario.exec, [&](std::size_t i) {
      const auto& sol = s.sol.strata[s.sol.stratum_of[i]];
      const auto& obs = panel.observed[i];
      const ClosedFormExample ex(s.scenario.prefs, sol.lambda_star, sol.y_hat, panel.grid, obs.mpr.lambda);
      w.x_hat[i] = wealth_path_closed_form(ex, obs.density).x_hat;
      w.pi[i] = strategy_closed_form(ex, obs.density, obs.mpr.sigma);
    });
    return w;
  }
  w.method = "regression";
  RegressionWealth rw = wealth_path_regression(s.sol, s.scenario, panel);
  w.pi = strategy_regression(s.sol, s.scenario, panel);
  w.x_hat = std::move(rw.x_hat);
  return w;
}

}  // namespace

json run_simulate(const RunConfig& cfg) {
  const Scenario sc = cfg.scenario();
  sc.model.validate();
  const auto paths = simulate_paths(sc.model, sc.grid, sc.n_paths, sc.seed, sc.exec);
  std::vector<ObservedPath> obs(paths.size());
  parallel_for(paths.size(), sc.exec,
               [&](std::size_t i) { obs[i] = observe(sc.model, paths[i], sc.filtration); });

  CsvWriter pcsv(cfg, "paths.csv", "path,step,t,W,S_tilde,S,regime,tau");
  CsvWriter dcsv(cfg, "density.csv", "path,step,t,Lambda,Z,p");
  double s_sum = 0.0, s_sq = 0.0, z_sum = 0.0, z_sq = 0.0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto& p = paths[i];
    const auto w = p.brownian();
    const std::size_t n = p.n_steps();
    for (std::size_t k = 0; k <= n; ++k) {
      const std::string t = format_number(sc.grid.time(k));
      if (pcsv.enabled())
        pcsv.stream() << i << ',' << k << ',' << t << ',' << format_number(w[k]) << ','
                      << format_number(p.s_tilde[k]) << ',' << format_number(p.s[k]) << ','
                      << static_cast<int>(p.regime[k]) << ',' << format_number(p.tau) << '\n';
      if (dcsv.enabled())
        dcsv.stream() << i << ',' << k << ',' << t << ','
                      << (k < n ? format_number(obs[i].mpr.lambda[k]) : std::string()) << ','
                      << format_number(obs[i].density.z[k]) << ',' << format_number(obs[i].p[k]) << '\n';
    }
    s_sum += p.s.back();
    s_sq += p.s.back() * p.s.back();
    z_sum += obs[i].density.z.back();
    z_sq += obs[i].density.z.back() * obs[i].density.z.back();
  }
  const double n = static_cast<double>(paths.size());
  auto se = [n](double sum, double sq) {
    return n > 1 ? std::sqrt(std::max(0.0, sq / n - (sum / n) * (sum / n)) * n / (n - 1) / n) : 0.0;
  };
  json j = run_header(cfg, sc.filtration.kind);
  j["horizon"] = sc.model.horizon;
  j["mean_S_T"] = s_sum / n;
  j["stderr_S_T"] = se(s_sum, s_sq);
  j["mean_Z_T"] = z_sum / n;
  j["stderr_Z_T"] = se(z_sum, z_sq);
  write_json(cfg, "simulate.json", j);
  return j;
}

json run_solve(const RunConfig& cfg) {
  const Solved s = solve_scenario(cfg, cfg.filtration.kind);
  json j = solution_json(cfg, s);
  write_json(cfg, "solution.json", j);
  CsvWriter csv(cfg, "r_hat.csv", "path,stratum,z_T,r_hat");
  if (csv.enabled())
    for (std::size_t i = 0; i < s.sol.r_hat.size(); ++i)
      csv.stream() << i << ',' << s.sol.stratum_of[i] << ',' << format_number(s.scenario.sample.z_T[i])
                   << ',' << format_number(s.sol.r_hat[i]) << '\n';
  return j;
}

json run_value(const RunConfig& cfg) {
  const Solved s = solve_scenario(cfg, cfg.filtration.kind);
  json j = run_header(cfg, s.scenario.filtration.kind);
  j["value"] = s.values.back().value;
  j["stderr"] = s.values.back().std_error;
  json per = json::array();
  for (std::size_t i = 0; i + 1 < s.values.size(); ++i)
    per.push_back({{"stratum", i},
                   {"weight", s.sol.weights[i]},
                   {"value", s.values[i].value},
                   {"stderr", s.values[i].std_error}});
  j["per_stratum"] = per;
  write_json(cfg, "value.json", j);
  return j;
}

json run_paths(const RunConfig& cfg) {
  const Solved s = solve_scenario(cfg, cfg.filtration.kind);
  const PathPanel panel = build_panel(s.scenario);
  const WealthPanel w = wealth_panel(s, panel);
  CsvWriter csv(cfg, "wealth.csv", "path,step,t,Z,X_hat,pi_hat");
  if (csv.enabled()) {
    for (std::size_t i = 0; i < panel.paths.size(); ++i) {
      const std::size_t n = panel.grid.n_steps;
      for (std::size_t k = 0; k <= n; ++k)
        csv.stream() << i << ',' << k << ',' << format_number(panel.grid.time(k)) << ','
                     << format_number(panel.observed[i].density.z[k]) << ','
                     << format_number(w.x_hat[i][k]) << ','
                     << (k < n ? format_number(w.pi[i].pi_hat[k]) : std::string()) << '\n';
    }
  }
  json j = run_header(cfg, s.scenario.filtration.kind);
  j["method"] = w.method;
  write_json(cfg, "paths.json", j);
  return j;
}

json run_replicate(const RunConfig& cfg) {
  const Solved s = solve_scenario(cfg, cfg.filtration.kind);
  const PathPanel panel = build_panel(s.scenario);
  const WealthPanel w = wealth_panel(s, panel);
  std::vector<ReplicationReport> reports(panel.paths.size());
  for (std::size_t i = 0; i < panel.paths.size(); ++i)
    reports[i] = replicate(w.pi[i], panel.paths[i], cfg.x, s.sol.r_hat[i]);
  const ReplicationSummary sum = summarize_replication(reports);
  json j = run_header(cfg, s.scenario.filtration.kind);
  j["method"] = w.method;
  j["rmse"] = sum.rmse;
  j["relative_rmse"] = sum.relative_rmse;
  j["mean_target"] = sum.mean_target;
  write_json(cfg, "replicate.json", j);
  return j;
}

json run_uiv(const RunConfig& cfg, UivMethod method) {
  if (!cfg.uiv_pair) throw ConfigError("uiv: no filtration pair given (use --pair F,G)");
  const auto [kf, kg] = *cfg.uiv_pair;
  Scenario f = cfg.scenario(kf);
  Scenario g = cfg.scenario(kg);
  f.attach();
  g.attach();
  const bool closed = method == UivMethod::ClosedForm ||
                      (method == UivMethod::Auto && closed_form_uiv(cfg.prefs));
  if (method == UivMethod::ClosedForm && !closed_form_uiv(cfg.prefs))
    throw ConfigError("uiv: the closed form needs shifted_neg_reciprocal utility with the reciprocal loss");
  IndifferenceResult r;
  if (closed) {
    const bool f_strat = f.strata.size() > 1 && f.strata.size() == g.strata.size();
    r = uiv_closed_form(f.sample.z_T, g.sample.z_T, cfg.x, g.strata, f_strat);
    r.coarse = filtration_name(kf);
    r.fine = filtration_name(kg);
  } else {
    r = uiv_root_solve(f, g, cfg.x);
  }
  json j = {{"coarse", r.coarse}, {"fine", r.fine},   {"method", r.method},
            {"x", cfg.x},         {"c", r.c},         {"stderr", number_or_null(r.std_error)},
            {"n_paths", cfg.n_paths}, {"n_steps", cfg.n_steps}, {"seed", cfg.seed}};
  json per = json::array();
  for (const auto& v : r.per_stratum)
    per.push_back({{"stratum", v.stratum},
                   {"weight", g.strata[static_cast<std::size_t>(v.stratum)].weight},
                   {"c", v.c},
                   {"stderr", number_or_null(v.std_error)},
                   {"feasibility_edge", v.feasibility_edge}});
  j["per_stratum"] = per;
  write_json(cfg, "uiv.json", j);
  return j;
}

json run_frontier(const RunConfig& cfg) {
  CsvWriter csv(cfg, "frontier.csv", "filtration,eps,lambda_star,y_hat,value,stderr,status");
  json rows = json::array();
  for (const FiltrationKind kind : cfg.frontier.filtrations) {
    Scenario sc = cfg.scenario(kind);
    sc.attach();
    std::vector<EpsPolicy> cells;
    if (!cfg.frontier.eps.empty()) {
      for (const double e : cfg.frontier.eps) cells.push_back(EpsPolicy::absolute(e));
    } else {
      const std::size_t k = cfg.frontier.points;
      for (std::size_t i = 0; i < k; ++i)
        cells.push_back(EpsPolicy::quantile(k == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(k - 1)));
    }
    for (const EpsPolicy& cell : cells) {
      json row = {{"filtration", filtration_name(kind)}};
      sc.eps = cell;
      try {
        const DualSolution sol = solve_dual(sc);
        const auto values = stratified_value(sol, sc);
        double eps = 0.0, lam = 0.0, y = 0.0;
        for (std::size_t i = 0; i < sol.strata.size(); ++i) {
          eps += sol.weights[i] * sol.strata[i].eps;
          lam += sol.weights[i] * sol.strata[i].lambda_star;
          y += sol.weights[i] * sol.strata[i].y_hat;
        }
        row["eps"] = eps;
        row["lambda_star"] = lam;
        row["y_hat"] = y;
        row["value"] = values.back().value;
        row["stderr"] = values.back().std_error;
        row["status"] = "ok";
      } catch (const Error& e) {
        row["eps"] = cell.kind == EpsPolicy::Kind::Absolute ? json(cell.value) : json(nullptr);
        row["status"] = std::string("NA: ") + e.what();
      }
      if (csv.enabled()) {
        auto field = [&](const char* key) {
          return row.contains(key) && row[key].is_number() ? format_number(row[key].get<double>())
                                                           : std::string("NA");
        };
        std::string status = row["status"].get<std::string>();
        for (char& ch : status)
          if (ch == ',' || ch == '\n') ch = ';';
        csv.stream() << filtration_name(kind) << ',' << field("eps") << ',' << field("lambda_star") << ','
                     << field("y_hat") << ',' << field("value") << ',' << field("stderr") << ',' << status
                     << '\n';
      }
      rows.push_back(row);
    }
  }
  json j = {{"n_paths", cfg.n_paths}, {"n_steps", cfg.n_steps}, {"seed", cfg.seed}, {"rows", rows}};
  write_json(cfg, "frontier.json", j);
  return j;
}

int run_command(const std::string& command, const RunConfig& cfg, std::ostream& err, UivMethod method) {
  try {
    if (command == "simulate") run_simulate(cfg);
    else if (command == "solve") run_solve(cfg);
    else if (command == "value") run_value(cfg);
    else if (command == "paths") run_paths(cfg);
    else if (command == "replicate") run_replicate(cfg);
    else if (command == "uiv") run_uiv(cfg, method);
    else if (command == "frontier") run_frontier(cfg);
    else {
      err << "error: unknown subcommand '" << command << "'\n";
      return 1;
    }
    return 0;
  } catch (const Infeasible& e) {
    err << "infeasible: eps=" << format_number(e.eps()) << " is below eps_min="
        << format_number(e.eps_min()) << " (the risk benchmark cannot be met)\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cpopt::app
