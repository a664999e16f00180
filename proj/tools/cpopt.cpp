#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cpopt/app.hpp"
#include "cpopt/config.hpp"
#include "cpopt/errors.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> workers;
  std::optional<double> x;
  std::optional<double> eps;
  std::optional<std::string> filtration;
  std::optional<std::size_t> paths;
  std::optional<double> tol;
  std::optional<std::string> pair;
  std::string method = "auto";
};

cpopt::RunConfig build_config(const Overrides& o) {
  cpopt::RunConfig cfg = cpopt::load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.output.directory = *o.out;
  if (o.workers) cfg.workers = *o.workers;
  if (o.x) cfg.x = *o.x;
  if (o.eps) cfg.eps = cpopt::EpsPolicy::absolute(*o.eps);
  if (o.filtration) cfg.filtration.kind = cpopt::parse_filtration(*o.filtration);
  if (o.paths) cfg.n_paths = *o.paths;
  if (o.tol) cfg.solver.tol = *o.tol;
  if (o.pair) {
    const auto comma = o.pair->find(',');
    if (comma == std::string::npos) throw cpopt::ConfigError("--pair expects <F>,<G>");
    cfg.uiv_pair = {cpopt::parse_filtration(o.pair->substr(0, comma)),
                    cpopt::parse_filtration(o.pair->substr(comma + 1))};
  }
  if (cfg.workers == 0) throw cpopt::ConfigError("--workers must be at least 1");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Change-point portfolio optimization under a shortfall risk constraint"};
  app.require_subcommand(1);
  Overrides o;
  app.add_option("--config", o.config, "scenario file (JSON)");
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--workers", o.workers, "worker threads");

  const char* names[] = {"simulate", "solve", "value", "paths", "replicate", "uiv", "frontier"};
  const char* help[] = {"simulate price and density paths",
                        "solve the dual problem and report the multipliers",
                        "report the optimal expected utility",
                        "export optimal wealth and holdings along paths",
                        "replicate the optimal terminal wealth with the computed strategy",
                        "utility indifference value between two filtrations",
                        "sweep the risk benchmark"};
  for (int i = 0; i < 7; ++i) {
    CLI::App* sub = app.add_subcommand(names[i], help[i]);
    sub->add_option("--filtration", o.filtration, "init-w, init-s, prog-w, prog-s or price");
    sub->add_option("--paths", o.paths, "number of Monte Carlo paths");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--workers", o.workers, "worker threads");
    sub->add_option("--config", o.config, "scenario file (JSON)");
    if (std::string(names[i]) != "simulate") {
      sub->add_option("--x", o.x, "initial capital");
      sub->add_option("--eps", o.eps, "absolute risk benchmark");
      sub->add_option("--tol", o.tol, "solver tolerance");
    }
    if (std::string(names[i]) == "uiv") {
      sub->add_option("--pair", o.pair, "coarse and fine filtration, e.g. prog-s,init-s");
      sub->add_option("--method", o.method, "auto, closed-form or root-solve")
          ->check(CLI::IsMember({"auto", "closed-form", "root-solve"}));
    }
  }

  CLI11_PARSE(app, argc, argv);
  if (o.config.empty()) {
    std::cerr << "error: --config is required\n";
    return 1;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  cpopt::RunConfig cfg;
  try {
    cfg = build_config(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  const auto method = o.method == "closed-form"  ? cpopt::app::UivMethod::ClosedForm
                      : o.method == "root-solve" ? cpopt::app::UivMethod::RootSolve
                                                 : cpopt::app::UivMethod::Auto;
  return cpopt::app::run_command(command, cfg, std::cerr, method);
}
