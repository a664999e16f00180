#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpopt/dual_solver.hpp"

namespace cpopt {

struct FrontierSpec {
  std::vector<double> eps;  ///< absolute benchmarks; empty means quantile points
  std::size_t points = 5;   ///< quantile points between eps_min and eps_max
  std::vector<FiltrationKind> filtrations;
};

struct OutputSpec {
  std::string directory = "out";
  std::vector<std::string> formats{"json", "csv"};
  bool wants(const std::string& format) const;
};

struct RunConfig {
  MarketModel model;
  Filtration filtration;
  Preferences prefs;
  double x = 1.0;
  EpsPolicy eps = EpsPolicy::quantile(0.5);
  SolverOptions solver;
  std::size_t n_strata = 4;
  std::size_t n_paths = 10000;
  std::size_t n_steps = 50;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  OutputSpec output;
  FrontierSpec frontier;
  std::optional<std::pair<FiltrationKind, FiltrationKind>> uiv_pair;

  Scenario scenario() const;
  Scenario scenario(FiltrationKind kind) const;
};

/// Parses a configuration document. Errors name the offending key, and JSON
/// syntax errors report the line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
RunConfig config_from_json(const nlohmann::json& j);

Coefficient coefficient_from_json(const nlohmann::json& j, const std::string& key);
ChangePointLaw law_from_json(const nlohmann::json& j, double horizon, const std::string& key);

}  // namespace cpopt
