#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "cpopt/config.hpp"

namespace cpopt::app {

/// Method selection for the indifference value.
enum class UivMethod { Auto, ClosedForm, RootSolve };

/// Each runner writes its artifacts into cfg.output.directory and returns the
/// primary JSON record. Errors propagate as exceptions.
nlohmann::json run_simulate(const RunConfig& cfg);
nlohmann::json run_solve(const RunConfig& cfg);
nlohmann::json run_value(const RunConfig& cfg);
nlohmann::json run_paths(const RunConfig& cfg);
nlohmann::json run_replicate(const RunConfig& cfg);
nlohmann::json run_uiv(const RunConfig& cfg, UivMethod method = UivMethod::Auto);
nlohmann::json run_frontier(const RunConfig& cfg);

/// Runs a subcommand and maps failures to exit codes: 0 success, 2 infeasible
/// benchmark, 1 anything else. Diagnostics go to `err`.
int run_command(const std::string& command, const RunConfig& cfg, std::ostream& err,
                UivMethod method = UivMethod::Auto);

/// Formats a double so that it round-trips and is identical across runs.
std::string format_number(double v);

}  // namespace cpopt::app
