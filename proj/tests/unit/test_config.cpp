#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cpopt/app.hpp"
#include "cpopt/config.hpp"
#include "cpopt/errors.hpp"

using namespace cpopt;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json minimal() {
  return json::parse(R"({
    "market": {
      "coeffs": {"mu1": 0.1, "mu2": -0.05, "sigma1": 0.2, "sigma2": 0.2},
      "law": {"type": "exponential", "rate": 1.0}
    },
    "execution": {"n_paths": 2000, "n_steps": 20, "seed": 11, "workers": 2}
  })");
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string error_of(const json& j) { return error_of(j.dump()); }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cpopt_test_config_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig config_in(json j, const fs::path& dir) {
  j["output"] = {{"directory", dir.string()}, {"formats", {"json", "csv"}}};
  return config_from_json(j);
}

}  // namespace

TEST_CASE("parsing") {
  SUBCASE("defaults for a minimal document") {
    const RunConfig cfg = parse_config(minimal().dump());
    CHECK(cfg.filtration.kind == FiltrationKind::ProgressiveS);
    CHECK(cfg.x == 1.0);
    CHECK(cfg.eps.kind == EpsPolicy::Kind::Quantile);
    CHECK(cfg.n_paths == 2000);
    CHECK(cfg.workers == 2);
  }
  SUBCASE("the example config parses") {
    const RunConfig cfg = load_config(CPOPT_SOURCE_DIR "/configs/example.json");
    CHECK(cfg.frontier.filtrations.size() == 3);
    REQUIRE(cfg.uiv_pair.has_value());
    CHECK(cfg.uiv_pair->first == FiltrationKind::ProgressiveS);
  }
  SUBCASE("syntax errors report the line") {
    const std::string e = error_of(std::string("{\n  \"market\": {\n    \"coeffs\": ,\n  }\n}"));
    CHECK(e.find("config line 3") != std::string::npos);
  }
  SUBCASE("unknown keys are named with their path") {
    json j = minimal();
    j["market"]["coeffs"]["mu3"] = 0.0;
    CHECK(error_of(j).find("market.coeffs.mu3: unknown key") != std::string::npos);
  }
  SUBCASE("missing sections") {
    json j = minimal();
    j.erase("market");
    CHECK(error_of(j).find("market: required") != std::string::npos);
  }
  SUBCASE("bad values") {
    json j = minimal();
    j["solver"] = {{"eps_policy", {{"quantile", 1.5}}}};
    CHECK(error_of(j).find("solver.eps_policy.quantile") != std::string::npos);
    j = minimal();
    j["execution"]["workers"] = 0;
    CHECK(error_of(j).find("execution.workers") != std::string::npos);
    j = minimal();
    j["filtration"] = "oracle";
    CHECK(error_of(j).find("filtration") == 0);
    j = minimal();
    j["market"]["law"] = {{"type", "gamma"}};
    CHECK(error_of(j).find("market.law.type") != std::string::npos);
    j = minimal();
    j["output"] = {{"formats", {"parquet"}}};
    CHECK(error_of(j).find("output.formats") != std::string::npos);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_config("/nonexistent/cpopt.json"), ConfigError);
  }
}

TEST_CASE("running scenarios") {
  SUBCASE("a minimal config writes solution.json") {
    const fs::path dir = scratch("minimal");
    std::ostringstream err;
    CHECK(app::run_command("solve", config_in(minimal(), dir), err) == 0);
    CHECK(fs::exists(dir / "solution.json"));
    CHECK(fs::exists(dir / "r_hat.csv"));
    CHECK(err.str().empty());
  }
  SUBCASE("a benchmark below eps_min exits with 2") {
    const fs::path dir = scratch("infeasible");
    json j = minimal();
    j["solver"] = {{"eps", 1e-6}};
    std::ostringstream err;
    CHECK(app::run_command("solve", config_in(j, dir), err) == 2);
    CHECK(err.str().find("infeasible") != std::string::npos);
  }
  SUBCASE("unknown subcommands exit with 1") {
    std::ostringstream err;
    CHECK(app::run_command("hedge", config_in(minimal(), scratch("unknown")), err) == 1);
  }
  SUBCASE("identical configs give identical bytes") {
    const fs::path a = scratch("repeat_a");
    const fs::path b = scratch("repeat_b");
    std::ostringstream err;
    REQUIRE(app::run_command("solve", config_in(minimal(), a), err) == 0);
    REQUIRE(app::run_command("solve", config_in(minimal(), b), err) == 0);
    CHECK(slurp(a / "solution.json") == slurp(b / "solution.json"));
    CHECK(slurp(a / "r_hat.csv") == slurp(b / "r_hat.csv"));
  }
}

TEST_CASE("frontier") {
  SUBCASE("at eps_max the multiplier vanishes") {
    json j = minimal();
    j["frontier"] = {{"points", 1}, {"filtrations", {"price", "prog-s", "init-s"}}};
    j["solver"] = {{"strata", 3}};
    const json out = app::run_frontier(config_in(j, scratch("frontier_max")));
    REQUIRE(out["rows"].size() == 3);
    for (const auto& row : out["rows"]) {
      CHECK(row["status"] == "ok");
      CHECK(row["lambda_star"].get<double>() == 0.0);
    }
  }
  SUBCASE("value is nondecreasing in eps") {
    json j = minimal();
    j["frontier"] = {{"points", 5}, {"filtrations", {"price", "prog-s", "init-s"}}};
    j["solver"] = {{"strata", 3}};
    const json out = app::run_frontier(config_in(j, scratch("frontier_grid")));
    REQUIRE(out["rows"].size() == 15);
    for (std::size_t f = 0; f < 3; ++f) {
      for (std::size_t i = 1; i < 5; ++i) {
        const json& lo = out["rows"][5 * f + i - 1];
        const json& hi = out["rows"][5 * f + i];
        REQUIRE(lo["status"] == "ok");
        REQUIRE(hi["status"] == "ok");
        const double se = std::max(lo["stderr"].get<double>(), hi["stderr"].get<double>());
        CHECK(hi["eps"].get<double>() >= lo["eps"].get<double>());
        CHECK(hi["value"].get<double>() >= lo["value"].get<double>() - 3.0 * se);
      }
    }
  }
  SUBCASE("nested filtrations at equal eps") {
    json j = minimal();
    j["filtration"] = "price";
    const RunConfig probe = config_in(j, scratch("frontier_probe"));
    const json sol = app::run_solve(probe);
    const double eps = sol["eps"].get<double>();
    j["frontier"] = {{"eps", {eps}}, {"filtrations", {"price", "prog-s"}}};
    const json out = app::run_frontier(config_in(j, scratch("frontier_nested")));
    REQUIRE(out["rows"].size() == 2);
    const json& f = out["rows"][0];
    const json& g = out["rows"][1];
    REQUIRE(f["status"] == "ok");
    REQUIRE(g["status"] == "ok");
    const double se = std::hypot(f["stderr"].get<double>(), g["stderr"].get<double>());
    CHECK(g["value"].get<double>() >= f["value"].get<double>() - 3.0 * se);
  }
}
