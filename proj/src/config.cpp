#include "cpopt/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "cpopt/errors.hpp"

namespace cpopt {

using nlohmann::json;

namespace {

std::string join(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw ConfigError(key + ": " + what);
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where.empty() ? "<root>" : where, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items())
    if (!ok.contains(k)) fail(join(where, k), "unknown key");
}

double number(const json& j, const std::string& key) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  }
  if (!j.is_number()) fail(key, "expected a number");
  return j.get<double>();
}

std::vector<double> numbers(const json& j, const std::string& key) {
  if (!j.is_array()) fail(key, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

std::uint64_t unsigned_int(const json& j, const std::string& key) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) fail(key, "expected a non-negative integer");
  if (j.is_number_integer() && j.get<std::int64_t>() < 0) fail(key, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

std::string text(const json& j, const std::string& key) {
  if (!j.is_string()) fail(key, "expected a string");
  return j.get<std::string>();
}

template <class F>
auto with_key(const std::string& key, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(key, 0) == 0) throw;
    throw ConfigError(key + ": " + msg);
  }
}

VolCase vol_case_from_json(const json& j, const std::string& key) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "identical") return VolCase::identical();
    if (s == "distinct") return VolCase::distinct();
    fail(key, "expected identical, distinct or {\"semi_identical\": {...}}");
  }
  only_keys(j, key, {"semi_identical"});
  const json& s = j.at("semi_identical");
  const std::string sk = join(key, "semi_identical");
  only_keys(s, sk, {"s_above", "s_below"});
  if (s.contains("s_above") == s.contains("s_below")) fail(sk, "give exactly one of s_above, s_below");
  if (s.contains("s_above")) {
    const double level = number(s.at("s_above"), join(sk, "s_above"));
    return VolCase::semi_identical([level](double, double price) { return price > level; });
  }
  const double level = number(s.at("s_below"), join(sk, "s_below"));
  return VolCase::semi_identical([level](double, double price) { return price < level; });
}

// Without an explicit case: equal representations are identical, two
// different constants are distinct.
VolCase detect_vol_case(const CoefficientSpec& c) {
  const auto* a = std::get_if<Coefficient::Constant>(&c.sigma1.repr());
  const auto* b = std::get_if<Coefficient::Constant>(&c.sigma2.repr());
  if (a != nullptr && b != nullptr) return a->value == b->value ? VolCase::identical() : VolCase::distinct();
  return VolCase::identical();
}

Utility utility_from_json(const json& j, const std::string& key) {
  const std::string s = text(j, key);
  if (s == "log") return Utility::log();
  if (s == "shifted_neg_reciprocal") return Utility::shifted_neg_reciprocal();
  fail(key, "expected log or shifted_neg_reciprocal");
}

Loss loss_from_json(const json& j, const std::string& key) {
  if (j.is_string()) {
    const std::string s = text(j, key);
    if (s == "neg_reciprocal") return Loss::neg_reciprocal(3.0);
    fail(key, "expected neg_reciprocal or an object with a type");
  }
  only_keys(j, key, {"type", "c", "gamma"});
  const std::string type = j.contains("type") ? text(j.at("type"), join(key, "type")) : "neg_reciprocal";
  if (type == "neg_reciprocal") {
    const double c = j.contains("c") ? number(j.at("c"), join(key, "c")) : 3.0;
    return with_key(join(key, "c"), [&] { return Loss::neg_reciprocal(c); });
  }
  if (type == "exponential") {
    if (!j.contains("gamma")) fail(join(key, "gamma"), "required for the exponential loss");
    const double g = number(j.at("gamma"), join(key, "gamma"));
    return with_key(join(key, "gamma"), [&] { return Loss::exponential(g); });
  }
  fail(join(key, "type"), "expected neg_reciprocal or exponential");
}

EpsPolicy eps_policy_from_json(const json& j, const std::string& key) {
  if (j.is_number()) return EpsPolicy::absolute(j.get<double>());
  only_keys(j, key, {"quantile", "absolute"});
  if (j.contains("quantile") == j.contains("absolute")) fail(key, "give exactly one of quantile, absolute");
  if (j.contains("absolute")) return EpsPolicy::absolute(number(j.at("absolute"), join(key, "absolute")));
  const double q = number(j.at("quantile"), join(key, "quantile"));
  if (!(q >= 0.0 && q <= 1.0)) fail(join(key, "quantile"), "must lie in [0, 1]");
  return EpsPolicy::quantile(q);
}

}  // namespace

bool OutputSpec::wants(const std::string& format) const {
  return std::find(formats.begin(), formats.end(), format) != formats.end();
}

Coefficient coefficient_from_json(const json& j, const std::string& key) {
  if (j.is_number()) return Coefficient(j.get<double>());
  if (!j.is_object() || j.size() != 1) fail(key, "expected a number or one of constant, time_table, bilinear");
  return with_key(key, [&]() -> Coefficient {
    if (j.contains("constant")) return Coefficient(number(j.at("constant"), join(key, "constant")));
    if (j.contains("time_table")) {
      const json& t = j.at("time_table");
      const std::string tk = join(key, "time_table");
      only_keys(t, tk, {"times", "values"});
      return Coefficient::time_table(numbers(t.at("times"), join(tk, "times")),
                                     numbers(t.at("values"), join(tk, "values")));
    }
    if (j.contains("bilinear")) {
      const json& b = j.at("bilinear");
      const std::string bk = join(key, "bilinear");
      only_keys(b, bk, {"times", "states", "values"});
      return Coefficient::bilinear(numbers(b.at("times"), join(bk, "times")),
                                   numbers(b.at("states"), join(bk, "states")),
                                   numbers(b.at("values"), join(bk, "values")));
    }
    fail(key, "expected one of constant, time_table, bilinear");
  });
}

ChangePointLaw law_from_json(const json& j, double horizon, const std::string& key) {
  only_keys(j, key, {"type", "rate", "truncated", "lo", "hi", "t0", "times", "probs"});
  const std::string type = text(j.at("type"), join(key, "type"));
  return with_key(key, [&]() -> ChangePointLaw {
    if (type == "exponential") {
      const double rate = number(j.at("rate"), join(key, "rate"));
      const bool trunc = j.contains("truncated") && j.at("truncated").get<bool>();
      return ChangePointLaw::exponential(rate, trunc ? horizon : std::numeric_limits<double>::infinity());
    }
    if (type == "uniform") {
      const double lo = j.contains("lo") ? number(j.at("lo"), join(key, "lo")) : 0.0;
      const double hi = j.contains("hi") ? number(j.at("hi"), join(key, "hi")) : horizon;
      return ChangePointLaw::uniform(lo, hi);
    }
    if (type == "point_mass") return ChangePointLaw::point_mass(number(j.at("t0"), join(key, "t0")));
    if (type == "discrete")
      return ChangePointLaw::discrete(numbers(j.at("times"), join(key, "times")),
                                      numbers(j.at("probs"), join(key, "probs")));
    fail(join(key, "type"), "expected exponential, uniform, point_mass or discrete");
  });
}

RunConfig config_from_json(const json& j) {
  only_keys(j, "", {"market", "filtration", "vol_case", "preferences", "solver", "execution", "output",
                    "frontier", "uiv"});
  RunConfig cfg;
  if (!j.contains("market")) fail("market", "required");
  {
    const json& m = j.at("market");
    only_keys(m, "market", {"coeffs", "law", "horizon", "s0"});
    cfg.model.horizon = m.contains("horizon") ? number(m.at("horizon"), "market.horizon") : 1.0;
    cfg.model.s0 = m.contains("s0") ? number(m.at("s0"), "market.s0") : 1.0;
    if (!(cfg.model.horizon > 0.0)) fail("market.horizon", "must be > 0");
    if (!(cfg.model.s0 > 0.0)) fail("market.s0", "must be > 0");
    if (!m.contains("coeffs")) fail("market.coeffs", "required");
    const json& c = m.at("coeffs");
    only_keys(c, "market.coeffs", {"mu1", "mu2", "sigma1", "sigma2"});
    for (const char* k : {"mu1", "mu2", "sigma1", "sigma2"})
      if (!c.contains(k)) fail(join("market.coeffs", k), "required");
    cfg.model.coeffs.mu1 = coefficient_from_json(c.at("mu1"), "market.coeffs.mu1");
    cfg.model.coeffs.mu2 = coefficient_from_json(c.at("mu2"), "market.coeffs.mu2");
    cfg.model.coeffs.sigma1 = coefficient_from_json(c.at("sigma1"), "market.coeffs.sigma1");
    cfg.model.coeffs.sigma2 = coefficient_from_json(c.at("sigma2"), "market.coeffs.sigma2");
    if (!m.contains("law")) fail("market.law", "required");
    cfg.model.law = law_from_json(m.at("law"), cfg.model.horizon, "market.law");
  }
  if (j.contains("filtration"))
    cfg.filtration.kind = with_key("filtration", [&] { return parse_filtration(text(j.at("filtration"), "filtration")); });
  cfg.filtration.vol = j.contains("vol_case") ? vol_case_from_json(j.at("vol_case"), "vol_case")
                                              : detect_vol_case(cfg.model.coeffs);

  if (j.contains("preferences")) {
    const json& p = j.at("preferences");
    only_keys(p, "preferences", {"utility", "loss", "epsilon"});
    if (p.contains("utility")) cfg.prefs.utility = utility_from_json(p.at("utility"), "preferences.utility");
    if (p.contains("loss")) cfg.prefs.loss = loss_from_json(p.at("loss"), "preferences.loss");
    if (p.contains("epsilon")) cfg.eps = EpsPolicy::absolute(number(p.at("epsilon"), "preferences.epsilon"));
  }
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    only_keys(s, "solver", {"x", "eps", "eps_policy", "tol", "strata"});
    if (s.contains("x")) cfg.x = number(s.at("x"), "solver.x");
    if (!(cfg.x > 0.0)) fail("solver.x", "must be > 0");
    if (s.contains("eps") && s.contains("eps_policy")) fail("solver", "give eps or eps_policy, not both");
    if (s.contains("eps")) cfg.eps = EpsPolicy::absolute(number(s.at("eps"), "solver.eps"));
    if (s.contains("eps_policy")) cfg.eps = eps_policy_from_json(s.at("eps_policy"), "solver.eps_policy");
    if (s.contains("tol")) cfg.solver.tol = number(s.at("tol"), "solver.tol");
    if (!(cfg.solver.tol > 0.0)) fail("solver.tol", "must be > 0");
    if (s.contains("strata")) cfg.n_strata = unsigned_int(s.at("strata"), "solver.strata");
    if (cfg.n_strata == 0) fail("solver.strata", "must be >= 1");
  }
  if (j.contains("execution")) {
    const json& e = j.at("execution");
    only_keys(e, "execution", {"n_paths", "n_steps", "seed", "workers"});
    if (e.contains("n_paths")) cfg.n_paths = unsigned_int(e.at("n_paths"), "execution.n_paths");
    if (e.contains("n_steps")) cfg.n_steps = unsigned_int(e.at("n_steps"), "execution.n_steps");
    if (e.contains("seed")) cfg.seed = unsigned_int(e.at("seed"), "execution.seed");
    if (e.contains("workers")) cfg.workers = static_cast<unsigned>(unsigned_int(e.at("workers"), "execution.workers"));
    if (cfg.n_paths == 0) fail("execution.n_paths", "must be >= 1");
    if (cfg.n_steps == 0) fail("execution.n_steps", "must be >= 1");
    if (cfg.workers == 0) fail("execution.workers", "must be >= 1");
  }
  if (j.contains("output")) {
    const json& o = j.at("output");
    only_keys(o, "output", {"directory", "formats"});
    if (o.contains("directory")) cfg.output.directory = text(o.at("directory"), "output.directory");
    if (o.contains("formats")) {
      cfg.output.formats.clear();
      if (!o.at("formats").is_array()) fail("output.formats", "expected an array");
      for (const auto& f : o.at("formats")) {
        const std::string s = text(f, "output.formats");
        if (s != "json" && s != "csv") fail("output.formats", "unknown format '" + s + "'");
        cfg.output.formats.push_back(s);
      }
    }
  }
  if (j.contains("frontier")) {
    const json& f = j.at("frontier");
    only_keys(f, "frontier", {"eps", "points", "filtrations"});
    if (f.contains("eps")) cfg.frontier.eps = numbers(f.at("eps"), "frontier.eps");
    if (f.contains("points")) cfg.frontier.points = unsigned_int(f.at("points"), "frontier.points");
    if (f.contains("filtrations")) {
      if (!f.at("filtrations").is_array()) fail("frontier.filtrations", "expected an array");
      for (const auto& s : f.at("filtrations"))
        cfg.frontier.filtrations.push_back(
            with_key("frontier.filtrations", [&] { return parse_filtration(text(s, "frontier.filtrations")); }));
    }
    if (cfg.frontier.eps.empty() && cfg.frontier.points == 0) fail("frontier", "eps grid is empty");
  }
  if (cfg.frontier.filtrations.empty()) cfg.frontier.filtrations.push_back(cfg.filtration.kind);
  if (j.contains("uiv")) {
    const json& u = j.at("uiv");
    only_keys(u, "uiv", {"pair"});
    const json& p = u.at("pair");
    if (!p.is_array() || p.size() != 2) fail("uiv.pair", "expected [coarse, fine]");
    cfg.uiv_pair = {with_key("uiv.pair", [&] { return parse_filtration(text(p[0], "uiv.pair")); }),
                    with_key("uiv.pair", [&] { return parse_filtration(text(p[1], "uiv.pair")); })};
  }
  return cfg;
}

RunConfig parse_config(const std::string& content) {
  json j;
  try {
    j = json::parse(content);
  } catch (const json::parse_error& e) {
    const std::size_t pos = std::min<std::size_t>(e.byte, content.size());
    const auto line = 1 + std::count(content.begin(), content.begin() + static_cast<std::ptrdiff_t>(pos), '\n');
    throw ConfigError("config line " + std::to_string(line) + ": " + e.what());
  }
  try {
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

Scenario RunConfig::scenario() const { return scenario(filtration.kind); }

Scenario RunConfig::scenario(FiltrationKind kind) const {
  Scenario s;
  s.model = model;
  s.grid = SimGrid(model.horizon, n_steps);
  s.filtration = filtration;
  s.filtration.kind = kind;
  s.prefs = prefs;
  s.x = x;
  s.eps = eps;
  s.n_paths = n_paths;
  s.seed = seed;
  s.n_strata = n_strata;
  s.exec.workers = workers;
  s.options = solver;
  return s;
}

}  // namespace cpopt
