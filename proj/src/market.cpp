#include "cpopt/market.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cpopt/errors.hpp"
#include "cpopt/rng.hpp"
#include "overloaded.hpp"

namespace cpopt {

namespace {

using detail::Overloaded;

void check_breakpoints(const std::vector<double>& xs, const char* what) {
  if (xs.empty()) throw ConfigError(std::string(what) + ": empty breakpoint list");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i])) throw ConfigError(std::string(what) + ": non-finite breakpoint");
    if (i > 0 && xs[i] < xs[i - 1])
      throw ConfigError(std::string(what) + ": breakpoints must be non-decreasing");
  }
}

// Segment containing x: returns j with xs[j] <= x < xs[j+1] and the weight of
// xs[j+1]. Outside the range the nearest end value is used with weight 0.
struct Segment {
  std::size_t j;
  double w;
};

Segment locate(const std::vector<double>& xs, double x) {
  const std::size_t n = xs.size();
  if (n == 1 || x < xs.front()) return {0, 0.0};
  if (x >= xs.back()) return {n - 1, 0.0};
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t j = static_cast<std::size_t>(it - xs.begin()) - 1;
  const double w = (x - xs[j]) / (xs[j + 1] - xs[j]);
  return {j, w};
}

double blend(double a, double b, double w) { return w == 0.0 ? a : a + w * (b - a); }

double interp1(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  const Segment s = locate(xs, x);
  if (s.w == 0.0) return ys[s.j];
  return blend(ys[s.j], ys[s.j + 1], s.w);
}

}  // namespace

Coefficient::Coefficient(Repr repr) : repr_(std::move(repr)) {
  std::visit(Overloaded{
                 [](const Constant& c) {
                   if (!std::isfinite(c.value)) throw ConfigError("coefficient: non-finite constant");
                 },
                 [](const TimeTable& t) {
                   check_breakpoints(t.times, "time table");
                   if (t.values.size() != t.times.size())
                     throw ConfigError("time table: values and times differ in length");
                 },
                 [](const Bilinear& b) {
                   check_breakpoints(b.times, "bilinear table times");
                   check_breakpoints(b.states, "bilinear table states");
                   if (b.values.size() != b.times.size() * b.states.size())
                     throw ConfigError("bilinear table: expected times x states values");
                 },
                 [](const Callable& c) {
                   if (!c.fn) throw ConfigError("coefficient: empty callable");
                 },
             },
             repr_);
}

Coefficient Coefficient::time_table(std::vector<double> times, std::vector<double> values) {
  return Coefficient(Repr{TimeTable{std::move(times), std::move(values)}});
}

Coefficient Coefficient::bilinear(std::vector<double> times, std::vector<double> states,
                                  std::vector<double> values) {
  return Coefficient(Repr{Bilinear{std::move(times), std::move(states), std::move(values)}});
}

Coefficient Coefficient::callable(std::function<double(double, double)> fn) {
  return Coefficient(Repr{Callable{std::move(fn)}});
}

double Coefficient::operator()(double t, double x) const {
  return std::visit(
      Overloaded{
          [](const Constant& c) { return c.value; },
          [t](const TimeTable& tt) { return interp1(tt.times, tt.values, t); },
          [t, x](const Bilinear& b) {
            const std::size_t m = b.states.size();
            const Segment ts = locate(b.times, t);
            const Segment xs = locate(b.states, x);
            auto row = [&](std::size_t i) {
              const double* v = b.values.data() + i * m;
              return xs.w == 0.0 ? v[xs.j] : blend(v[xs.j], v[xs.j + 1], xs.w);
            };
            if (ts.w == 0.0) return row(ts.j);
            return blend(row(ts.j), row(ts.j + 1), ts.w);
          },
          [t, x](const Callable& c) { return c.fn(t, x); },
      },
      repr_);
}

bool Coefficient::state_free() const {
  return std::holds_alternative<Constant>(repr_) || std::holds_alternative<TimeTable>(repr_);
}

// ---------------------------------------------------------------------------

ChangePointLaw::ChangePointLaw(Variant law) : law_(std::move(law)) {
  std::visit(Overloaded{
                 [](const Exponential& e) {
                   if (!(e.rate > 0.0) || !std::isfinite(e.rate))
                     throw ConfigError("exponential law: rate must be positive");
                   if (!(e.truncate_at > 0.0))
                     throw ConfigError("exponential law: truncation point must be positive");
                 },
                 [](const Uniform& u) {
                   if (!(u.lo >= 0.0) || !(u.hi > u.lo) || !std::isfinite(u.hi))
                     throw ConfigError("uniform law: need 0 <= lo < hi < inf");
                 },
                 [](const PointMass& p) {
                   if (!(p.t0 >= 0.0)) throw ConfigError("point mass: location must be >= 0");
                 },
                 [](const Discrete& d) {
                   if (d.times.empty() || d.times.size() != d.probs.size())
                     throw ConfigError("discrete law: times and probabilities differ in length");
                   double total = 0.0;
                   for (std::size_t i = 0; i < d.times.size(); ++i) {
                     if (!(d.times[i] >= 0.0)) throw ConfigError("discrete law: negative support point");
                     if (i > 0 && !(d.times[i] > d.times[i - 1]))
                       throw ConfigError("discrete law: support must be strictly increasing");
                     if (!(d.probs[i] >= 0.0)) throw ConfigError("discrete law: negative probability");
                     total += d.probs[i];
                   }
                   if (std::abs(total - 1.0) > 1e-12)
                     throw ConfigError("discrete law: probabilities must sum to 1");
                 },
             },
             law_);
}

ChangePointLaw ChangePointLaw::exponential(double rate, double truncate_at) {
  return ChangePointLaw(Variant{Exponential{rate, truncate_at}});
}
ChangePointLaw ChangePointLaw::uniform(double lo, double hi) {
  return ChangePointLaw(Variant{Uniform{lo, hi}});
}
ChangePointLaw ChangePointLaw::point_mass(double t0) {
  return ChangePointLaw(Variant{PointMass{t0}});
}
ChangePointLaw ChangePointLaw::discrete(std::vector<double> times, std::vector<double> probs) {
  return ChangePointLaw(Variant{Discrete{std::move(times), std::move(probs)}});
}

double ChangePointLaw::sample(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return std::visit(
      Overloaded{
          [&](const Exponential& e) {
            const double u = unif(rng);
            if (std::isinf(e.truncate_at)) return -std::log1p(-u) / e.rate;
            return -std::log1p(u * std::expm1(-e.rate * e.truncate_at)) / e.rate;
          },
          [&](const Uniform& u) { return u.lo + (u.hi - u.lo) * unif(rng); },
          [](const PointMass& p) { return p.t0; },
          [&](const Discrete& d) {
            const double u = unif(rng);
            double acc = 0.0;
            for (std::size_t i = 0; i < d.times.size(); ++i) {
              acc += d.probs[i];
              if (u < acc) return d.times[i];
            }
            return d.times.back();
          },
      },
      law_);
}

double ChangePointLaw::cdf(double t) const {
  return std::visit(Overloaded{
                        [t](const Exponential& e) {
                          if (t <= 0.0) return 0.0;
                          if (std::isinf(e.truncate_at)) return -std::expm1(-e.rate * t);
                          if (t >= e.truncate_at) return 1.0;
                          return std::expm1(-e.rate * t) / std::expm1(-e.rate * e.truncate_at);
                        },
                        [t](const Uniform& u) {
                          if (t <= u.lo) return 0.0;
                          if (t >= u.hi) return 1.0;
                          return (t - u.lo) / (u.hi - u.lo);
                        },
                        [t](const PointMass& p) { return t >= p.t0 ? 1.0 : 0.0; },
                        [t](const Discrete& d) {
                          double acc = 0.0;
                          for (std::size_t i = 0; i < d.times.size() && d.times[i] <= t; ++i)
                            acc += d.probs[i];
                          return std::min(acc, 1.0);
                        },
                    },
                    law_);
}

double ChangePointLaw::survival_from(double t) const {
  return std::visit(Overloaded{
                        [this, t](const Exponential&) { return 1.0 - cdf(t); },
                        [this, t](const Uniform&) { return 1.0 - cdf(t); },
                        [t](const PointMass& p) { return t <= p.t0 ? 1.0 : 0.0; },
                        [t](const Discrete& d) {
                          double acc = 0.0;
                          for (std::size_t i = 0; i < d.times.size(); ++i)
                            if (d.times[i] >= t) acc += d.probs[i];
                          return std::min(acc, 1.0);
                        },
                    },
                    law_);
}

double ChangePointLaw::cumulative_hazard(double t) const {
  return std::visit(
      Overloaded{
          [t](const Exponential& e) {
            if (t <= 0.0) return 0.0;
            if (std::isinf(e.truncate_at)) return e.rate * t;
            if (t >= e.truncate_at) return kInf;
            // S(t) = (e^{-rt} - e^{-rT}) / (1 - e^{-rT})
            const double num = std::exp(-e.rate * t) - std::exp(-e.rate * e.truncate_at);
            return -std::log(num / -std::expm1(-e.rate * e.truncate_at));
          },
          [t](const Uniform& u) {
            if (t <= u.lo) return 0.0;
            if (t >= u.hi) return kInf;
            return -std::log((u.hi - t) / (u.hi - u.lo));
          },
          [t](const PointMass& p) { return t >= p.t0 ? 1.0 : 0.0; },
          [t](const Discrete& d) {
            double acc = 0.0;
            double remaining = 1.0;
            for (std::size_t i = 0; i < d.times.size() && d.times[i] <= t; ++i) {
              if (remaining > 0.0) acc += d.probs[i] / remaining;
              remaining -= d.probs[i];
            }
            return acc;
          },
      },
      law_);
}

bool ChangePointLaw::has_atoms() const {
  return std::holds_alternative<PointMass>(law_) || std::holds_alternative<Discrete>(law_);
}

void MarketModel::validate() const {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("market: horizon must be > 0");
  if (!(s0 > 0.0) || !std::isfinite(s0)) throw ConfigError("market: s0 must be > 0");
}

SimGrid::SimGrid(double horizon_, std::size_t n_steps_) : horizon(horizon_), n_steps(n_steps_) {
  if (n_steps == 0) throw ConfigError("grid: n_steps must be >= 1");
  if (!(horizon > 0.0)) throw ConfigError("grid: horizon must be > 0");
}

std::vector<double> PathBundle::brownian() const {
  std::vector<double> w(dW.size() + 1, 0.0);
  for (std::size_t k = 0; k < dW.size(); ++k) w[k + 1] = w[k] + dW[k];
  return w;
}

double sample_change_point(const ChangePointLaw& law, std::mt19937_64& rng) {
  return law.sample(rng);
}

PathBundle simulate_path(const MarketModel& model, const SimGrid& grid, double tau,
                         std::span<const double> dW, std::size_t path_index) {
  const std::size_t n = grid.n_steps;
  if (dW.size() != n) throw ConfigError("simulate_path: increment count differs from grid");
  const double dt = grid.dt();
  PathBundle p;
  p.grid = grid;
  p.tau = tau;
  p.dW.assign(dW.begin(), dW.end());
  p.s_tilde.resize(n + 1);
  p.s.resize(n + 1);
  p.qv.resize(n + 1);
  p.regime.resize(n + 1);
  p.s_tilde[0] = 0.0;
  p.qv[0] = 0.0;
  p.s[0] = model.s0;
  for (std::size_t k = 0; k <= n; ++k) p.regime[k] = grid.time(k) > tau ? 1 : 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = grid.time(k);
    const bool after = p.regime[k] != 0;
    const double x = p.s_tilde[k];
    const double mu = model.coeffs.drift(after, t, x);
    const double sig = model.coeffs.vol(after, t, x);
    if (!(sig > 0.0))
      throw ConfigError("volatility must be positive: sigma" + std::string(after ? "2" : "1") + "(" +
                        std::to_string(t) + ", " + std::to_string(x) + ") = " + std::to_string(sig));
    p.s_tilde[k + 1] = x + mu * dt + sig * dW[k];
    p.qv[k + 1] = p.qv[k] + sig * sig * dt;
    p.s[k + 1] = model.s0 * std::exp(p.s_tilde[k + 1] - 0.5 * p.qv[k + 1]);
    if (!std::isfinite(p.s_tilde[k + 1]) || !std::isfinite(p.s[k + 1]) || !(p.s[k + 1] > 0.0))
      throw NonFiniteState(path_index, k + 1);
  }
  return p;
}

PathBundle draw_path(const MarketModel& model, const SimGrid& grid, std::uint64_t seed,
                     std::size_t index) {
  auto tau_rng = path_stream(seed, index, StreamLane::ChangePoint);
  const double tau = model.law.sample(tau_rng);
  auto w_rng = path_stream(seed, index, StreamLane::Brownian);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sqdt = std::sqrt(grid.dt());
  std::vector<double> dW(grid.n_steps);
  for (double& d : dW) d = sqdt * normal(w_rng);
  return simulate_path(model, grid, tau, dW, index);
}

std::vector<PathBundle> simulate_paths(const MarketModel& model, const SimGrid& grid,
                                       std::size_t n_paths, std::uint64_t seed, const Exec& exec) {
  model.validate();
  if (n_paths == 0) throw ConfigError("simulate_paths: n_paths must be >= 1");
  std::vector<PathBundle> out(n_paths);
  parallel_for(n_paths, exec, [&](std::size_t i) { out[i] = draw_path(model, grid, seed, i); });
  return out;
}

// ---------------------------------------------------------------------------

double lipschitz_ratio(const Coefficient& f, std::span<const double> times,
                       std::span<const double> states) {
  double k = 0.0;
  for (const double t : times) {
    for (std::size_t j = 0; j + 1 < states.size(); ++j) {
      const double h = states[j + 1] - states[j];
      if (!(h > 0.0)) continue;
      const double r = std::abs(f(t, states[j + 1]) - f(t, states[j])) / h;
      k = std::max(k, r);
    }
  }
  return k;
}

double LipschitzReport::max_k() const {
  double k = 0.0;
  for (const auto& e : entries) k = std::max(k, e.k_refined);
  return k;
}

bool LipschitzReport::any_diverging() const {
  return std::any_of(entries.begin(), entries.end(), [](const auto& e) { return e.diverging; });
}

LipschitzReport lipschitz_report(const CoefficientSpec& spec, const LipschitzDomain& domain) {
  if (domain.states.size() < 2) throw ConfigError("lipschitz_report: need at least 2 state points");
  std::vector<double> times = domain.times.empty() ? std::vector<double>{0.0} : domain.times;
  std::vector<double> states = domain.states;
  std::sort(states.begin(), states.end());
  states.erase(std::unique(states.begin(), states.end()), states.end());

  std::vector<double> fine = states;
  for (int level = 0; level < 3; ++level) {
    std::vector<double> next;
    next.reserve(2 * fine.size());
    for (std::size_t j = 0; j + 1 < fine.size(); ++j) {
      next.push_back(fine[j]);
      next.push_back(0.5 * (fine[j] + fine[j + 1]));
    }
    next.push_back(fine.back());
    fine = std::move(next);
  }

  LipschitzReport report;
  const std::array<std::pair<const char*, const Coefficient*>, 4> items{{
      {"mu1", &spec.mu1},
      {"mu2", &spec.mu2},
      {"sigma1", &spec.sigma1},
      {"sigma2", &spec.sigma2},
  }};
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& e = report.entries[i];
    e.name = items[i].first;
    e.k = lipschitz_ratio(*items[i].second, times, states);
    e.k_refined = lipschitz_ratio(*items[i].second, times, fine);
    // A jump of size J gives ratios J/h, growing 8x over three halvings; a
    // smooth function's ratio settles.
    e.diverging = e.k_refined > 4.0 * e.k && e.k_refined > 1e-12;
  }
  return report;
}

}  // namespace cpopt
