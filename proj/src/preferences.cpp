#include "cpopt/preferences.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cpopt/errors.hpp"
#include "cpopt/roots.hpp"
#include "overloaded.hpp"

namespace cpopt {

namespace {

using detail::Overloaded;

constexpr int kMaxExpand = 1100;

// Root of a function decreasing in x > 0, solved in log x. The starting
// bracket [1e-8, 1] is widened by halving and doubling.
double decreasing_root_positive(const std::function<double(double)>& f, const char* what) {
  double lo = 1e-8;
  double hi = 1.0;
  double f_lo = f(lo);
  double f_hi = f(hi);
  for (int i = 0; f_lo <= 0.0 && i < kMaxExpand; ++i) {
    if (f_lo == 0.0) return lo;
    hi = lo;
    f_hi = f_lo;
    lo *= 0.5;
    f_lo = f(lo);
  }
  for (int i = 0; f_hi >= 0.0 && i < kMaxExpand; ++i) {
    if (f_hi == 0.0) return hi;
    lo = hi;
    f_lo = f_hi;
    hi *= 2.0;
    f_hi = f(hi);
  }
  if (!(f_lo > 0.0) || !(f_hi < 0.0) || !std::isfinite(lo) || !std::isfinite(hi) || lo == 0.0)
    throw NoConvergence(std::string(what) + ": no sign change found between " +
                        std::to_string(lo) + " and " + std::to_string(hi));
  RootOptions opt;
  opt.xtol_rel = 0.0;
  opt.xtol_abs = 1e-15;
  opt.max_iter = 400;
  const RootResult r = bracketed_root([&](double s) { return f(std::exp(s)); }, std::log(lo),
                                      std::log(hi), f_lo, f_hi, opt);
  if (!r.converged) throw NoConvergence(std::string(what) + ": root iteration did not converge");
  return std::exp(r.x);
}

const std::vector<double>& probe_ladder() {
  static const std::vector<double> ladder = [] {
    std::vector<double> v;
    for (int k = -20; k <= 20; ++k) v.push_back(std::ldexp(1.0, k));
    return v;
  }();
  return ladder;
}

}  // namespace

// ---------------------------------------------------------------------------
// Utility

Utility::Utility(Variant v) : v_(std::move(v)) {}

Utility Utility::custom(Custom c) {
  if (!c.u || !c.du) throw ConfigError("custom utility: u and u' are required");
  const auto& xs = probe_ladder();
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double a = xs[i];
    const double b = xs[i + 1];
    if (!(c.u(b) > c.u(a))) throw ConfigError("custom utility: not strictly increasing");
    if (!(c.du(a) > c.du(b)) || !(c.du(b) > 0.0))
      throw ConfigError("custom utility: marginal not positive and strictly decreasing");
  }
  const double mid = c.du(1.0);
  if (!(c.du(xs.front()) > 1e4 * mid) || !(c.du(xs.back()) < 1e-4 * mid))
    throw ConfigError("custom utility: marginal does not follow the Inada limits");
  return Utility(Variant{std::move(c)});
}

double Utility::u(double x) const {
  return std::visit(Overloaded{
                        [x](const Log&) { return std::log(x); },
                        [x](const ShiftedNegReciprocal&) { return 1.0 - 1.0 / x; },
                        [x](const Custom& c) { return c.u(x); },
                    },
                    v_);
}

double Utility::du(double x) const {
  return std::visit(Overloaded{
                        [x](const Log&) { return 1.0 / x; },
                        [x](const ShiftedNegReciprocal&) { return 1.0 / (x * x); },
                        [x](const Custom& c) { return c.du(x); },
                    },
                    v_);
}

double Utility::inverse_marginal(double y) const {
  if (!(y > 0.0)) throw OutOfRange("inverse marginal utility needs y > 0");
  return std::visit(Overloaded{
                        [y](const Log&) { return 1.0 / y; },
                        [y](const ShiftedNegReciprocal&) { return 1.0 / std::sqrt(y); },
                        [y](const Custom& c) {
                          if (c.inv_du) return c.inv_du(y);
                          return decreasing_root_positive(
                              [&](double x) { return c.du(x) - y; }, "inverse marginal utility");
                        },
                    },
                    v_);
}

bool Utility::has_closed_form_inverse() const { return !std::holds_alternative<Custom>(v_); }

std::string Utility::name() const {
  return std::visit(Overloaded{
                        [](const Log&) { return std::string("log"); },
                        [](const ShiftedNegReciprocal&) { return std::string("shifted_neg_reciprocal"); },
                        [](const Custom&) { return std::string("custom"); },
                    },
                    v_);
}

// ---------------------------------------------------------------------------
// Loss

Loss::Loss(Variant v) : v_(std::move(v)) {
  std::visit(Overloaded{
                 [](const NegReciprocal& n) {
                   if (!(n.c > 0.0) || !std::isfinite(n.c))
                     throw ConfigError("reciprocal loss: c must be positive");
                 },
                 [](const Exponential& e) {
                   if (!(e.gamma > 0.0) || !std::isfinite(e.gamma))
                     throw ConfigError("exponential loss: gamma must be positive");
                 },
                 [](const Custom&) {},
             },
             v_);
}

Loss Loss::custom(Custom c) {
  if (!c.l || !c.dl) throw ConfigError("custom loss: l and l' are required");
  if (!(c.dl_at_zero > 0.0)) throw ConfigError("custom loss: L'(0-) must be positive");
  const auto& xs = probe_ladder();
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double a = -xs[i + 1];
    const double b = -xs[i];
    if (!(c.l(b) > c.l(a))) throw ConfigError("custom loss: not strictly increasing");
    if (!(c.dl(b) > c.dl(a)) || !(c.dl(a) > 0.0))
      throw ConfigError("custom loss: marginal not positive and strictly increasing");
  }
  return Loss(Variant{std::move(c)});
}

double Loss::l(double x) const {
  if (!whole_line() && !(x < 0.0))
    throw OutOfRange("loss evaluated at non-negative argument " + std::to_string(x));
  return std::visit(Overloaded{
                        [x](const NegReciprocal& n) { return -n.c / x; },
                        [x](const Exponential& e) { return std::exp(e.gamma * x); },
                        [x](const Custom& c) { return c.l(x); },
                    },
                    v_);
}

double Loss::dl(double x) const {
  if (!whole_line() && !(x < 0.0))
    throw OutOfRange("loss derivative evaluated at non-negative argument " + std::to_string(x));
  return std::visit(Overloaded{
                        [x](const NegReciprocal& n) { return n.c / (x * x); },
                        [x](const Exponential& e) { return e.gamma * std::exp(e.gamma * x); },
                        [x](const Custom& c) { return c.dl(x); },
                    },
                    v_);
}

double Loss::dl_at_zero() const {
  return std::visit(Overloaded{
                        [](const NegReciprocal&) { return std::numeric_limits<double>::infinity(); },
                        [](const Exponential& e) { return e.gamma; },
                        [](const Custom& c) { return c.dl_at_zero; },
                    },
                    v_);
}

bool Loss::whole_line() const {
  if (std::holds_alternative<Exponential>(v_)) return true;
  if (const auto* c = std::get_if<Custom>(&v_)) return c->whole_line;
  return false;
}

double Loss::h(double e) const {
  if (!(e > 0.0) || !(e < dl_at_zero()))
    throw OutOfRange("H(e) needs 0 < e < L'(0-); got e=" + std::to_string(e));
  return std::visit(Overloaded{
                        [e](const NegReciprocal& n) { return -std::sqrt(n.c / e); },
                        [e](const Exponential& x) { return std::log(e / x.gamma) / x.gamma; },
                        [e](const Custom& c) {
                          if (c.inv_dl) return c.inv_dl(e);
                          // L'(-a) decreases in a > 0.
                          return -decreasing_root_positive(
                              [&](double a) { return c.dl(-a) - e; }, "inverse loss marginal");
                        },
                    },
                    v_);
}

std::string Loss::name() const {
  return std::visit(Overloaded{
                        [](const NegReciprocal&) { return std::string("neg_reciprocal"); },
                        [](const Exponential&) { return std::string("exponential"); },
                        [](const Custom&) { return std::string("custom"); },
                    },
                    v_);
}

// ---------------------------------------------------------------------------

double marginal_inverse_I(const Utility& utility, double y) { return utility.inverse_marginal(y); }

double loss_marginal_inverse_H(const Loss& loss, double e) { return loss.h(e); }

double lagrangian_utility(const Preferences& prefs, double lambda, double x) {
  const double u = prefs.utility.u(x);
  return lambda == 0.0 ? u : u - lambda * prefs.loss.l(-x);
}

double lagrangian_marginal(const Preferences& prefs, double lambda, double x) {
  const double du = prefs.utility.du(x);
  return lambda == 0.0 ? du : du + lambda * prefs.loss.dl(-x);
}

bool lagrangian_has_closed_form(const Preferences& prefs) {
  const bool recip = std::holds_alternative<Loss::NegReciprocal>(prefs.loss.variant());
  return recip && prefs.utility.has_closed_form_inverse();
}

double lagrangian_inverse_numeric(const Preferences& prefs, double lambda, double y) {
  if (!(y > 0.0)) throw OutOfRange("lagrangian inverse needs y > 0");
  if (!(lambda >= 0.0)) throw OutOfRange("lagrangian inverse needs lambda >= 0");
  return decreasing_root_positive(
      [&](double x) { return lagrangian_marginal(prefs, lambda, x) - y; }, "lagrangian inverse");
}

double lagrangian_inverse(const Preferences& prefs, double lambda, double y) {
  if (!(y > 0.0)) throw OutOfRange("lagrangian inverse needs y > 0");
  if (!(lambda >= 0.0)) throw OutOfRange("lagrangian inverse needs lambda >= 0");
  if (lambda == 0.0) return prefs.utility.inverse_marginal(y);
  if (const auto* n = std::get_if<Loss::NegReciprocal>(&prefs.loss.variant())) {
    const double lc = lambda * n->c;
    if (std::holds_alternative<Utility::Log>(prefs.utility.variant())) {
      // y x^2 - x - lambda c = 0
      return (1.0 + std::sqrt(1.0 + 4.0 * lc * y)) / (2.0 * y);
    }
    if (std::holds_alternative<Utility::ShiftedNegReciprocal>(prefs.utility.variant())) {
      return std::sqrt((1.0 + lc) / y);
    }
  }
  return lagrangian_inverse_numeric(prefs, lambda, y);
}

// ---------------------------------------------------------------------------
// Risk functionals

double shortfall_risk(std::span<const double> samples, const Loss& loss, double eps) {
  if (samples.empty()) throw OutOfRange("shortfall_risk: empty sample");
  const double n = static_cast<double>(samples.size());
  auto mean_loss = [&](double m) {
    double acc = 0.0;
    for (const double x : samples) acc += loss.l(-x - m);
    return acc / n;
  };
  if (!loss.whole_line()) {
    // m ranges over (-min X, inf); write m = -min X + d with d > 0.
    const double m0 = -*std::min_element(samples.begin(), samples.end());
    if (std::holds_alternative<Loss::NegReciprocal>(loss.variant()) && !(eps > 0.0))
      throw Unattainable("shortfall_risk: eps must exceed the infimum 0 of the reciprocal loss");
    try {
      const double d = decreasing_root_positive([&](double d) { return mean_loss(m0 + d) - eps; },
                                                "shortfall risk");
      return m0 + d;
    } catch (const NoConvergence&) {
      throw Unattainable("shortfall_risk: no capital add-on meets eps=" + std::to_string(eps));
    }
  }
  // Whole-line loss: expand a bracket around 0 in both directions.
  double lo = -1.0;
  double hi = 1.0;
  double f_lo = mean_loss(lo) - eps;
  double f_hi = mean_loss(hi) - eps;
  for (int i = 0; f_lo <= 0.0 && i < kMaxExpand && std::isfinite(lo); ++i) {
    lo *= 2.0;
    f_lo = mean_loss(lo) - eps;
  }
  for (int i = 0; f_hi > 0.0 && i < kMaxExpand && std::isfinite(hi); ++i) {
    hi *= 2.0;
    f_hi = mean_loss(hi) - eps;
  }
  if (!(f_hi <= 0.0) || !std::isfinite(hi))
    throw Unattainable("shortfall_risk: no capital add-on meets eps=" + std::to_string(eps));
  if (!(f_lo > 0.0)) throw NoConvergence("shortfall_risk: lower bracket not found");
  if (f_hi == 0.0) return hi;
  RootOptions opt;
  opt.xtol_rel = 4e-16;
  opt.xtol_abs = 1e-300;
  opt.max_iter = 400;
  const RootResult r = bracketed_root([&](double m) { return mean_loss(m) - eps; }, lo, hi, f_lo,
                                      f_hi, opt);
  return r.x;
}

double entropic_risk(std::span<const double> samples, double gamma, double eps) {
  if (samples.empty()) throw OutOfRange("entropic_risk: empty sample");
  if (!(gamma > 0.0)) throw OutOfRange("entropic_risk: gamma must be positive");
  if (!(eps > 0.0)) throw OutOfRange("entropic_risk: eps must be positive");
  double shift = -std::numeric_limits<double>::infinity();
  for (const double x : samples) shift = std::max(shift, -gamma * x);
  double acc = 0.0;
  for (const double x : samples) acc += std::exp(-gamma * x - shift);
  const double log_mean = shift + std::log(acc / static_cast<double>(samples.size()));
  return (log_mean - std::log(eps)) / gamma;
}

}  // namespace cpopt
