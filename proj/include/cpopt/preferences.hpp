#pragma once

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <variant>

namespace cpopt {

/// Utility on (0, inf) satisfying the Inada conditions.
class Utility {
 public:
  /// U(x) = ln x
  struct Log {};
  /// U(x) = 1 - 1/x
  struct ShiftedNegReciprocal {};
  struct Custom {
    std::function<double(double)> u;
    std::function<double(double)> du;
    /// Inverse of du; solved numerically when empty.
    std::function<double(double)> inv_du;
  };
  using Variant = std::variant<Log, ShiftedNegReciprocal, Custom>;

  Utility() : v_(Log{}) {}
  explicit Utility(Variant v);
  static Utility log() { return Utility(Log{}); }
  static Utility shifted_neg_reciprocal() { return Utility(ShiftedNegReciprocal{}); }
  /// Throws ConfigError if monotonicity, concavity or Inada limits fail on a probe ladder.
  static Utility custom(Custom c);

  double u(double x) const;
  double du(double x) const;
  /// I = (U')^{-1}
  double inverse_marginal(double y) const;

  bool has_closed_form_inverse() const;
  std::string name() const;
  const Variant& variant() const noexcept { return v_; }

 private:
  Variant v_;
};

/// Convex increasing loss on (-inf, 0) (or the whole line for Exponential).
class Loss {
 public:
  /// L(x) = -c/x
  struct NegReciprocal {
    double c = 3.0;
  };
  /// L(x) = exp(gamma x)
  struct Exponential {
    double gamma = 1.0;
  };
  struct Custom {
    std::function<double(double)> l;
    std::function<double(double)> dl;
    /// Inverse of dl; solved numerically when empty.
    std::function<double(double)> inv_dl;
    double dl_at_zero = std::numeric_limits<double>::infinity();  ///< L'(0-)
    bool whole_line = false;
  };
  using Variant = std::variant<NegReciprocal, Exponential, Custom>;

  Loss() : v_(NegReciprocal{}) {}
  explicit Loss(Variant v);
  static Loss neg_reciprocal(double c = 3.0) { return Loss(NegReciprocal{c}); }
  static Loss exponential(double gamma) { return Loss(Exponential{gamma}); }
  static Loss custom(Custom c);

  /// Throws OutOfRange for x >= 0 unless the loss is defined on the whole line.
  double l(double x) const;
  double dl(double x) const;
  /// H = (L')^{-1} on (0, L'(0-)); throws OutOfRange outside.
  double h(double e) const;
  /// L'(0-); +inf for the reciprocal loss.
  double dl_at_zero() const;
  bool whole_line() const;
  std::string name() const;
  const Variant& variant() const noexcept { return v_; }

 private:
  Variant v_;
};

struct Preferences {
  Utility utility;
  Loss loss;
};

double marginal_inverse_I(const Utility& utility, double y);
double loss_marginal_inverse_H(const Loss& loss, double e);

/// U(x) - lambda L(-x)
double lagrangian_utility(const Preferences& prefs, double lambda, double x);
/// U'(x) + lambda L'(-x)
double lagrangian_marginal(const Preferences& prefs, double lambda, double x);

/// Unique x > 0 with U'(x) + lambda L'(-x) = y. Closed form for the built-in
/// reciprocal-loss pairs, numeric otherwise.
double lagrangian_inverse(const Preferences& prefs, double lambda, double y);
/// Same value by the generic bracketed root search, ignoring closed forms.
double lagrangian_inverse_numeric(const Preferences& prefs, double lambda, double y);
bool lagrangian_has_closed_form(const Preferences& prefs);

/// Smallest m with mean L(-X - m) <= eps.
double shortfall_risk(std::span<const double> samples, const Loss& loss, double eps);

/// (1/gamma)(ln mean exp(-gamma X) - ln eps)
double entropic_risk(std::span<const double> samples, double gamma, double eps);

}  // namespace cpopt
