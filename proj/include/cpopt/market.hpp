#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cpopt/exec.hpp"

namespace cpopt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// A drift or volatility coefficient as a function of (time, log-dynamics state).
///
/// Tables are interpolated linearly and held flat outside their range.
/// Breakpoints must be non-decreasing; a repeated breakpoint encodes a jump,
/// and the value to the right of the jump is used at the breakpoint itself.
class Coefficient {
 public:
  struct Constant {
    double value = 0.0;
  };
  struct TimeTable {
    std::vector<double> times;
    std::vector<double> values;
  };
  /// values are row-major: values[i * states.size() + j] at (times[i], states[j]).
  struct Bilinear {
    std::vector<double> times;
    std::vector<double> states;
    std::vector<double> values;
  };
  /// Programmatic coefficient; not expressible in a config file.
  struct Callable {
    std::function<double(double, double)> fn;
  };
  using Repr = std::variant<Constant, TimeTable, Bilinear, Callable>;

  Coefficient(double value = 0.0) : repr_(Constant{value}) {}  // NOLINT(google-explicit-constructor)
  explicit Coefficient(Repr repr);

  static Coefficient time_table(std::vector<double> times, std::vector<double> values);
  static Coefficient bilinear(std::vector<double> times, std::vector<double> states,
                              std::vector<double> values);
  static Coefficient callable(std::function<double(double, double)> fn);

  double operator()(double t, double x) const;

  /// True when the value does not depend on the state argument.
  bool state_free() const;
  const Repr& repr() const noexcept { return repr_; }

 private:
  Repr repr_;
};

/// Drift and volatility before (regime 1) and after (regime 2) the change point.
struct CoefficientSpec {
  Coefficient mu1;
  Coefficient mu2;
  Coefficient sigma1;
  Coefficient sigma2;

  double drift(bool after_change, double t, double x) const {
    return after_change ? mu2(t, x) : mu1(t, x);
  }
  double vol(bool after_change, double t, double x) const {
    return after_change ? sigma2(t, x) : sigma1(t, x);
  }
};

/// Law of the change point tau. tau may exceed the horizon (or be +inf), in
/// which case the second regime never activates.
class ChangePointLaw {
 public:
  struct Exponential {
    double rate = 1.0;
    double truncate_at = kInf;  ///< conditioned on tau <= truncate_at when finite
  };
  struct Uniform {
    double lo = 0.0;
    double hi = 1.0;
  };
  struct PointMass {
    double t0 = 0.0;  ///< may be +inf
  };
  struct Discrete {
    std::vector<double> times;
    std::vector<double> probs;
  };
  using Variant = std::variant<Exponential, Uniform, PointMass, Discrete>;

  ChangePointLaw() : law_(PointMass{kInf}) {}
  explicit ChangePointLaw(Variant law);

  static ChangePointLaw exponential(double rate, double truncate_at = kInf);
  static ChangePointLaw uniform(double lo, double hi);
  static ChangePointLaw point_mass(double t0);
  static ChangePointLaw discrete(std::vector<double> times, std::vector<double> probs);

  double sample(std::mt19937_64& rng) const;
  /// P(tau <= t)
  double cdf(double t) const;
  /// P(tau >= t)
  double survival_from(double t) const;
  /// Compensator of 1{tau <= t} in tau's own filtration, evaluated at t.
  double cumulative_hazard(double t) const;
  bool has_atoms() const;

  const Variant& variant() const noexcept { return law_; }

 private:
  Variant law_;
};

struct MarketModel {
  CoefficientSpec coeffs;
  ChangePointLaw law;
  double horizon = 1.0;
  double s0 = 1.0;
  /// Only independent change points are supported downstream.
  bool tau_independent = true;

  void validate() const;
};

struct SimGrid {
  double horizon = 1.0;
  std::size_t n_steps = 1;

  SimGrid() = default;
  SimGrid(double horizon_, std::size_t n_steps_);
  double dt() const noexcept { return horizon / static_cast<double>(n_steps); }
  double time(std::size_t k) const noexcept {
    return k == n_steps ? horizon : horizon * static_cast<double>(k) / static_cast<double>(n_steps);
  }
};

/// One simulated path on the grid. Arrays indexed by grid point have n_steps+1
/// entries; dW has n_steps. Step k uses the coefficients of regime[k] at
/// (t_k, s_tilde[k]).
struct PathBundle {
  SimGrid grid;
  double tau = kInf;
  std::vector<double> dW;
  std::vector<double> s_tilde;
  std::vector<double> s;
  std::vector<double> qv;  ///< accumulated sigma^2 dt
  std::vector<std::uint8_t> regime;

  std::size_t n_steps() const noexcept { return dW.size(); }
  /// Brownian motion on the grid.
  std::vector<double> brownian() const;
};

double sample_change_point(const ChangePointLaw& law, std::mt19937_64& rng);

/// Euler-Maruyama on the log dynamics with given increments and change point.
PathBundle simulate_path(const MarketModel& model, const SimGrid& grid, double tau,
                         std::span<const double> dW, std::size_t path_index = 0);

/// Path `index` of the stream identified by `seed`.
PathBundle draw_path(const MarketModel& model, const SimGrid& grid, std::uint64_t seed,
                     std::size_t index);

std::vector<PathBundle> simulate_paths(const MarketModel& model, const SimGrid& grid,
                                       std::size_t n_paths, std::uint64_t seed,
                                       const Exec& exec = {});

struct LipschitzDomain {
  std::vector<double> times;
  std::vector<double> states;
};

struct LipschitzEstimate {
  std::string name;
  double k = 0.0;          ///< max finite-difference ratio on the given grid
  double k_refined = 0.0;  ///< same after three midpoint refinements of the state grid
  bool diverging = false;
};

struct LipschitzReport {
  std::array<LipschitzEstimate, 4> entries;
  double max_k() const;
  bool any_diverging() const;
};

LipschitzReport lipschitz_report(const CoefficientSpec& spec, const LipschitzDomain& domain);

/// Max |f(t, x_{j+1}) - f(t, x_j)| / (x_{j+1} - x_j) over the grid.
double lipschitz_ratio(const Coefficient& f, std::span<const double> times,
                       std::span<const double> states);

}  // namespace cpopt
