#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "cpopt/market.hpp"

namespace cpopt {

enum class FiltrationKind {
  InitiallyEnlargedW,
  InitiallyEnlargedS,
  ProgressiveW,
  ProgressiveS,
  PriceOnly,
};

/// Parses "init-w", "init-s", "prog-w", "prog-s", "price".
FiltrationKind parse_filtration(std::string_view name);
std::string filtration_name(FiltrationKind kind);
bool initially_enlarged(FiltrationKind kind);
bool progressive(FiltrationKind kind);

/// Relation between the two volatility functions, relevant for the price filtration.
struct VolCase {
  enum class Kind { Identical, Distinct, SemiIdentical };
  Kind kind = Kind::Identical;
  /// Membership of (t, S_t) in the set where the volatilities differ.
  std::function<bool(double, double)> in_o;

  static VolCase identical() { return {Kind::Identical, {}}; }
  static VolCase distinct() { return {Kind::Distinct, {}}; }
  static VolCase semi_identical(std::function<bool(double, double)> in_o) {
    return {Kind::SemiIdentical, std::move(in_o)};
  }
};

struct Filtration {
  FiltrationKind kind = FiltrationKind::ProgressiveS;
  VolCase vol;  ///< used only by PriceOnly
};

/// Per-step market price of risk and the volatility the observer attributes to
/// the step. Both have n_steps entries and are left-point (predictable) values.
struct MarketPriceOfRisk {
  std::vector<double> lambda;
  std::vector<double> sigma;
};

struct DensityPath {
  std::vector<double> dw_hat;  ///< innovation increments, n_steps entries
  std::vector<double> log_z;   ///< n_steps + 1 entries, log_z[0] = 0
  std::vector<double> z;
};

/// Switch times between the sets where the volatilities differ and coincide.
struct RegimeIntervals {
  std::vector<double> rho;        ///< rho[0] = 0, then alternating exits/entries, last entry T
  std::vector<std::uint8_t> in_o;  ///< membership at each grid point
  double horizon = 1.0;

  /// rho_j, with T beyond the stored tail.
  double at(std::size_t j) const { return j < rho.size() ? rho[j] : horizon; }
};

struct CompensatedJump {
  std::vector<double> a;  ///< compensator on the grid
  std::vector<double> n;  ///< 1{tau <= t} - A_t
};

/// Everything the observer of a filtration derives from one path.
struct ObservedPath {
  MarketPriceOfRisk mpr;
  std::vector<double> p;  ///< P(tau < t_k | observer's information before step k)
  DensityPath density;
};

/// Posterior P(tau < t_k | increments 0..k-1) for k = 0..n_steps.
///
/// Assumes one common volatility on the steps it filters; the likelihood
/// nevertheless uses the regime-specific Gaussian densities. With `revealed`
/// set, steps k with revealed[k] != 0 expose the regime directly and the
/// recursion restarts from the revealed state.
std::vector<double> change_point_filter(const MarketModel& model, const PathBundle& path,
                                        const std::vector<std::uint8_t>* revealed = nullptr);

RegimeIntervals detect_regime_intervals(const PathBundle& path, const VolCase& vol);

MarketPriceOfRisk market_price_of_risk(const MarketModel& model, const PathBundle& path,
                                       const Filtration& filtration,
                                       std::vector<double>* posterior = nullptr);

DensityPath density_path(const MarketPriceOfRisk& mpr, const PathBundle& path);

CompensatedJump compensated_jump(const MarketModel& model, const PathBundle& path);

ObservedPath observe(const MarketModel& model, const PathBundle& path, const Filtration& filtration);

/// Terminal densities and change points of n_paths paths, without keeping the paths.
struct DensitySample {
  std::vector<double> z_T;
  std::vector<double> tau;
};

DensitySample density_sample(const MarketModel& model, const SimGrid& grid,
                             const Filtration& filtration, std::size_t n_paths,
                             std::uint64_t seed, const Exec& exec = {});

}  // namespace cpopt
