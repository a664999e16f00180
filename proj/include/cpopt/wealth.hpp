#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cpopt/dual_solver.hpp"
#include "cpopt/information.hpp"
#include "cpopt/market.hpp"
#include "cpopt/preferences.hpp"
#include "cpopt/quadrature.hpp"

namespace cpopt {

struct ValueReport {
  double value = 0.0;
  double std_error = 0.0;
  std::string filtration;
  int stratum = -1;  ///< -1 for an aggregate over strata
};

std::vector<double> optimal_terminal_wealth(const StratumSolution& sol, const Preferences& prefs,
                                            std::span<const double> z_T);

/// mean U(R) with its Monte Carlo standard error.
ValueReport value(std::span<const double> r_hat, const Utility& utility);

/// Per-stratum values of a solution plus the prior-weighted aggregate (last entry).
std::vector<ValueReport> stratified_value(const DualSolution& sol, const Scenario& scenario);

/// Conditional expectation of the optimal terminal wealth for log utility and
/// the reciprocal loss when the market price of risk is a deterministic
/// schedule on the grid.
///
/// With v = sum_{j >= k} Lambda_j^2 dt, a = -v/2 and b = -sqrt(v),
///   F(z, t_k) = (1 + E sqrt(1 + 4 lambda c y z e^{a + b xi})) / (2 y z),  xi ~ N(0, 1),
/// and the expectation is integrated with Gauss-Legendre nodes on a
/// truncated interval covering both Gaussian kernels.
class ClosedFormExample {
 public:
  ClosedFormExample(const Preferences& prefs, double lambda_star, double y_hat, const SimGrid& grid,
                    std::vector<double> lambda, int order = 64);

  double a(std::size_t k) const { return -0.5 * v_[k]; }
  double b(std::size_t k) const;
  double F(double z, std::size_t k) const;
  double F_z(double z, std::size_t k) const;
  /// |F_order - F_{2 order}| / F_{2 order}
  double quadrature_error(double z, std::size_t k) const;
  /// Throws QuadratureFailure when quadrature_error exceeds 1e-6.
  void check_quadrature(double z, std::size_t k) const;

  const SimGrid& grid() const { return grid_; }
  const std::vector<double>& lambda() const { return lambda_; }
  double y_hat() const { return y_; }
  double lambda_star() const { return lam_; }

 private:
  struct Integrals {
    double j;   ///< integral of sqrt(1 + w) phi
    double dj;  ///< derivative of j in z
  };
  Integrals integrate(double z, std::size_t k, const QuadratureRule& rule) const;

  double lam_;
  double y_;
  double kappa_;  ///< 4 lambda c y
  SimGrid grid_;
  std::vector<double> lambda_;
  std::vector<double> v_;
  QuadratureRule rule_;
  QuadratureRule rule_check_;
};

struct WealthPath {
  std::vector<double> x_hat;
  std::string method;
};

struct StrategyPath {
  std::vector<double> pi_hat;
};

WealthPath wealth_path_closed_form(const ClosedFormExample& example, const DensityPath& density);
StrategyPath strategy_closed_form(const ClosedFormExample& example, const DensityPath& density,
                                  std::span<const double> sigma);

struct ReplicationReport {
  double terminal = 0.0;
  double target = 0.0;
  double relative_deviation = 0.0;
};

/// x + sum pi_k (S~_{k+1} - S~_k)
ReplicationReport replicate(const StrategyPath& strategy, const PathBundle& path, double x,
                            double r_hat);

struct ReplicationSummary {
  double rmse = 0.0;
  double relative_rmse = 0.0;  ///< rmse / mean target
  double mean_target = 0.0;
  std::size_t n_paths = 0;
};

ReplicationSummary summarize_replication(std::span<const ReplicationReport> reports);

/// Paths with everything the regression estimator and the orthogonality check need.
struct PathPanel {
  SimGrid grid;
  std::vector<PathBundle> paths;
  std::vector<ObservedPath> observed;
};

PathPanel build_panel(const Scenario& scenario);

struct RegressionBasis {
  int poly_degree = 3;   ///< powers of log Z
  bool inverse_z = true;
  bool filter_interactions = true;  ///< p x log Z, p / Z and p^2 for the price filtration
  double delta_step = 1e-3;  ///< innovation bump for the surface delta
  bool cross_fit = true;     ///< strategy surfaces fitted on the other half of the paths
  double max_condition = 1e8;
};

struct RegressionWealth {
  std::vector<std::vector<double>> x_hat;  ///< [path][grid index]
  std::vector<int> dropped_terms;          ///< basis terms dropped per slice
};

RegressionWealth wealth_path_regression(const DualSolution& sol, const Scenario& scenario,
                                        const PathPanel& panel, const RegressionBasis& basis = {});

/// Holdings from central differences of the regression wealth surface along
/// the innovation direction of (log Z, posterior), divided by sigma.
std::vector<StrategyPath> strategy_regression(const DualSolution& sol, const Scenario& scenario,
                                              const PathPanel& panel,
                                              const RegressionBasis& basis = {});

struct OrthogonalityReport {
  double max_abs_corr = 0.0;
  std::vector<double> corr;       ///< per test integrand: 1, Z, 1/Z, t
  std::vector<double> residuals;  ///< per path
};

OrthogonalityReport orthogonality_check(const DualSolution& sol, const Scenario& scenario,
                                        const PathPanel& panel,
                                        std::span<const StrategyPath> strategy);

}  // namespace cpopt
