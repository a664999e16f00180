#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lognormal.hpp"

#include "cpopt/errors.hpp"
#include "cpopt/wealth.hpp"

using namespace cpopt;

namespace {

const Preferences kLog{Utility::log(), Loss::neg_reciprocal(3.0)};
const Preferences kShifted{Utility::shifted_neg_reciprocal(), Loss::neg_reciprocal(3.0)};

Scenario scenario(double mu1, double mu2, ChangePointLaw law, FiltrationKind kind, std::size_t n_steps,
                  std::size_t n_paths, EpsPolicy eps, std::uint64_t seed = 3) {
  Scenario s;
  s.model.coeffs = {mu1, mu2, 0.2, 0.2};
  s.model.law = std::move(law);
  s.grid = SimGrid(1.0, n_steps);
  s.filtration = {kind, VolCase::identical()};
  s.prefs = kLog;
  s.eps = eps;
  s.n_paths = n_paths;
  s.seed = seed;
  s.exec.workers = 4;
  return s;
}

}  // namespace

TEST_CASE("optimal terminal wealth") {
  const auto z = oracle::lognormal_density(oracle::normals(100, 1), 0.4, 1.0);
  StratumSolution s;
  s.y_hat = 0.5;
  s.lambda_star = 0.0;
  const auto r0 = optimal_terminal_wealth(s, kLog, z);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(r0[i] == doctest::Approx(2.0 / z[i]).epsilon(1e-15));
  s.lambda_star = 0.8;
  const auto r1 = optimal_terminal_wealth(s, kLog, z);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double yz = 0.5 * z[i];
    CHECK(r1[i] == doctest::Approx((1 + std::sqrt(1 + 12 * 0.8 * yz)) / (2 * yz)).epsilon(1e-15));
  }
  const std::vector<double> ones(10, 1.0);
  const StratumSolution d = solve_dual(kLog, ones, 1.7, EpsPolicy::quantile(0.5));
  for (double r : optimal_terminal_wealth(d, kLog, ones)) CHECK(r == doctest::Approx(1.7).epsilon(1e-14));
}

TEST_CASE("value") {
  SUBCASE("log utility, slack constraint") {
    const auto z = oracle::lognormal_density(oracle::normals(50000, 2), 0.4, 1.0);
    const StratumSolution s = solve_dual(kLog, z, 1.0, EpsPolicy::quantile(1.0));
    const ValueReport v = value(s.r_hat, Utility::log());
    CHECK(std::abs(v.value - 0.08) <= 3.0 * v.std_error);
  }
  SUBCASE("shifted reciprocal identity") {
    const auto z = oracle::lognormal_density(oracle::normals(20000, 3), 0.3, 1.0);
    double m = 0.0;
    for (double v : z) m += std::sqrt(v);
    m /= static_cast<double>(z.size());
    const StratumSolution s = solve_dual(kShifted, z, 2.0, EpsPolicy::quantile(0.4));
    const ValueReport v = value(s.r_hat, Utility::shifted_neg_reciprocal());
    CHECK(std::abs(v.value - (1.0 - m * m / 2.0)) <= 3.0 * v.std_error);
  }
  SUBCASE("degenerate density") {
    const std::vector<double> ones(10, 1.0);
    const StratumSolution s = solve_dual(kLog, ones, 2.0, EpsPolicy::quantile(0.5));
    CHECK(value(s.r_hat, Utility::log()).value == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(value(s.r_hat, Utility::log()).std_error == doctest::Approx(0.0));
  }
}

TEST_CASE("closed-form example") {
  const SimGrid grid(1.0, 64);
  std::vector<double> lam(grid.n_steps);
  for (std::size_t k = 0; k < grid.n_steps; ++k) lam[k] = grid.time(k) <= 0.5 ? 0.4 : 0.1;

  SUBCASE("slack constraint gives the log-optimal wealth and Merton holdings") {
    const ClosedFormExample ex(kLog, 0.0, 0.8, grid, lam);
    MarketModel m;
    m.coeffs = {0.08, 0.02, 0.2, 0.2};
    m.law = ChangePointLaw::point_mass(0.5);
    const PathBundle p = draw_path(m, grid, 4, 0);
    const ObservedPath o = observe(m, p, {FiltrationKind::InitiallyEnlargedW, VolCase::identical()});
    const WealthPath w = wealth_path_closed_form(ex, o.density);
    const StrategyPath pi = strategy_closed_form(ex, o.density, o.mpr.sigma);
    for (std::size_t k = 0; k <= grid.n_steps; ++k)
      CHECK(w.x_hat[k] == doctest::Approx(1.25 / o.density.z[k]).epsilon(1e-12));
    for (std::size_t k = 0; k < grid.n_steps; ++k)
      CHECK(pi.pi_hat[k] == doctest::Approx(lam[k] / 0.2 * w.x_hat[k]).epsilon(1e-10));
  }
  SUBCASE("boundary and derivative checks") {
    const double y = 1.3, ls = 0.6;
    const ClosedFormExample ex(kLog, ls, y, grid, lam);
    for (double z : {0.3, 1.0, 2.5}) {
      const double yz = y * z;
      CHECK(ex.F(z, grid.n_steps) == doctest::Approx((1 + std::sqrt(1 + 12 * ls * yz)) / (2 * yz)).epsilon(1e-14));
      for (std::size_t k : {std::size_t{0}, std::size_t{20}, std::size_t{50}}) {
        const double h = 1e-5;
        const double fd = (ex.F(z * (1 + h), k) - ex.F(z * (1 - h), k)) / (2 * h * z);
        CHECK(ex.F_z(z, k) == doctest::Approx(fd).epsilon(1e-6));
        CHECK(ex.quadrature_error(z, k) < 1e-10);
        CHECK_NOTHROW(ex.check_quadrature(z, k));
      }
    }
  }
  SUBCASE("budget holds at time zero") {
    // exact lognormal sample for the same schedule
    double v = 0.0;
    for (double l : lam) v += l * l * grid.dt();
    const auto xi = oracle::normals(200000, 5);
    std::vector<double> z(xi.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::exp(-std::sqrt(v) * xi[i] - 0.5 * v);
    const StratumSolution s = solve_dual(kLog, z, 1.0, EpsPolicy::quantile(0.5));
    const ClosedFormExample ex(kLog, s.lambda_star, s.y_hat, grid, lam);
    double m = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double t = z[i] * s.r_hat[i];
      m += t;
      ss += t * t;
    }
    const double n = static_cast<double>(z.size());
    const double se = std::sqrt((ss / n - (m / n) * (m / n)) / (n - 1));
    CHECK(std::abs(ex.F(1.0, 0) - 1.0) <= 3.0 * se);
  }
  SUBCASE("zero market price of risk holds nothing") {
    const std::vector<double> zero(grid.n_steps, 0.0);
    const ClosedFormExample ex(kLog, 0.5, 1.0, grid, zero);
    DensityPath d;
    d.z.assign(grid.n_steps + 1, 1.0);
    d.log_z.assign(grid.n_steps + 1, 0.0);
    d.dw_hat.assign(grid.n_steps, 0.0);
    for (double p : strategy_closed_form(ex, d, std::vector<double>(grid.n_steps, 0.2)).pi_hat) CHECK(p == 0.0);
  }
}

TEST_CASE("replication of a zero strategy keeps the capital") {
  MarketModel m;
  m.coeffs = {0.1, 0.1, 0.2, 0.2};
  const PathBundle p = draw_path(m, SimGrid(1.0, 10), 1, 0);
  const ReplicationReport r = replicate({std::vector<double>(10, 0.0)}, p, 1.5, 2.0);
  CHECK(r.terminal == 1.5);
  CHECK(r.target == 2.0);
}

TEST_CASE("regression wealth") {
  SUBCASE("slack log problem is fitted exactly through the 1/Z term") {
    Scenario sc = scenario(0.1, -0.05, ChangePointLaw::exponential(1.0), FiltrationKind::PriceOnly, 20, 2000,
                           EpsPolicy::quantile(1.0));
    sc.attach();
    const DualSolution sol = solve_dual(sc);
    const PathPanel panel = build_panel(sc);
    const RegressionWealth w = wealth_path_regression(sol, sc, panel);
    double worst = 0.0;
    for (std::size_t i = 0; i < panel.paths.size(); ++i)
      for (std::size_t k = 0; k <= sc.grid.n_steps; ++k) {
        const double want = 1.0 / (sol.strata[0].y_hat * panel.observed[i].density.z[k]);
        worst = std::max(worst, std::abs(w.x_hat[i][k] - want) / want);
      }
    CHECK(worst <= 1e-8);
  }
  SUBCASE("degenerate density keeps the capital") {
    Scenario sc = scenario(0.0, 0.0, ChangePointLaw::point_mass(kInf), FiltrationKind::ProgressiveS, 10, 200,
                           EpsPolicy::quantile(0.5));
    sc.attach();
    const DualSolution sol = solve_dual(sc);
    const PathPanel panel = build_panel(sc);
    const RegressionWealth w = wealth_path_regression(sol, sc, panel);
    for (const auto& path : w.x_hat)
      for (double x : path) CHECK(x == doctest::Approx(1.0).epsilon(1e-12));
    const auto pi = strategy_regression(sol, sc, panel);
    const OrthogonalityReport rep = orthogonality_check(sol, sc, panel, pi);
    for (double r : rep.residuals) CHECK(std::abs(r) <= 1e-12);
  }
  SUBCASE("matches the closed form in the deterministic example") {
    Scenario sc = scenario(0.08, 0.02, ChangePointLaw::point_mass(0.5), FiltrationKind::InitiallyEnlargedW, 32, 4000,
                           EpsPolicy::quantile(0.5));
    sc.attach();
    const DualSolution sol = solve_dual(sc);
    const PathPanel panel = build_panel(sc);
    const RegressionWealth w = wealth_path_regression(sol, sc, panel);
    const StratumSolution& s = sol.strata[0];
    const ClosedFormExample ex(sc.prefs, s.lambda_star, s.y_hat, panel.grid, panel.observed[0].mpr.lambda);
    for (std::size_t k = 0; k <= sc.grid.n_steps; k += 4) {
      double se = 0.0, mean = 0.0;
      for (std::size_t i = 0; i < panel.paths.size(); ++i) {
        const double cf = ex.F(panel.observed[i].density.z[k], k);
        se += std::pow(w.x_hat[i][k] - cf, 2);
        mean += cf;
      }
      const double n = static_cast<double>(panel.paths.size());
      CHECK(std::sqrt(se / n) <= 0.01 * mean / n);
    }
  }
}

TEST_CASE("orthogonality of the replication residual in a complete market") {
  Scenario sc = scenario(0.1, -0.05, ChangePointLaw::exponential(1.0), FiltrationKind::PriceOnly, 50, 10000,
                         EpsPolicy::quantile(0.5), 8);
  sc.attach();
  const DualSolution sol = solve_dual(sc);
  const PathPanel panel = build_panel(sc);
  const RegressionWealth w = wealth_path_regression(sol, sc, panel);
  const auto pi = strategy_regression(sol, sc, panel);
  const OrthogonalityReport rep = orthogonality_check(sol, sc, panel, pi);
  CHECK(rep.max_abs_corr <= 0.05);

  auto bumped = pi;
  for (auto& s : bumped)
    for (double& v : s.pi_hat) v *= 1.1;
  CHECK(orthogonality_check(sol, sc, panel, bumped).max_abs_corr > rep.max_abs_corr);
}
