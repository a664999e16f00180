#include "cpopt/wealth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>

#include "cpopt/errors.hpp"

namespace cpopt {

std::vector<double> optimal_terminal_wealth(const StratumSolution& sol, const Preferences& prefs,
                                            std::span<const double> z_T) {
  std::vector<double> r(z_T.size());
  for (std::size_t i = 0; i < z_T.size(); ++i)
    r[i] = lagrangian_inverse(prefs, sol.lambda_star, sol.y_hat * z_T[i]);
  return r;
}

ValueReport value(std::span<const double> r_hat, const Utility& utility) {
  if (r_hat.empty()) throw ConfigError("value: empty sample");
  const double n = static_cast<double>(r_hat.size());
  double sum = 0.0;
  for (const double r : r_hat) {
    if (!(r > 0.0)) throw OutOfRange("value: terminal wealth must be positive");
    sum += utility.u(r);
  }
  const double mean = sum / n;
  double ss = 0.0;
  for (const double r : r_hat) {
    const double d = utility.u(r) - mean;
    ss += d * d;
  }
  ValueReport v;
  v.value = mean;
  v.std_error = r_hat.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  return v;
}

std::vector<ValueReport> stratified_value(const DualSolution& sol, const Scenario& scenario) {
  std::vector<ValueReport> out;
  const std::string tag = filtration_name(scenario.filtration.kind);
  double agg = 0.0;
  double var = 0.0;
  for (std::size_t j = 0; j < sol.strata.size(); ++j) {
    ValueReport v = value(sol.strata[j].r_hat, scenario.prefs.utility);
    v.filtration = tag;
    v.stratum = static_cast<int>(j);
    agg += sol.weights[j] * v.value;
    var += sol.weights[j] * sol.weights[j] * v.std_error * v.std_error;
    out.push_back(v);
  }
  ValueReport total;
  total.value = agg;
  total.std_error = std::sqrt(var);
  total.filtration = tag;
  total.stratum = -1;
  out.push_back(total);
  return out;
}

// ---------------------------------------------------------------------------
// Closed-form example

ClosedFormExample::ClosedFormExample(const Preferences& prefs, double lambda_star, double y_hat,
                                     const SimGrid& grid, std::vector<double> lambda, int order)
    : lam_(lambda_star), y_(y_hat), grid_(grid), lambda_(std::move(lambda)) {
  if (!std::holds_alternative<Utility::Log>(prefs.utility.variant()))
    throw ConfigError("closed-form wealth needs log utility");
  const auto* loss = std::get_if<Loss::NegReciprocal>(&prefs.loss.variant());
  if (loss == nullptr) throw ConfigError("closed-form wealth needs the reciprocal loss");
  if (lambda_.size() != grid_.n_steps) throw ConfigError("closed-form wealth: schedule length differs from grid");
  if (!(y_ > 0.0) || !(lam_ >= 0.0)) throw ConfigError("closed-form wealth: invalid multipliers");
  kappa_ = 4.0 * lam_ * loss->c * y_;
  const double dt = grid_.dt();
  v_.assign(grid_.n_steps + 1, 0.0);
  for (std::size_t k = grid_.n_steps; k-- > 0;) v_[k] = v_[k + 1] + lambda_[k] * lambda_[k] * dt;
  rule_ = gauss_legendre(order);
  rule_check_ = gauss_legendre(2 * order);
}

double ClosedFormExample::b(std::size_t k) const { return -std::sqrt(v_[k]); }

ClosedFormExample::Integrals ClosedFormExample::integrate(double z, std::size_t k,
                                                          const QuadratureRule& rule) const {
  const double aa = a(k);
  const double bb = b(k);
  const double half = 8.0 + std::abs(bb);
  const double log_kz = std::log(kappa_ * z);
  double j = 0.0;
  double dj = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double x = half * rule.nodes[i];
    const double phi = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    const double lw = log_kz + aa + bb * x;  // log w, w = kappa z e^{a + b x}
    const double log1pw = lw > 0.0 ? lw + std::log1p(std::exp(-lw)) : std::log1p(std::exp(lw));
    j += rule.weights[i] * phi * std::exp(0.5 * log1pw);
    // d/dz sqrt(1 + w) = w / (2 z sqrt(1 + w))
    dj += rule.weights[i] * phi * std::exp(lw - 0.5 * log1pw);
  }
  return {half * j, half * dj / (2.0 * z)};
}

double ClosedFormExample::F(double z, std::size_t k) const {
  if (!(z > 0.0)) throw OutOfRange("closed-form wealth needs z > 0");
  if (kappa_ == 0.0) return 1.0 / (y_ * z);
  if (v_[k] == 0.0) return (1.0 + std::sqrt(1.0 + kappa_ * z)) / (2.0 * y_ * z);
  const Integrals in = integrate(z, k, rule_);
  return (1.0 + in.j) / (2.0 * y_ * z);
}

double ClosedFormExample::F_z(double z, std::size_t k) const {
  if (!(z > 0.0)) throw OutOfRange("closed-form wealth needs z > 0");
  if (kappa_ == 0.0) return -1.0 / (y_ * z * z);
  double j, dj;
  if (v_[k] == 0.0) {
    j = std::sqrt(1.0 + kappa_ * z);
    dj = kappa_ / (2.0 * j);
  } else {
    const Integrals in = integrate(z, k, rule_);
    j = in.j;
    dj = in.dj;
  }
  return -(1.0 + j) / (2.0 * y_ * z * z) + dj / (2.0 * y_ * z);
}

double ClosedFormExample::quadrature_error(double z, std::size_t k) const {
  if (kappa_ == 0.0 || v_[k] == 0.0) return 0.0;
  const double lo = (1.0 + integrate(z, k, rule_).j) / (2.0 * y_ * z);
  const double hi = (1.0 + integrate(z, k, rule_check_).j) / (2.0 * y_ * z);
  return std::abs(lo - hi) / std::abs(hi);
}

void ClosedFormExample::check_quadrature(double z, std::size_t k) const {
  const double err = quadrature_error(z, k);
  if (!(err <= 1e-6))
    throw QuadratureFailure("closed-form wealth: quadrature orders disagree by " +
                            std::to_string(err) + " at step " + std::to_string(k));
}

namespace {

bool checkpoint(std::size_t k, std::size_t n) { return k == 0 || k == n || (16 * k) % n == 0; }

}  // namespace

WealthPath wealth_path_closed_form(const ClosedFormExample& example, const DensityPath& density) {
  const std::size_t n = example.grid().n_steps;
  if (density.z.size() != n + 1) throw ConfigError("closed-form wealth: density path length differs");
  WealthPath w;
  w.method = "closed-form";
  w.x_hat.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    if (checkpoint(k, n)) example.check_quadrature(density.z[k], k);
    w.x_hat[k] = example.F(density.z[k], k);
  }
  return w;
}

StrategyPath strategy_closed_form(const ClosedFormExample& example, const DensityPath& density,
                                  std::span<const double> sigma) {
  const std::size_t n = example.grid().n_steps;
  if (sigma.size() != n) throw ConfigError("closed-form strategy: volatility schedule length differs");
  StrategyPath s;
  s.pi_hat.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double z = density.z[k];
    s.pi_hat[k] = -example.lambda()[k] * z * example.F_z(z, k) / sigma[k];
  }
  return s;
}

ReplicationReport replicate(const StrategyPath& strategy, const PathBundle& path, double x,
                            double r_hat) {
  if (strategy.pi_hat.size() != path.n_steps())
    throw ConfigError("replicate: strategy and path lengths differ");
  double v = x;
  for (std::size_t k = 0; k < strategy.pi_hat.size(); ++k)
    v += strategy.pi_hat[k] * (path.s_tilde[k + 1] - path.s_tilde[k]);
  ReplicationReport r;
  r.terminal = v;
  r.target = r_hat;
  r.relative_deviation = (v - r_hat) / r_hat;
  return r;
}

ReplicationSummary summarize_replication(std::span<const ReplicationReport> reports) {
  ReplicationSummary s;
  s.n_paths = reports.size();
  if (reports.empty()) return s;
  double se = 0.0;
  double mt = 0.0;
  for (const auto& r : reports) {
    const double d = r.terminal - r.target;
    se += d * d;
    mt += r.target;
  }
  const double n = static_cast<double>(reports.size());
  s.rmse = std::sqrt(se / n);
  s.mean_target = mt / n;
  s.relative_rmse = s.rmse / s.mean_target;
  return s;
}

// ---------------------------------------------------------------------------
// Regression

PathPanel build_panel(const Scenario& scenario) {
  PathPanel panel;
  panel.grid = scenario.grid;
  panel.paths = simulate_paths(scenario.model, scenario.grid, scenario.n_paths, scenario.seed,
                               scenario.exec);
  panel.observed.resize(panel.paths.size());
  parallel_for(panel.paths.size(), scenario.exec, [&](std::size_t i) {
    panel.observed[i] = observe(scenario.model, panel.paths[i], scenario.filtration);
  });
  return panel;
}

namespace {

// Conditioning state of one path at one grid point.
struct SliceState {
  double log_z = 0.0;
  double p = 0.0;       // posterior (price filtration) or regime indicator
  double tau = 0.0;     // min(tau, T), initially enlarged kinds only
};

SliceState state_of(const Scenario& scenario, const PathPanel& panel, std::size_t i, std::size_t k) {
  SliceState s;
  s.log_z = panel.observed[i].density.log_z[k];
  if (scenario.filtration.kind == FiltrationKind::PriceOnly) {
    s.p = panel.observed[i].p[k];
  } else {
    s.p = static_cast<double>(panel.paths[i].regime[k]);
    s.tau = std::min(panel.paths[i].tau, panel.grid.horizon);
  }
  return s;
}

// Basis row for a state; the first entry is the constant.
std::vector<double> features(FiltrationKind kind, const RegressionBasis& basis, const SliceState& s) {
  std::vector<double> f;
  const double inv_z = std::exp(-s.log_z);
  f.push_back(1.0);
  if (basis.poly_degree >= 1) f.push_back(s.log_z);
  if (basis.inverse_z) f.push_back(inv_z);
  f.push_back(s.p);
  if (kind == FiltrationKind::PriceOnly) {
    if (basis.filter_interactions) {
      f.push_back(s.p * s.log_z);
      if (basis.inverse_z) f.push_back(s.p * inv_z);
      f.push_back(s.p * s.p);
    }
  } else if (initially_enlarged(kind)) {
    f.push_back(s.tau);
  }
  for (int d = 2; d <= basis.poly_degree; ++d) f.push_back(std::pow(s.log_z, d));
  return f;
}

// Least-squares surface on standardized columns. Constant columns are
// skipped, and trailing columns are dropped while the normal matrix is too
// ill-conditioned.
struct SliceModel {
  std::vector<Eigen::Index> columns;  // source column per used column, 0 = constant
  Eigen::VectorXd mean, scale, beta;
  Eigen::VectorXd fitted;
  int dropped = 0;

  double operator()(const std::vector<double>& row) const {
    double v = beta(0);
    for (Eigen::Index c = 1; c < beta.size(); ++c)
      v += beta(c) * (row[static_cast<std::size_t>(columns[static_cast<std::size_t>(c)])] - mean(c)) / scale(c);
    return v;
  }
};

SliceModel fit_slice(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double max_condition) {
  const Eigen::Index n = x.rows();
  SliceModel m;
  m.columns.push_back(0);
  std::vector<double> means{0.0}, scales{1.0};
  Eigen::MatrixXd std_x(n, x.cols());
  std_x.col(0).setOnes();
  for (Eigen::Index c = 1; c < x.cols(); ++c) {
    const double mean = x.col(c).mean();
    const double sd = std::sqrt((x.col(c).array() - mean).square().mean());
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) continue;
    std_x.col(static_cast<Eigen::Index>(m.columns.size())) = (x.col(c).array() - mean) / sd;
    m.columns.push_back(c);
    means.push_back(mean);
    scales.push_back(sd);
  }
  Eigen::Index cols = static_cast<Eigen::Index>(m.columns.size());
  m.dropped = static_cast<int>(x.cols() - cols);
  while (cols > 1) {
    const Eigen::MatrixXd a = std_x.leftCols(cols);
    const Eigen::MatrixXd normal = a.transpose() * a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(normal, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo > 0.0 && hi / lo <= max_condition) break;
    --cols;
    ++m.dropped;
  }
  m.columns.resize(static_cast<std::size_t>(cols));
  m.mean = Eigen::Map<const Eigen::VectorXd>(means.data(), cols);
  m.scale = Eigen::Map<const Eigen::VectorXd>(scales.data(), cols);
  const Eigen::MatrixXd a = std_x.leftCols(cols);
  m.beta = a.colPivHouseholderQr().solve(y);
  m.fitted = a * m.beta;
  if (!m.fitted.allFinite()) throw IllConditioned("regression slice produced non-finite values");
  return m;
}

Eigen::MatrixXd design(const Scenario& scenario, const PathPanel& panel,
                       const std::vector<std::size_t>& rows, std::size_t k,
                       const RegressionBasis& basis) {
  const FiltrationKind kind = scenario.filtration.kind;
  Eigen::MatrixXd x;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto f = features(kind, basis, state_of(scenario, panel, rows[r], k));
    if (r == 0) x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(f.size()));
    for (std::size_t c = 0; c < f.size(); ++c)
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = f[c];
  }
  return x;
}

// Z_T / Z_k * R_hat, whose conditional mean is the wealth at step k.
Eigen::VectorXd deflated_target(const DualSolution& sol, const PathPanel& panel,
                                const std::vector<std::size_t>& rows, std::size_t k) {
  const std::size_t n = panel.grid.n_steps;
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& lz = panel.observed[rows[r]].density.log_z;
    y(static_cast<Eigen::Index>(r)) = std::exp(lz[n] - lz[k]) * sol.r_hat[rows[r]];
  }
  return y;
}

std::vector<std::vector<std::size_t>> groups_of(const Scenario& scenario, std::size_t n_paths) {
  std::vector<std::vector<std::size_t>> groups;
  if (scenario.strata.empty()) {
    groups.emplace_back(n_paths);
    for (std::size_t i = 0; i < n_paths; ++i) groups[0][i] = i;
    return groups;
  }
  for (const auto& s : scenario.strata) groups.push_back(s.index);
  return groups;
}

constexpr std::size_t kMinFold = 64;

// Sensitivity of the posterior to the innovation increment, p(1-p)(mu2-mu1)/sigma.
double filter_gain(const Scenario& scenario, const PathPanel& panel, std::size_t i, std::size_t k) {
  if (scenario.filtration.kind != FiltrationKind::PriceOnly) return 0.0;
  const double p = panel.observed[i].p[k];
  const double t = panel.grid.time(k);
  const double x = panel.paths[i].s_tilde[k];
  const auto& c = scenario.model.coeffs;
  return p * (1.0 - p) * (c.mu2(t, x) - c.mu1(t, x)) / panel.observed[i].mpr.sigma[k];
}

}  // namespace

RegressionWealth wealth_path_regression(const DualSolution& sol, const Scenario& scenario,
                                        const PathPanel& panel, const RegressionBasis& basis) {
  const std::size_t n_paths = panel.paths.size();
  const std::size_t n = panel.grid.n_steps;
  if (sol.r_hat.size() != n_paths) throw ConfigError("regression: solution and panel sizes differ");
  RegressionWealth out;
  out.x_hat.assign(n_paths, std::vector<double>(n + 1, 0.0));
  out.dropped_terms.assign(n + 1, 0);
  for (std::size_t i = 0; i < n_paths; ++i) {
    out.x_hat[i][0] = scenario.x;
    out.x_hat[i][n] = sol.r_hat[i];
  }
  const auto groups = groups_of(scenario, n_paths);
  for (std::size_t k = 1; k < n; ++k) {
    for (const auto& rows : groups) {
      const SliceModel fit = fit_slice(design(scenario, panel, rows, k, basis),
                                       deflated_target(sol, panel, rows, k), basis.max_condition);
      out.dropped_terms[k] = std::max(out.dropped_terms[k], fit.dropped);
      for (std::size_t r = 0; r < rows.size(); ++r)
        out.x_hat[rows[r]][k] = fit.fitted(static_cast<Eigen::Index>(r));
    }
  }
  return out;
}

std::vector<StrategyPath> strategy_regression(const DualSolution& sol, const Scenario& scenario,
                                              const PathPanel& panel, const RegressionBasis& basis) {
  const std::size_t n_paths = panel.paths.size();
  const std::size_t n = panel.grid.n_steps;
  if (sol.r_hat.size() != n_paths) throw ConfigError("regression: solution and panel sizes differ");
  const FiltrationKind kind = scenario.filtration.kind;
  std::vector<StrategyPath> out(n_paths);
  for (auto& s : out) s.pi_hat.assign(n, 0.0);
  const auto groups = groups_of(scenario, n_paths);
  for (std::size_t k = 0; k < n; ++k) {
    for (const auto& rows : groups) {
      // Every path shares the initial state, so step 0 borrows the step-1 surface.
      const std::size_t kf = std::max<std::size_t>(k, 1);
      // With cross-fitting, each half of the paths is differentiated on the
      // surface fitted to the other half.
      std::vector<std::vector<std::size_t>> folds;
      if (basis.cross_fit && rows.size() >= 2 * kMinFold) {
        folds.resize(2);
        for (std::size_t r = 0; r < rows.size(); ++r) folds[r % 2].push_back(rows[r]);
      } else {
        folds.push_back(rows);
      }
      for (std::size_t f = 0; f < folds.size(); ++f) {
        const auto& train = folds.size() == 1 ? folds[0] : folds[1 - f];
        const SliceModel fit = fit_slice(design(scenario, panel, train, kf, basis),
                                         deflated_target(sol, panel, train, kf), basis.max_condition);
        for (const std::size_t i : folds[f]) {
          // Central difference of the surface along one unit of innovation.
          const SliceState s = state_of(scenario, panel, i, k);
          const double dl = -panel.observed[i].mpr.lambda[k];
          const double dp = filter_gain(scenario, panel, i, k);
          const double h = basis.delta_step;
          SliceState up = s, dn = s;
          up.log_z += h * dl;
          dn.log_z -= h * dl;
          up.p += h * dp;
          dn.p -= h * dp;
          const double d = (fit(features(kind, basis, up)) - fit(features(kind, basis, dn))) / (2.0 * h);
          out[i].pi_hat[k] = d / panel.observed[i].mpr.sigma[k];
        }
      }
    }
  }
  return out;
}

OrthogonalityReport orthogonality_check(const DualSolution& sol, const Scenario& scenario,
                                        const PathPanel& panel,
                                        std::span<const StrategyPath> strategy) {
  const std::size_t n_paths = panel.paths.size();
  const std::size_t n = panel.grid.n_steps;
  if (strategy.size() != n_paths) throw ConfigError("orthogonality: strategy count differs");
  OrthogonalityReport rep;
  rep.residuals.resize(n_paths);
  constexpr std::size_t kTests = 4;
  std::vector<std::array<double, kTests>> tests(n_paths);
  std::vector<double> w(n_paths);
  for (std::size_t i = 0; i < n_paths; ++i) {
    const auto& path = panel.paths[i];
    const auto& obs = panel.observed[i];
    const ReplicationReport r = replicate(strategy[i], path, scenario.x, sol.r_hat[i]);
    rep.residuals[i] = r.target - r.terminal;
    std::array<double, kTests> t{};
    for (std::size_t k = 0; k < n; ++k) {
      const double db = (path.s_tilde[k + 1] - path.s_tilde[k]) / obs.mpr.sigma[k];
      const double z = obs.density.z[k];
      t[0] += db;
      t[1] += z * db;
      t[2] += db / z;
      t[3] += panel.grid.time(k) * db;
    }
    tests[i] = t;
    w[i] = obs.density.z.back();
  }
  double wsum = 0.0;
  for (const double v : w) wsum += v;
  auto wmean = [&](const std::function<double(std::size_t)>& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < n_paths; ++i) s += w[i] * f(i);
    return s / wsum;
  };
  const double me = wmean([&](std::size_t i) { return rep.residuals[i]; });
  const double ve = wmean([&](std::size_t i) { return std::pow(rep.residuals[i] - me, 2); });
  rep.corr.assign(kTests, 0.0);
  for (std::size_t h = 0; h < kTests; ++h) {
    const double mt = wmean([&](std::size_t i) { return tests[i][h]; });
    const double vt = wmean([&](std::size_t i) { return std::pow(tests[i][h] - mt, 2); });
    const double cv = wmean([&](std::size_t i) { return (rep.residuals[i] - me) * (tests[i][h] - mt); });
    rep.corr[h] = (ve > 1e-24 * scenario.x * scenario.x && vt > 0.0) ? cv / std::sqrt(ve * vt) : 0.0;
    rep.max_abs_corr = std::max(rep.max_abs_corr, std::abs(rep.corr[h]));
  }
  return rep;
}

}  // namespace cpopt
