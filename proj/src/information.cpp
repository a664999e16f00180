#include "cpopt/information.hpp"

#include <cmath>
#include <limits>

#include "cpopt/errors.hpp"

namespace cpopt {

FiltrationKind parse_filtration(std::string_view name) {
  if (name == "init-w") return FiltrationKind::InitiallyEnlargedW;
  if (name == "init-s") return FiltrationKind::InitiallyEnlargedS;
  if (name == "prog-w") return FiltrationKind::ProgressiveW;
  if (name == "prog-s") return FiltrationKind::ProgressiveS;
  if (name == "price") return FiltrationKind::PriceOnly;
  throw ConfigError("unknown filtration '" + std::string(name) +
                    "' (expected init-w, init-s, prog-w, prog-s or price)");
}

std::string filtration_name(FiltrationKind kind) {
  switch (kind) {
    case FiltrationKind::InitiallyEnlargedW: return "init-w";
    case FiltrationKind::InitiallyEnlargedS: return "init-s";
    case FiltrationKind::ProgressiveW: return "prog-w";
    case FiltrationKind::ProgressiveS: return "prog-s";
    case FiltrationKind::PriceOnly: return "price";
  }
  return "?";
}

bool initially_enlarged(FiltrationKind kind) {
  return kind == FiltrationKind::InitiallyEnlargedW || kind == FiltrationKind::InitiallyEnlargedS;
}

bool progressive(FiltrationKind kind) {
  return kind == FiltrationKind::ProgressiveW || kind == FiltrationKind::ProgressiveS;
}

namespace {

void require_independent(const MarketModel& model) {
  if (!model.tau_independent)
    throw UnsupportedEnlargement(
        "change point correlated with the Brownian motion: enlargement drift not supported");
}

double checked_sigma(double sigma, double dt) {
  if (!(sigma * std::sqrt(dt) >= std::numeric_limits<double>::min()) || !std::isfinite(sigma))
    throw DegenerateLikelihood("volatility underflows in the change-point likelihood");
  return sigma;
}

}  // namespace

std::vector<double> change_point_filter(const MarketModel& model, const PathBundle& path,
                                        const std::vector<std::uint8_t>* revealed) {
  require_independent(model);
  const SimGrid& grid = path.grid;
  const std::size_t n = grid.n_steps;
  const double dt = grid.dt();
  const auto& law = model.law;

  // m_k = P(tau >= t_k | info) is carried as r_k = m_k / P(tau >= t_k), so an
  // uninformative step leaves r unchanged and m equals the prior exactly.
  std::vector<double> p(n + 1);
  double r = 1.0;
  bool switched = false;
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = grid.time(k);
    const double surv = law.survival_from(t);
    const double m = switched ? 0.0 : r * surv;
    const bool shown = revealed != nullptr && k < n && (*revealed)[k] != 0;
    p[k] = shown ? static_cast<double>(path.regime[k]) : 1.0 - m;
    if (k == n) break;

    if (shown) {
      if (path.regime[k] != 0) {
        switched = true;
      } else {
        switched = false;
        r = surv > 0.0 ? 1.0 / surv : 0.0;
      }
      continue;
    }
    if (switched || m == 0.0) continue;

    const double x = path.s_tilde[k];
    const double d = path.s_tilde[k + 1] - x;
    const double mu1 = model.coeffs.mu1(t, x);
    const double mu2 = model.coeffs.mu2(t, x);
    const double s1 = checked_sigma(model.coeffs.sigma1(t, x), dt);
    const double s2 = checked_sigma(model.coeffs.sigma2(t, x), dt);
    const double e1 = d - mu1 * dt;
    const double e2 = d - mu2 * dt;
    const double log_ratio =
        (std::log(s1) - std::log(s2)) + e1 * e1 / (2.0 * s1 * s1 * dt) - e2 * e2 / (2.0 * s2 * s2 * dt);
    const double ell = std::exp(log_ratio);  // phi2 / phi1
    const double one_minus_m = 1.0 - m;
    double g;
    if (one_minus_m == 0.0) {
      g = 1.0;
    } else if (std::isinf(ell)) {
      g = 0.0;
    } else {
      g = 1.0 / (1.0 + one_minus_m * (ell - 1.0));
    }
    r *= g;
    if (!std::isfinite(r)) throw DegenerateLikelihood("change-point posterior is not finite");
  }
  return p;
}

RegimeIntervals detect_regime_intervals(const PathBundle& path, const VolCase& vol) {
  const SimGrid& grid = path.grid;
  const std::size_t n = grid.n_steps;
  RegimeIntervals out;
  out.horizon = grid.horizon;
  out.in_o.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    bool in = false;
    switch (vol.kind) {
      case VolCase::Kind::Identical: in = false; break;
      case VolCase::Kind::Distinct: in = true; break;
      case VolCase::Kind::SemiIdentical: in = vol.in_o(grid.time(k), path.s[k]); break;
    }
    out.in_o[k] = in ? 1 : 0;
  }
  // Odd members are exits from O, even members entries. The search includes
  // the previous member's grid point, where the state is always opposite
  // except at rho_0.
  out.rho.push_back(0.0);
  std::size_t idx = 0;
  bool want_in = false;
  while (true) {
    std::size_t k = idx;
    while (k <= n && (out.in_o[k] != 0) != want_in) ++k;
    if (k > n) {
      out.rho.push_back(grid.horizon);
      break;
    }
    out.rho.push_back(grid.time(k));
    if (k == n) break;
    idx = k;
    want_in = !want_in;
  }
  return out;
}

MarketPriceOfRisk market_price_of_risk(const MarketModel& model, const PathBundle& path,
                                       const Filtration& filtration, std::vector<double>* posterior) {
  require_independent(model);
  const SimGrid& grid = path.grid;
  const std::size_t n = grid.n_steps;
  MarketPriceOfRisk out;
  out.lambda.resize(n);
  out.sigma.resize(n);

  auto regime_known = [&]() {
    for (std::size_t k = 0; k < n; ++k) {
      const double t = grid.time(k);
      const double x = path.s_tilde[k];
      const bool after = path.regime[k] != 0;
      const double sig = model.coeffs.vol(after, t, x);
      out.sigma[k] = sig;
      out.lambda[k] = model.coeffs.drift(after, t, x) / sig;
    }
    if (posterior != nullptr) {
      posterior->resize(n + 1);
      for (std::size_t k = 0; k <= n; ++k) (*posterior)[k] = path.regime[k];
    }
  };

  if (filtration.kind != FiltrationKind::PriceOnly ||
      filtration.vol.kind == VolCase::Kind::Distinct) {
    regime_known();
    return out;
  }

  std::vector<std::uint8_t> revealed;
  const std::vector<std::uint8_t>* mask = nullptr;
  if (filtration.vol.kind == VolCase::Kind::SemiIdentical) {
    if (!filtration.vol.in_o) throw ConfigError("semi-identical volatility case without a set O");
    revealed = detect_regime_intervals(path, filtration.vol).in_o;
    mask = &revealed;
  }
  std::vector<double> p = change_point_filter(model, path, mask);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = grid.time(k);
    const double x = path.s_tilde[k];
    if (mask != nullptr && revealed[k] != 0) {
      const bool after = path.regime[k] != 0;
      const double sig = model.coeffs.vol(after, t, x);
      out.sigma[k] = sig;
      out.lambda[k] = model.coeffs.drift(after, t, x) / sig;
      continue;
    }
    const double s1 = model.coeffs.sigma1(t, x);
    const double s2 = model.coeffs.sigma2(t, x);
    if (std::abs(s1 - s2) > 1e-12 * std::max(std::abs(s1), std::abs(s2)))
      throw ConfigError("price filtration: volatilities differ at t=" + std::to_string(t) +
                        " outside the set O");
    const double mix = (1.0 - p[k]) * model.coeffs.mu1(t, x) + p[k] * model.coeffs.mu2(t, x);
    out.sigma[k] = s1;
    out.lambda[k] = mix / s1;
  }
  if (posterior != nullptr) *posterior = std::move(p);
  return out;
}

DensityPath density_path(const MarketPriceOfRisk& mpr, const PathBundle& path) {
  const std::size_t n = path.grid.n_steps;
  const double dt = path.grid.dt();
  DensityPath out;
  out.dw_hat.resize(n);
  out.log_z.resize(n + 1);
  out.z.resize(n + 1);
  out.log_z[0] = 0.0;
  out.z[0] = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double lam = mpr.lambda[k];
    const double sig = mpr.sigma[k];
    const double ds = path.s_tilde[k + 1] - path.s_tilde[k];
    const double dw = (ds - lam * sig * dt) / sig;
    out.dw_hat[k] = dw;
    out.log_z[k + 1] = out.log_z[k] - lam * dw - 0.5 * lam * lam * dt;
    out.z[k + 1] = std::exp(out.log_z[k + 1]);
    if (!std::isfinite(out.log_z[k + 1]) || !(out.z[k + 1] > 0.0) || !std::isfinite(out.z[k + 1]))
      throw NonFinite("density process overflow at step " + std::to_string(k + 1));
  }
  return out;
}

CompensatedJump compensated_jump(const MarketModel& model, const PathBundle& path) {
  const std::size_t n = path.grid.n_steps;
  CompensatedJump out;
  out.a.resize(n + 1);
  out.n.resize(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double t = path.grid.time(k);
    out.a[k] = model.law.cumulative_hazard(std::min(t, path.tau));
    out.n[k] = (path.tau <= t ? 1.0 : 0.0) - out.a[k];
  }
  return out;
}

ObservedPath observe(const MarketModel& model, const PathBundle& path, const Filtration& filtration) {
  ObservedPath out;
  out.mpr = market_price_of_risk(model, path, filtration, &out.p);
  out.density = density_path(out.mpr, path);
  return out;
}

DensitySample density_sample(const MarketModel& model, const SimGrid& grid,
                             const Filtration& filtration, std::size_t n_paths,
                             std::uint64_t seed, const Exec& exec) {
  model.validate();
  require_independent(model);
  if (n_paths == 0) throw ConfigError("density_sample: n_paths must be >= 1");
  DensitySample out;
  out.z_T.resize(n_paths);
  out.tau.resize(n_paths);
  parallel_for(n_paths, exec, [&](std::size_t i) {
    const PathBundle path = draw_path(model, grid, seed, i);
    const MarketPriceOfRisk mpr = market_price_of_risk(model, path, filtration);
    const DensityPath d = density_path(mpr, path);
    out.z_T[i] = d.z.back();
    out.tau[i] = path.tau;
  });
  return out;
}

}  // namespace cpopt
