#include "hrmm/market_model.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hrmm {

namespace {

constexpr const char* kModule = "market_model";

void require_finite(double x, const char* what) {
  if (!std::isfinite(x)) {
    throw ConfigError(kModule, std::string("non-finite ") + what);
  }
}

// 1 / (1 + exp(x)) without overflow for large |x|.
double logistic_tail(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

}  // namespace

double fill_probability(const FillCurve& curve, double delta) {
  require_finite(delta, "offset");
  return logistic_tail(curve.alpha + curve.beta * delta);
}

double fill_probability_d1(const FillCurve& curve, double delta) {
  const double f = fill_probability(curve, delta);
  return -curve.beta * f * (1.0 - f);
}

double fill_probability_d2(const FillCurve& curve, double delta) {
  const double f = fill_probability(curve, delta);
  return curve.beta * curve.beta * f * (1.0 - f) * (1.0 - 2.0 * f);
}

double fill_inverse(const FillCurve& curve, double u) {
  if (!(u > 0.0 && u < 1.0)) {
    std::ostringstream os;
    os << "fill probability " << u << " outside (0, 1)";
    throw NumericalError(kModule, os.str());
  }
  // log(1/u - 1) written to stay accurate when u is close to 1.
  return (std::log1p(-u) - std::log(u) - curve.alpha) / curve.beta;
}

double fill_intensity(double lambda, const FillCurve& curve, double delta) {
  if (lambda == 0.0) {
    return 0.0;
  }
  return lambda * fill_probability(curve, delta);
}

ArrivalBook::ArrivalBook(int bonds, int tiers, int sizes)
    : n_bonds(bonds),
      n_tiers(tiers),
      n_sizes(sizes),
      lambda(static_cast<std::size_t>(bonds * tiers * 2 * sizes), 0.0),
      fill(static_cast<std::size_t>(bonds * tiers * 2 * sizes)) {}

Rung ArrivalBook::rung(int index) const noexcept {
  Rung r;
  r.size = index % n_sizes;
  index /= n_sizes;
  r.side = static_cast<Side>(index % 2);
  index /= 2;
  r.tier = index % n_tiers;
  r.bond = index / n_tiers;
  return r;
}

bool TargetSpec::is_targeted(int tau) const {
  return std::find(targeted.begin(), targeted.end(), tau) != targeted.end();
}

bool TargetSpec::is_active(int tau) const {
  return is_targeted(tau) && kappa[static_cast<std::size_t>(tau)] > 0.0;
}

MarketSpec make_market(std::vector<std::string> bonds, std::vector<std::string> tiers, std::vector<double> sizes) {
  MarketSpec spec;
  spec.bonds = std::move(bonds);
  spec.tiers = std::move(tiers);
  spec.ladder.sizes = std::move(sizes);
  spec.arrivals = ArrivalBook(spec.n_bonds(), spec.n_tiers(), spec.n_sizes());
  spec.risk.sigma_cov = Matrix::Identity(spec.n_bonds(), spec.n_bonds());
  spec.targets.r_star.assign(spec.tiers.size(), 0.0);
  spec.targets.kappa.assign(spec.tiers.size(), 0.0);
  return spec;
}

void validate(const MarketSpec& spec) {
  const int M = spec.n_bonds();
  const int T = spec.n_tiers();
  const int K = spec.n_sizes();
  if (M <= 0) throw ConfigError(kModule, "at least one bond is required");
  if (T <= 0) throw ConfigError(kModule, "at least one tier is required");
  if (K <= 0) throw ConfigError(kModule, "size ladder is empty");

  for (int k = 0; k < K; ++k) {
    const double z = spec.ladder[k];
    require_finite(z, "ladder size");
    if (z <= 0.0) throw ConfigError(kModule, "ladder sizes must be strictly positive", "rung " + std::to_string(k));
    if (k > 0 && z <= spec.ladder[k - 1]) {
      throw ConfigError(kModule, "ladder sizes must be strictly increasing", "rung " + std::to_string(k));
    }
  }

  const auto& book = spec.arrivals;
  if (book.n_bonds != M || book.n_tiers != T || book.n_sizes != K ||
      static_cast<int>(book.lambda.size()) != book.n_rungs() || static_cast<int>(book.fill.size()) != book.n_rungs()) {
    throw ConfigError(kModule, "arrival book dimensions do not match bonds x tiers x ladder");
  }
  for (int i = 0; i < book.n_rungs(); ++i) {
    const Rung r = book.rung(i);
    const std::string where = spec.bonds[static_cast<std::size_t>(r.bond)] + "/" +
                              spec.tiers[static_cast<std::size_t>(r.tier)] + "/" + side_name(r.side) + "/" +
                              std::to_string(r.size);
    const double lam = spec.lambda(i);
    require_finite(lam, "intensity");
    if (lam < 0.0) throw ConfigError(kModule, "intensities must be non-negative", where);
    const FillCurve& c = spec.curve(i);
    require_finite(c.alpha, "fill alpha");
    require_finite(c.beta, "fill beta");
    if (!(c.beta > 0.0)) throw ConfigError(kModule, "fill curve beta must be positive", where);
  }
  for (int tau = 0; tau < T; ++tau) {
    if (!(notional_scale(spec, tau) > 0.0)) {
      throw ConfigError(kModule, "tier has no arrival intensity", spec.tiers[static_cast<std::size_t>(tau)]);
    }
  }

  const auto& risk = spec.risk;
  require_finite(risk.phi, "phi");
  require_finite(risk.eta, "eta");
  require_finite(risk.horizon, "horizon");
  if (risk.phi < 0.0) throw ConfigError(kModule, "phi must be non-negative");
  if (risk.eta < 0.0) throw ConfigError(kModule, "eta must be non-negative");
  if (!(risk.horizon > 0.0)) throw ConfigError(kModule, "horizon must be positive");
  if (risk.sigma_cov.rows() != M || risk.sigma_cov.cols() != M) {
    throw ConfigError(kModule, "covariance must be M x M");
  }
  if (!risk.sigma_cov.allFinite()) throw ConfigError(kModule, "covariance has non-finite entries");
  if (((risk.sigma_cov - risk.sigma_cov.transpose()).cwiseAbs().maxCoeff()) > 1e-12) {
    throw ConfigError(kModule, "covariance is not symmetric");
  }
  // PSD up to a relative 1e-12 shift.
  const double scale = std::max(1.0, risk.sigma_cov.cwiseAbs().maxCoeff());
  Eigen::LDLT<Matrix> ldlt(risk.sigma_cov + 1e-12 * scale * Matrix::Identity(M, M));
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() < 0.0).any()) {
    throw ConfigError(kModule, "covariance is not positive semidefinite");
  }

  require_finite(spec.lattice.q_max, "q_max");
  require_finite(spec.lattice.unit, "grid unit");
  if (!(spec.lattice.q_max > 0.0)) throw ConfigError(kModule, "q_max must be positive");
  if (spec.lattice.unit < 0.0) throw ConfigError(kModule, "grid unit must be non-negative");

  const auto& tg = spec.targets;
  if (static_cast<int>(tg.r_star.size()) != T || static_cast<int>(tg.kappa.size()) != T) {
    throw ConfigError(kModule, "target vectors must have one entry per tier");
  }
  for (std::size_t i = 0; i < tg.targeted.size(); ++i) {
    const int tau = tg.targeted[i];
    if (tau < 0 || tau >= T) throw ConfigError(kModule, "targeted tier index out of range");
    if (std::count(tg.targeted.begin(), tg.targeted.end(), tau) != 1) {
      throw ConfigError(kModule, "tier targeted twice", spec.tiers[static_cast<std::size_t>(tau)]);
    }
    const double r = tg.r_star[static_cast<std::size_t>(tau)];
    const double kap = tg.kappa[static_cast<std::size_t>(tau)];
    if (!(r > 0.0 && r < 1.0)) throw ConfigError(kModule, "target hit ratio must lie in (0, 1)", spec.tiers[static_cast<std::size_t>(tau)]);
    if (!std::isfinite(kap) || kap < 0.0) throw ConfigError(kModule, "kappa must be finite and non-negative", spec.tiers[static_cast<std::size_t>(tau)]);
  }
}

bool side_symmetric(const MarketSpec& spec) {
  const auto& book = spec.arrivals;
  for (int m = 0; m < book.n_bonds; ++m) {
    for (int tau = 0; tau < book.n_tiers; ++tau) {
      for (int k = 0; k < book.n_sizes; ++k) {
        if (book.lambda_at(m, tau, Side::bid, k) != book.lambda_at(m, tau, Side::ask, k)) return false;
        if (book.lambda_at(m, tau, Side::bid, k) > 0.0 &&
            !(book.fill_at(m, tau, Side::bid, k) == book.fill_at(m, tau, Side::ask, k))) {
          return false;
        }
      }
    }
  }
  return true;
}

double notional_scale(const MarketSpec& spec, int tau) {
  if (tau < 0 || tau >= spec.n_tiers()) {
    throw ConfigError(kModule, "unknown tier index " + std::to_string(tau));
  }
  const auto& book = spec.arrivals;
  double w = 0.0;
  for (int m = 0; m < book.n_bonds; ++m) {
    for (int s = 0; s < 2; ++s) {
      for (int k = 0; k < book.n_sizes; ++k) {
        w += spec.ladder[k] * book.lambda_at(m, tau, static_cast<Side>(s), k);
      }
    }
  }
  return w;
}

double instantaneous_hit_ratio(const MarketSpec& spec, std::span<const double> quotes, int tau) {
  if (static_cast<int>(quotes.size()) != spec.n_rungs()) {
    throw ConfigError(kModule, "quote vector must cover every rung");
  }
  const double w = notional_scale(spec, tau);
  const auto& book = spec.arrivals;
  double filled = 0.0;
  for (int m = 0; m < book.n_bonds; ++m) {
    for (int s = 0; s < 2; ++s) {
      for (int k = 0; k < book.n_sizes; ++k) {
        const int i = book.index(m, tau, static_cast<Side>(s), k);
        const double lam = spec.lambda(i);
        if (lam == 0.0) continue;
        const double delta = quotes[static_cast<std::size_t>(i)];
        if (std::isnan(delta)) {
          throw NumericalError(kModule, "incomplete policy: missing quote on an active rung", "rung " + std::to_string(i));
        }
        filled += spec.ladder[k] * fill_intensity(lam, spec.curve(i), delta);
      }
    }
  }
  return filled / w;
}

}  // namespace hrmm
