#pragma once

#include "hrmm/core.hpp"

#include <span>
#include <string>
#include <vector>

namespace hrmm {

enum class CurveFamily { logistic };

/// Fill probability f(delta) of a quote at offset delta (bp) from mid.
///
/// The logistic family is f(delta) = 1 / (1 + exp(alpha + beta * delta)):
/// alpha is a dimensionless shift, beta > 0 the slope in 1/bp.
struct FillCurve {
  double alpha = 0.0;
  double beta = 1.0;
  CurveFamily family = CurveFamily::logistic;

  friend bool operator==(const FillCurve&, const FillCurve&) = default;
};

double fill_probability(const FillCurve& curve, double delta);
/// First and second derivatives of f with respect to the offset.
double fill_probability_d1(const FillCurve& curve, double delta);
double fill_probability_d2(const FillCurve& curve, double delta);
/// Offset at which the fill probability equals u; u must lie in (0, 1).
double fill_inverse(const FillCurve& curve, double u);
/// Lambda(delta) = lambda * f(delta), in 1/day.
double fill_intensity(double lambda, const FillCurve& curve, double delta);

struct SizeLadder {
  std::vector<double> sizes;  // millions of notional, strictly increasing

  int size() const noexcept { return static_cast<int>(sizes.size()); }
  double operator[](int k) const { return sizes[static_cast<std::size_t>(k)]; }
};

/// One quoting opportunity: bond m, tier tau, side s, ladder rung k.
struct Rung {
  int bond = 0;
  int tier = 0;
  Side side = Side::bid;
  int size = 0;
};

/// RFQ arrival intensities and fill curves, flattened over (m, tau, s, k).
struct ArrivalBook {
  int n_bonds = 0;
  int n_tiers = 0;
  int n_sizes = 0;
  std::vector<double> lambda;
  std::vector<FillCurve> fill;

  ArrivalBook() = default;
  ArrivalBook(int bonds, int tiers, int sizes);

  int n_rungs() const noexcept { return n_bonds * n_tiers * 2 * n_sizes; }
  int index(int m, int tau, Side s, int k) const noexcept {
    return ((m * n_tiers + tau) * 2 + static_cast<int>(s)) * n_sizes + k;
  }
  Rung rung(int index) const noexcept;

  double& lambda_at(int m, int tau, Side s, int k) { return lambda[static_cast<std::size_t>(index(m, tau, s, k))]; }
  double lambda_at(int m, int tau, Side s, int k) const { return lambda[static_cast<std::size_t>(index(m, tau, s, k))]; }
  FillCurve& fill_at(int m, int tau, Side s, int k) { return fill[static_cast<std::size_t>(index(m, tau, s, k))]; }
  const FillCurve& fill_at(int m, int tau, Side s, int k) const { return fill[static_cast<std::size_t>(index(m, tau, s, k))]; }
};

struct RiskSpec {
  double phi = 0.0;      // running inventory penalty
  double eta = 0.0;      // terminal penalty
  Matrix sigma_cov;      // bp^2 / day
  double horizon = 1.0;  // days
};

struct TargetSpec {
  std::vector<int> targeted;   // tier indices in the targeted set
  std::vector<double> r_star;  // per tier; only read for targeted tiers
  std::vector<double> kappa;   // per tier; only read for targeted tiers

  bool is_targeted(int tau) const;
  /// Targeted with a strictly positive penalty weight, i.e. the dual variable is live.
  bool is_active(int tau) const;
};

/// Inventory lattice bounds for the grid-based solvers.
struct LatticeSpec {
  double q_max = 100.0;  // per bond, millions
  double unit = 0.0;     // 0 selects the gcd of the ladder sizes
};

struct MarketSpec {
  std::vector<std::string> bonds;
  std::vector<std::string> tiers;
  SizeLadder ladder;
  ArrivalBook arrivals;
  RiskSpec risk;
  TargetSpec targets;
  LatticeSpec lattice;

  int n_bonds() const noexcept { return static_cast<int>(bonds.size()); }
  int n_tiers() const noexcept { return static_cast<int>(tiers.size()); }
  int n_sizes() const noexcept { return ladder.size(); }
  int n_rungs() const noexcept { return arrivals.n_rungs(); }
  double size_of(int rung_index) const { return ladder[arrivals.rung(rung_index).size]; }
  double lambda(int rung_index) const { return arrivals.lambda[static_cast<std::size_t>(rung_index)]; }
  const FillCurve& curve(int rung_index) const { return arrivals.fill[static_cast<std::size_t>(rung_index)]; }
};

/// Empty instance with the given labels and all intensities zero.
MarketSpec make_market(std::vector<std::string> bonds, std::vector<std::string> tiers, std::vector<double> sizes);

/// Throws ConfigError naming the first violated invariant.
void validate(const MarketSpec& spec);

/// True when every (m, tau, k) has identical bid and ask intensity and fill curve.
bool side_symmetric(const MarketSpec& spec);

/// W_tau = sum over (m, s, k) of z_k * lambda.
double notional_scale(const MarketSpec& spec, int tau);

/// Size-weighted instantaneous hit ratio r_tau for a full quote vector indexed by rung.
/// Quotes on rungs without flow are ignored; a NaN quote on a rung with flow is an error.
double instantaneous_hit_ratio(const MarketSpec& spec, std::span<const double> quotes, int tau);

}  // namespace hrmm
