#pragma once

#include "hrmm/dual.hpp"
#include "hrmm/hamiltonian.hpp"
#include "hrmm/sym_matrix.hpp"

#include <optional>
#include <vector>

namespace hrmm {

/// d_m = sum over tiers, sides and sizes of z_k H''(0) on bond m.
Vector curvature_diagonal(const MarketSpec& spec, const HamiltonianBook& book);
Matrix curvature_matrix_D(const MarketSpec& spec, const HamiltonianBook& book);

/// Closed-form flow of the matrix Riccati equation A' = A Dm A - phi Sigma, A(T) = eta Sigma.
///
/// With K = Dm^{1/2} A Dm^{1/2} and x = T - t the equation reads dK/dx = G^2 - K^2 with
/// G = (Dm^{1/2} phi Sigma Dm^{1/2})^{1/2} and K(0) = (eta / phi) G^2, so K stays a function
/// of G. Each eigencomponent with k(0) = k0 follows
///   g tanh(g x + atanh(k0 / g))   if k0 < g,
///   g                             if k0 = g,
///   g coth(g x + atanh(g / k0))   if k0 > g,
///   k0 / (1 + k0 x)               if g = 0 (this also covers phi = 0 in the basis of K(0)).
class RiccatiFlow {
 public:
  RiccatiFlow(const Matrix& Dm, const RiskSpec& risk);

  int dim() const noexcept { return static_cast<int>(g_.size()); }
  double horizon() const noexcept { return horizon_; }
  Matrix A(double t) const;
  /// Stationary positive semidefinite solution; NumericalError when phi = 0 or Sigma is singular.
  Matrix A_stationary() const;
  bool has_stationary() const noexcept { return stationary_; }

  /// Eigenvalues of K at x = T - t and their integrals from 0 to x.
  Vector k(double x) const;
  Vector log_propagator(double x) const;

  const Matrix& basis() const noexcept { return basis_; }
  const Vector& g() const noexcept { return g_; }
  const Matrix& d_half() const noexcept { return d_half_; }
  const Matrix& d_inv_half() const noexcept { return d_inv_half_; }

 private:
  enum class Branch { tanh, flat, coth, hyperbolic };

  double horizon_;
  Matrix terminal_;  // eta Sigma
  bool stationary_ = false;
  Matrix d_half_;
  Matrix d_inv_half_;
  Matrix basis_;
  Vector g_;
  Vector k0_;
  Vector shift_;  // atanh argument of the tanh and coth branches
  std::vector<Branch> branch_;
};

Matrix riccati_closed_form(const Matrix& Dm, const RiskSpec& risk, double t);
Matrix riccati_stationary(const Matrix& Dm, const RiskSpec& risk);

/// Dual closure scalars of one tier around p = 0.
struct TierClosure {
  int tier = 0;
  bool live = false;
  double W = 0.0;
  double r_star = 0.0;
  double kappa = 0.0;
  double kappa_tilde = 0.0;  // 1 / (1/kappa + (1/W) sum z H''(0)); zero unless live
  double y0 = 0.0;           // r* + (1/W) sum z H'(0)
  Vector z2h2;               // per bond: sum z^2 H''(0)

  /// y = y0 + (1/2W) sum_m z2h2_m A_mm.
  double y(const Matrix& A) const;
};

std::vector<TierClosure> tier_closures(const MarketSpec& spec, const HamiltonianBook& book);

/// Constant-in-q closure xi = kappa~ y(A) per tier (zero where the target is not live).
/// Asymmetric markets throw ConfigError; use xi_asym there.
Vector xi_explicit(const MarketSpec& spec, const HamiltonianBook& book, const Matrix& A);

/// A slice of the quadratic value function u = -q'Aq/2 - B'q - C.
struct QuadraticFrame {
  Matrix A;
  Vector B;
};

/// p of every rung at inventory q before the dual shift: e_m'A(+-q + z e_m / 2) +- B_m.
/// Rungs without flow get NaN.
Vector quadratic_marginal_costs(const MarketSpec& spec, const QuadraticFrame& frame, const Vector& q);

/// Scalar fixed point of every live tier's first-order condition with the exact tabulated H'
/// and p from the quadratic frame. Zero for other tiers.
Vector xi_fixed_point(const MarketSpec& spec, const HamiltonianBook& book, const QuadraticFrame& frame,
                      const Vector& q, const Vector* warm_start = nullptr);

/// xi(q) ~ xi0 + q' hessian q / 2 per tier.
struct LocalQuadraticXi {
  Vector xi0;                   // constant closure
  Vector anchor;                // fixed point at q = 0, where H'' and H''' are evaluated
  std::vector<Matrix> hessian;  // per tier, zero matrices where the target is not live

  double value(int tau, const Vector& q) const { return xi0(tau) + 0.5 * q.dot(hessian[static_cast<std::size_t>(tau)] * q); }
};

/// Second-order expansion of the fixed-point closure around q = 0. Side-symmetric markets only.
LocalQuadraticXi xi_local_quadratic(const MarketSpec& spec, const HamiltonianBook& book, const Matrix& A);

/// Bid-minus-ask Hamiltonian moments at p = 0, bonds x tiers:
/// h11 = sum z (H'_b - H'_a), h12 = sum z (H''_b - H''_a), h22 = sum z^2 (H''_b - H''_a).
struct AsymCoefficients {
  Matrix h11;
  Matrix h12;
  Matrix h22;
  Matrix D;
  Matrix Dcal;  // D - sum over live tiers of (kappa~/W) h12 h12'
  bool symmetric = true;
};

/// Throws NumericalError when Dcal is not positive definite.
AsymCoefficients asym_coefficients(const MarketSpec& spec, const HamiltonianBook& book);

/// A(t), B(t) and the dual closures of the quadratic approximation, in the general
/// (possibly side-asymmetric) form. Symmetric markets give Dcal = D and B = 0.
class QuadraticValue {
 public:
  QuadraticValue(const MarketSpec& spec, const HamiltonianBook& book);

  const AsymCoefficients& coefficients() const noexcept { return coef_; }
  const std::vector<TierClosure>& closures() const noexcept { return closures_; }
  const RiccatiFlow& flow() const noexcept { return flow_; }
  bool symmetric() const noexcept { return coef_.symmetric; }
  double horizon() const noexcept { return flow_.horizon(); }

  Matrix A(double t) const { return flow_.A(t); }
  /// Linear coefficient by Simpson quadrature of the propagator integral, refined until
  /// successive halvings of the panel width agree to 1e-8.
  Vector B(double t) const;
  /// Source term of the B equation for a given A.
  Vector Y(const Matrix& A) const;
  double y(int tau, const Matrix& A) const { return closures_[static_cast<std::size_t>(tau)].y(A); }

  bool has_stationary() const noexcept { return flow_.has_stationary(); }
  const Matrix& A_stat() const;
  const Vector& B_stat() const;

  QuadraticFrame frame(double t) const { return {A(t), B(t)}; }
  QuadraticFrame stationary_frame() const { return {A_stat(), B_stat()}; }

  /// Closure kappa~ y + (kappa~/W) sum_m h12_m ((Aq)_m + B_m) per tier; zero where not live.
  Vector xi(const QuadraticFrame& frame, const Vector& q) const;

 private:
  int n_bonds_;
  AsymCoefficients coef_;
  std::vector<TierClosure> closures_;
  RiccatiFlow flow_;
  std::optional<Matrix> A_stat_;
  std::optional<Vector> B_stat_;
};

QuadraticValue quadratic_value(const MarketSpec& spec, const HamiltonianBook& book);

inline Vector xi_asym(const QuadraticValue& value, const QuadraticFrame& frame, const Vector& q) {
  return value.xi(frame, q);
}

}  // namespace hrmm
