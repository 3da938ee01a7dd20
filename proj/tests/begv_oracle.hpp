#pragma once

// BEGV coefficients summed rung by rung from the Hamiltonian at p = 0.

#include "oracles.hpp"

#include "hrmm/hamiltonian.hpp"

namespace oracle {

using namespace hrmm;

// Coefficients summed rung by rung straight from the Hamiltonian at p = 0.
struct Moments {
  Vector d;                    // per bond: sum z H''(0)
  Matrix h11, h12, h22;        // bonds x tiers, bid minus ask
  std::vector<double> W, sum_h1, sum_h2, kappa_tilde, r_star;
  Matrix z2h2;                 // bonds x tiers: sum z^2 H''(0) over both sides
  std::vector<bool> live;
  Matrix Dcal;

  explicit Moments(const MarketSpec& spec) {
    const int M = spec.n_bonds(), T = spec.n_tiers();
    d = Vector::Zero(M);
    h11 = h12 = h22 = z2h2 = Matrix::Zero(M, T);
    W.assign(T, 0.0);
    sum_h1.assign(T, 0.0);
    sum_h2.assign(T, 0.0);
    kappa_tilde.assign(T, 0.0);
    r_star.assign(T, 0.0);
    live.assign(T, false);
    for (int i = 0; i < spec.n_rungs(); ++i) {
      const double lambda = spec.lambda(i);
      if (lambda <= 0.0) continue;
      const Rung r = spec.arrivals.rung(i);
      const double z = spec.ladder[r.size];
      const HamiltonianPoint h = hamiltonian_eval(lambda, spec.curve(i), 0.0);
      const double s = r.side == Side::bid ? 1.0 : -1.0;
      d(r.bond) += z * h.H2;
      h11(r.bond, r.tier) += s * z * h.H1;
      h12(r.bond, r.tier) += s * z * h.H2;
      h22(r.bond, r.tier) += s * z * z * h.H2;
      z2h2(r.bond, r.tier) += z * z * h.H2;
      W[r.tier] += z * lambda;
      sum_h1[r.tier] += z * h.H1;
      sum_h2[r.tier] += z * h.H2;
    }
    Dcal = d.asDiagonal();
    for (int t : spec.targets.targeted) {
      const double kappa = spec.targets.kappa[t];
      if (kappa <= 0.0) continue;
      live[t] = true;
      r_star[t] = spec.targets.r_star[t];
      kappa_tilde[t] = 1.0 / (1.0 / kappa + sum_h2[t] / W[t]);
      Dcal -= kappa_tilde[t] / W[t] * h12.col(t) * h12.col(t).transpose();
    }
  }

  double y(int t, const Matrix& A) const {
    double acc = r_star[t] + sum_h1[t] / W[t];
    for (int m = 0; m < A.rows(); ++m) acc += z2h2(m, t) * A(m, m) / (2.0 * W[t]);
    return acc;
  }

  Vector Y(const Matrix& A) const {
    Vector v = Vector::Zero(A.rows());
    for (int m = 0; m < A.rows(); ++m)
      for (int t = 0; t < static_cast<int>(W.size()); ++t) {
        v(m) -= h11(m, t) + 0.5 * A(m, m) * h22(m, t);
        if (live[t]) v(m) += kappa_tilde[t] * y(t, A) * h12(m, t);
      }
    return A * v;
  }
};

// Fixed point of the exact first-order condition, by bisection on the tier's rungs.
inline double xi_oracle(const MarketSpec& spec, int tau, const Matrix& A, const Vector& B, const Vector& q) {
  const Moments mom(spec);
  const double kappa = spec.targets.kappa[tau];
  const double r_star = spec.targets.r_star[tau];
  auto foc = [&](double xi) {
    double acc = 0.0;
    for (int i = 0; i < spec.n_rungs(); ++i) {
      const Rung r = spec.arrivals.rung(i);
      if (spec.lambda(i) <= 0.0 || r.tier != tau) continue;
      const double s = r.side == Side::bid ? 1.0 : -1.0;
      const double z = spec.ladder[r.size];
      const double p = s * ((A * q)(r.bond) + B(r.bond)) + 0.5 * z * A(r.bond, r.bond);
      acc += z * hamiltonian_eval(spec.lambda(i), spec.curve(i), p - xi).H1;
    }
    return xi / kappa - r_star - acc / mom.W[tau];
  };
  return oracle::bisect(foc, -kappa, kappa, 1e-13);
}

}  // namespace oracle
