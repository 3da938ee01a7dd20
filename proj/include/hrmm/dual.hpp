#pragma once

#include "hrmm/hamiltonian.hpp"

#include <span>

namespace hrmm {

/// One rung's contribution to a targeted tier's dual problem: z_k H(p - xi).
struct DualTerm {
  const HamiltonianTable* table = nullptr;
  double z = 0.0;
  double p = 0.0;  // marginal cost before the dual shift
};

struct DualSolution {
  double xi = 0.0;
  double residual = 0.0;  // |xi - kappa (r* + (1/W) sum z H'(p - xi))|
  int iterations = 0;
};

/// Minimizer over xi of  -xi r* + xi^2 / (2 kappa) + (1/W) sum z H(p - xi).
///
/// The objective is strictly convex, and its derivative changes sign on
/// [-kappa (1 - r*), kappa r*]; that bracket is intersected with the xi values keeping
/// every p - xi inside the tables. A root outside the tables throws RangeError.
/// kappa = 0 returns xi = 0.
DualSolution dual_inner_solve(std::span<const DualTerm> terms, double r_star, double kappa, double W,
                              double warm_start = 0.0);

/// W times the minimized bracket:  W (-xi r* + xi^2 / (2 kappa)) + sum z H(p - xi).
double dual_value(std::span<const DualTerm> terms, double r_star, double kappa, double W, double xi);

}  // namespace hrmm
