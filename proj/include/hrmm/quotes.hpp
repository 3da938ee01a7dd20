#pragma once

#include "hrmm/begv.hpp"
#include "hrmm/hamiltonian.hpp"
#include "hrmm/policy.hpp"

#include <iosfwd>
#include <vector>

namespace hrmm {

/// Exact control map per rung; NaN marginal costs give NaN offsets.
Vector quote_from_value(const Vector& p, const HamiltonianBook& book);

/// p - xi_tau on rungs of live tiers, p elsewhere.
Vector apply_dual_shift(const MarketSpec& spec, const Vector& p, const Vector& xi);

/// Dual variable per tier at q for one of the BEGV modes. `local` is required for
/// begv_xi_quadratic; `warm` seeds the fixed point of begv_xi_q.
Vector begv_dual(QuoteMode mode, const MarketSpec& spec, const HamiltonianBook& book, const QuadraticValue& value,
                 const QuadraticFrame& frame, const Vector& q, const LocalQuadraticXi* local = nullptr,
                 const Vector* warm = nullptr);

/// Quote surface of a BEGV mode on the lattice: quadratic value function, exact quote map.
QuotePolicy begv_policy(QuoteMode mode, const MarketSpec& spec, const HamiltonianBook& book,
                        const QuadraticValue& value, const QuadraticFrame& frame, const InventoryGrid& grid,
                        double t = 0.0);

/// delta = delta0 + inventory - hitratio, per rung.
struct LinearizedQuote {
  Vector offset;
  Vector riskless;
  Vector inventory_correction;  // (e_m'A(+-q + z e_m / 2) +- B_m) / c
  Vector hitratio_correction;   // xi_tau / c on live tiers, zero elsewhere
};

LinearizedQuote quote_linearized(const MarketSpec& spec, const HamiltonianBook& book, const QuadraticFrame& frame,
                                 const Vector& xi, const Vector& q);

/// Linearized quote surface with xi from the quadratic-expansion closure.
QuotePolicy linearized_policy(const MarketSpec& spec, const HamiltonianBook& book, const QuadraticValue& value,
                              const QuadraticFrame& frame, const InventoryGrid& grid, double t = 0.0);

/// Size-weighted hit ratio of tier tau at a lattice state; rungs whose fill would leave
/// the lattice are not filled.
double state_hit_ratio(const QuotePolicy& policy, const MarketSpec& spec, int state, int tau);

/// States with every coordinate inside [q_lo, q_hi].
std::vector<int> states_in_range(const InventoryGrid& grid, double q_lo, double q_hi);

/// One row per state and rung with flow: offsets, fill probabilities, per-tier hit ratio,
/// and the decomposition columns in linearized mode. Floats use 9 decimals.
void write_policy_table(std::ostream& os, const QuotePolicy& policy, const MarketSpec& spec,
                        const std::vector<int>& states);

/// Fixed 9-decimal formatting shared by every CSV writer; NaN prints as "nan".
std::string format_fixed(double x);

}  // namespace hrmm
