#pragma once

#include "hrmm/inventory_grid.hpp"

#include <string>
#include <string_view>

namespace hrmm {

enum class QuoteMode {
  exact,              // exact HJB value function and dual
  begv_xi_q,          // quadratic value, exact quote map, fixed-point dual xi(q)
  begv_xi_quadratic,  // quadratic value, exact quote map, xi0 + q'Bq/2
  begv_xi_const,      // quadratic value, exact quote map, constant dual
  linearized,         // linearized quote map around p = 0
};

const char* mode_name(QuoteMode mode) noexcept;
QuoteMode parse_mode(std::string_view name);

/// Quotes for every lattice state and rung. Offsets are NaN on rungs without flow and on
/// rungs whose fill would leave the lattice at that state.
struct QuotePolicy {
  QuoteMode mode = QuoteMode::exact;
  double t = 0.0;
  InventoryGrid grid;
  Matrix offsets;  // states x rungs, bp
  Matrix xi;       // states x tiers, zero for tiers without a live target
  // Linearized mode only: offsets == riskless + inventory_correction - hitratio_correction.
  Matrix riskless;
  Matrix inventory_correction;
  Matrix hitratio_correction;

  bool has_decomposition() const noexcept { return riskless.size() > 0; }
};

}  // namespace hrmm
