#pragma once

#include "hrmm/dual.hpp"
#include "hrmm/hamiltonian.hpp"
#include "hrmm/inventory_grid.hpp"
#include "hrmm/policy.hpp"

#include <optional>
#include <vector>

namespace hrmm {

/// Exact reduced value function on the lattice at the stored time nodes.
struct ValueGrid {
  InventoryGrid grid;
  double dt = 0.0;
  std::vector<double> t;   // ascending; front() == 0, back() == T
  std::vector<Vector> u;   // u(t, q), one entry per lattice state
  std::vector<Matrix> xi;  // states x tiers; zero columns for tiers without a live target

  /// Index of the stored node at time `time` (within dt / 2); ConfigError otherwise.
  int node_index(double time) const;
};

/// (u(q) - u(q +/- z e_m)) / z, top sign for bids; nullopt when the fill leaves the lattice.
std::optional<double> reduced_increment(const Vector& u, const InventoryGrid& grid, int state, const RungGeometry& rung);

/// Explicit-Euler operator of the dualized reduced HJB on a lattice.
///
/// F(u)(q) = -(phi/2) q'Sigma q + sum_{untargeted} z H(du)
///           + sum_{targeted} min_xi [ W (-xi r* + xi^2/(2 kappa)) + sum z H(du - xi) ],
/// where rungs whose fill leaves the lattice are dropped from every sum.
class HjbOperator {
 public:
  HjbOperator(const MarketSpec& spec, const HamiltonianBook& book, const InventoryGrid& grid);

  const InventoryGrid& grid() const noexcept { return grid_; }
  /// Sum of all intensities; bounds the outflow rate of every state.
  double outflow_bound() const noexcept { return outflow_bound_; }
  Vector terminal_condition() const;

  /// F(u) at every state. `xi` (states x tiers) carries warm starts in and optimal duals out.
  void apply(const Vector& u, Vector& generator, Matrix& xi) const;
  /// u + dt F(u).
  Vector step(const Vector& u_next, double dt, Matrix& xi) const;

 private:
  struct TierRungs {
    int tier = 0;
    bool live = false;  // targeted with kappa > 0
    double r_star = 0.0;
    double kappa = 0.0;
    double W = 0.0;
    std::vector<int> rungs;
  };

  const MarketSpec* spec_;
  const HamiltonianBook* book_;
  InventoryGrid grid_;
  std::vector<RungGeometry> geometry_;
  std::vector<TierRungs> tiers_;
  Vector penalty_;  // (phi/2) q'Sigma q per state
  double outflow_bound_ = 0.0;
};

/// Backward step u_prev = u_next + dt F(u_next); xi gets the duals of u_next.
Vector hjb_step(const Vector& u_next, const MarketSpec& spec, const HamiltonianBook& book, const InventoryGrid& grid,
                double dt, Matrix& xi);

struct HjbOptions {
  double dt = 0.0;       // 0 selects min(1e-4, 0.1 / outflow bound)
  int store_stride = 0;  // 0 stores every node for M = 1 and every 100th for M = 2
};

double default_time_step(const MarketSpec& spec);

/// Backward sweep from T to 0. Throws RangeError if the tables are too narrow.
ValueGrid solve(const MarketSpec& spec, const HamiltonianBook& book, const InventoryGrid& grid, HjbOptions options = {});

struct ExactSolution {
  HamiltonianBook book;
  ValueGrid value;
};

/// solve() that doubles the table span and restarts whenever a marginal cost leaves the tables.
ExactSolution solve_exact(const MarketSpec& spec, const InventoryGrid& grid, HjbOptions options = {},
                          TableGrid tables = {});

/// Exact optimal quotes at a stored node: delta = delta~(du - xi) on targeted tiers, delta~(du) elsewhere.
QuotePolicy extract_policy(const ValueGrid& value, const MarketSpec& spec, const HamiltonianBook& book, int node);

}  // namespace hrmm
