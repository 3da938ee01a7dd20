#pragma once

#include "hrmm/market_model.hpp"

#include <vector>

namespace hrmm {

/// Lattice {-q_max, ..., q_max}^M in steps of `unit`, flattened with bond 0 fastest.
class InventoryGrid {
 public:
  InventoryGrid() = default;
  InventoryGrid(int n_bonds, double unit, double q_max);

  int n_bonds() const noexcept { return n_bonds_; }
  double unit() const noexcept { return unit_; }
  double q_max() const noexcept { return q_max_; }
  int half_width() const noexcept { return half_; }
  int per_bond() const noexcept { return 2 * half_ + 1; }
  int size() const noexcept { return size_; }
  int stride(int m) const noexcept { return strides_[static_cast<std::size_t>(m)]; }

  /// Coordinate of `state` along bond m, in units, in [-half_width, half_width].
  int coord(int state, int m) const noexcept { return (state / stride(m)) % per_bond() - half_; }
  double inventory(int state, int m) const noexcept { return coord(state, m) * unit_; }
  Vector inventory(int state) const;
  /// State index for integer coordinates; -1 if off the lattice.
  int index(const std::vector<int>& coords) const;
  /// State index nearest to an inventory vector; throws if it is off the lattice or not a lattice point.
  int locate(const Vector& q) const;
  int origin() const noexcept { return origin_; }
  /// Neighbor `steps` units along bond m, or -1 if it leaves the lattice.
  int shift(int state, int m, int steps) const noexcept {
    const int c = coord(state, m) + steps;
    return (c < -half_ || c > half_) ? -1 : state + steps * stride(m);
  }
  /// Mirror image q -> -q.
  int mirror(int state) const noexcept { return size_ - 1 - state; }

 private:
  int n_bonds_ = 0;
  double unit_ = 1.0;
  double q_max_ = 0.0;
  int half_ = 0;
  int size_ = 0;
  int origin_ = 0;
  std::vector<int> strides_;
};

/// Where a fill on a rung moves the inventory.
struct RungGeometry {
  int bond = 0;
  int tier = 0;
  int sign = 1;   // +1 bid (inventory grows), -1 ask
  int steps = 0;  // lattice steps of the ladder size
  double z = 0.0;
  bool has_flow = false;
};

std::vector<RungGeometry> rung_geometry(const MarketSpec& spec, const InventoryGrid& grid);

/// Post-fill state, or -1 when the fill would leave the lattice (the rung is inactive there).
inline int fill_destination(const InventoryGrid& grid, const RungGeometry& r, int state) noexcept {
  return grid.shift(state, r.bond, r.sign * r.steps);
}

/// gcd of the ladder sizes when they are all integers (in millions); ConfigError otherwise.
double default_unit(const SizeLadder& ladder);

/// Lattice of a market from its lattice bounds.
InventoryGrid make_grid(const MarketSpec& spec);

/// Lattice steps of every ladder size; ConfigError when a size is not a multiple of the unit.
std::vector<int> ladder_steps(const SizeLadder& ladder, double unit);

}  // namespace hrmm
