#include "hrmm/inventory_grid.hpp"

#include <cmath>
#include <numeric>

namespace hrmm {

namespace {
constexpr const char* kModule = "hjb_exact";

int as_steps(double value, double unit, const char* what) {
  const double r = value / unit;
  const double n = std::round(r);
  if (std::abs(r - n) > 1e-9 * std::max(1.0, std::abs(r))) {
    throw ConfigError(kModule, std::string(what) + " is not an integer multiple of the grid unit");
  }
  return static_cast<int>(n);
}
}  // namespace

InventoryGrid::InventoryGrid(int n_bonds, double unit, double q_max) : n_bonds_(n_bonds), unit_(unit), q_max_(q_max) {
  if (n_bonds < 1) throw ConfigError(kModule, "grid needs at least one bond");
  if (n_bonds > 2) throw ConfigError(kModule, "exact lattice solves are limited to M <= 2");
  if (!(unit > 0.0)) throw ConfigError(kModule, "grid unit must be positive");
  if (!(q_max > 0.0)) throw ConfigError(kModule, "q_max must be positive");
  half_ = as_steps(q_max, unit, "q_max");
  strides_.resize(static_cast<std::size_t>(n_bonds));
  int stride = 1;
  for (int m = 0; m < n_bonds; ++m) {
    strides_[static_cast<std::size_t>(m)] = stride;
    stride *= per_bond();
  }
  size_ = stride;
  origin_ = index(std::vector<int>(static_cast<std::size_t>(n_bonds), 0));
}

Vector InventoryGrid::inventory(int state) const {
  Vector q(n_bonds_);
  for (int m = 0; m < n_bonds_; ++m) q(m) = inventory(state, m);
  return q;
}

int InventoryGrid::index(const std::vector<int>& coords) const {
  int state = 0;
  for (int m = 0; m < n_bonds_; ++m) {
    const int c = coords[static_cast<std::size_t>(m)];
    if (c < -half_ || c > half_) return -1;
    state += (c + half_) * stride(m);
  }
  return state;
}

int InventoryGrid::locate(const Vector& q) const {
  if (q.size() != n_bonds_) throw ConfigError(kModule, "inventory vector has the wrong dimension");
  std::vector<int> coords(static_cast<std::size_t>(n_bonds_));
  for (int m = 0; m < n_bonds_; ++m) coords[static_cast<std::size_t>(m)] = as_steps(q(m), unit_, "inventory");
  const int s = index(coords);
  if (s < 0) throw ConfigError(kModule, "inventory outside the lattice");
  return s;
}

double default_unit(const SizeLadder& ladder) {
  long long g = 0;
  for (double z : ladder.sizes) {
    const double r = std::round(z);
    if (std::abs(z - r) > 1e-12 || r <= 0) {
      throw ConfigError(kModule, "non-integer ladder sizes need an explicit grid unit");
    }
    g = std::gcd(g, static_cast<long long>(r));
  }
  if (g == 0) throw ConfigError(kModule, "empty ladder");
  return static_cast<double>(g);
}

InventoryGrid make_grid(const MarketSpec& spec) {
  const double unit = spec.lattice.unit > 0.0 ? spec.lattice.unit : default_unit(spec.ladder);
  return InventoryGrid(spec.n_bonds(), unit, spec.lattice.q_max);
}

std::vector<int> ladder_steps(const SizeLadder& ladder, double unit) {
  std::vector<int> steps;
  steps.reserve(ladder.sizes.size());
  for (double z : ladder.sizes) steps.push_back(as_steps(z, unit, "ladder size"));
  return steps;
}

std::vector<RungGeometry> rung_geometry(const MarketSpec& spec, const InventoryGrid& grid) {
  if (grid.n_bonds() != spec.n_bonds()) throw ConfigError(kModule, "grid and market have different numbers of bonds");
  const auto steps = ladder_steps(spec.ladder, grid.unit());
  std::vector<RungGeometry> out(static_cast<std::size_t>(spec.n_rungs()));
  for (int i = 0; i < spec.n_rungs(); ++i) {
    const Rung r = spec.arrivals.rung(i);
    auto& g = out[static_cast<std::size_t>(i)];
    g.bond = r.bond;
    g.tier = r.tier;
    g.sign = side_sign(r.side);
    g.steps = steps[static_cast<std::size_t>(r.size)];
    g.z = spec.ladder[r.size];
    g.has_flow = spec.lambda(i) > 0.0;
  }
  return out;
}

}  // namespace hrmm
