#include "hrmm/hjb_exact.hpp"

#include "hrmm/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hrmm {

namespace {
constexpr const char* kModule = "hjb_exact";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}  // namespace

int ValueGrid::node_index(double time) const {
  const auto it = std::lower_bound(t.begin(), t.end(), time - 0.5 * dt);
  if (it == t.end() || std::abs(*it - time) > 0.5 * dt) {
    std::ostringstream os;
    os << "t=" << time;
    throw ConfigError(kModule, "time is not a stored node of the value grid", os.str());
  }
  return static_cast<int>(it - t.begin());
}

std::optional<double> reduced_increment(const Vector& u, const InventoryGrid& grid, int state, const RungGeometry& rung) {
  const int dest = fill_destination(grid, rung, state);
  if (dest < 0) return std::nullopt;
  return (u(state) - u(dest)) / rung.z;
}

HjbOperator::HjbOperator(const MarketSpec& spec, const HamiltonianBook& book, const InventoryGrid& grid)
    : spec_(&spec), book_(&book), grid_(grid), geometry_(rung_geometry(spec, grid)) {
  const int T = spec.n_tiers();
  tiers_.resize(static_cast<std::size_t>(T));
  for (int tau = 0; tau < T; ++tau) {
    auto& tr = tiers_[static_cast<std::size_t>(tau)];
    tr.tier = tau;
    tr.live = spec.targets.is_active(tau);
    tr.r_star = spec.targets.r_star[static_cast<std::size_t>(tau)];
    tr.kappa = spec.targets.kappa[static_cast<std::size_t>(tau)];
    tr.W = notional_scale(spec, tau);
  }
  for (int i = 0; i < spec.n_rungs(); ++i) {
    const auto& g = geometry_[static_cast<std::size_t>(i)];
    if (!g.has_flow) continue;
    tiers_[static_cast<std::size_t>(g.tier)].rungs.push_back(i);
    outflow_bound_ += spec.lambda(i);
  }
  penalty_.resize(grid_.size());
  const Matrix& sigma = spec.risk.sigma_cov;
  for (int s = 0; s < grid_.size(); ++s) {
    const Vector q = grid_.inventory(s);
    penalty_(s) = 0.5 * spec.risk.phi * q.dot(sigma * q);
  }
}

Vector HjbOperator::terminal_condition() const {
  Vector u(grid_.size());
  const Matrix& sigma = spec_->risk.sigma_cov;
  for (int s = 0; s < grid_.size(); ++s) {
    const Vector q = grid_.inventory(s);
    u(s) = -0.5 * spec_->risk.eta * q.dot(sigma * q);
  }
  return u;
}

void HjbOperator::apply(const Vector& u, Vector& generator, Matrix& xi) const {
  const int n = grid_.size();
  const int T = static_cast<int>(tiers_.size());
  generator.resize(n);
  if (xi.rows() != n || xi.cols() != T) xi = Matrix::Zero(n, T);

  std::vector<const HamiltonianTable*> tables(geometry_.size(), nullptr);
  std::size_t widest = 0;
  for (const auto& tr : tiers_) {
    widest = std::max(widest, tr.rungs.size());
    for (int r : tr.rungs) tables[static_cast<std::size_t>(r)] = &book_->table(r);
  }

  parallel_for(n, [&](int begin, int end) {
    std::vector<DualTerm> terms;
    terms.reserve(widest);
    for (int s = begin; s < end; ++s) {
      double acc = -penalty_(s);
      for (const auto& tr : tiers_) {
        terms.clear();
        for (int r : tr.rungs) {
          const auto& g = geometry_[static_cast<std::size_t>(r)];
          const int dest = fill_destination(grid_, g, s);
          if (dest < 0) continue;
          terms.push_back({tables[static_cast<std::size_t>(r)], g.z, (u(s) - u(dest)) / g.z});
        }
        if (tr.live) {
          const DualSolution sol = dual_inner_solve(terms, tr.r_star, tr.kappa, tr.W, xi(s, tr.tier));
          xi(s, tr.tier) = sol.xi;
          acc += dual_value(terms, tr.r_star, tr.kappa, tr.W, sol.xi);
        } else {
          for (const auto& t : terms) acc += t.z * t.table->H(t.p);
        }
      }
      generator(s) = acc;
    }
  });
}

Vector HjbOperator::step(const Vector& u_next, double dt, Matrix& xi) const {
  Vector gen;
  apply(u_next, gen, xi);
  Vector u_prev = u_next + dt * gen;
  if (!u_prev.allFinite()) {
    for (int s = 0; s < u_prev.size(); ++s) {
      if (!std::isfinite(u_prev(s))) {
        std::ostringstream os;
        os << "state " << s << " q=" << grid_.inventory(s).transpose();
        throw NumericalError(kModule, "non-finite value function", os.str());
      }
    }
  }
  return u_prev;
}

Vector hjb_step(const Vector& u_next, const MarketSpec& spec, const HamiltonianBook& book, const InventoryGrid& grid,
                double dt, Matrix& xi) {
  return HjbOperator(spec, book, grid).step(u_next, dt, xi);
}

double default_time_step(const MarketSpec& spec) {
  double total = 0.0;
  for (double lam : spec.arrivals.lambda) total += lam;
  return total > 0.0 ? std::min(1e-4, 0.1 / total) : 1e-4;
}

ValueGrid solve(const MarketSpec& spec, const HamiltonianBook& book, const InventoryGrid& grid, HjbOptions options) {
  const HjbOperator op(spec, book, grid);
  const double horizon = spec.risk.horizon;
  const double requested = options.dt > 0.0 ? options.dt : default_time_step(spec);
  const int steps = std::max(1, static_cast<int>(std::ceil(horizon / requested - 1e-9)));
  const double dt = horizon / steps;
  if (dt * op.outflow_bound() > 1.0) {
    std::ostringstream os;
    os << "dt=" << dt << " outflow bound=" << op.outflow_bound();
    throw NumericalError(kModule, "time step violates the explicit Euler stability bound; reduce dt", os.str());
  }
  const int stride = options.store_stride > 0 ? options.store_stride : (grid.n_bonds() == 1 ? 1 : 100);

  ValueGrid out;
  out.grid = grid;
  out.dt = dt;
  std::vector<int> nodes;
  Vector u = op.terminal_condition();
  Matrix xi = Matrix::Zero(grid.size(), spec.n_tiers());
  Vector gen;
  auto store = [&](int n) {
    nodes.push_back(n);
    out.u.push_back(u);
    out.xi.push_back(xi);
  };
  for (int n = steps; n >= 1; --n) {
    op.apply(u, gen, xi);
    if (n == steps || n % stride == 0) store(n);
    u += dt * gen;
    if (!u.allFinite()) {
      std::ostringstream os;
      os << "t=" << (n - 1) * dt;
      throw NumericalError(kModule, "non-finite value function; reduce dt", os.str());
    }
  }
  op.apply(u, gen, xi);
  store(0);

  std::reverse(nodes.begin(), nodes.end());
  std::reverse(out.u.begin(), out.u.end());
  std::reverse(out.xi.begin(), out.xi.end());
  out.t.reserve(nodes.size());
  for (int n : nodes) out.t.push_back(n * dt);
  out.t.back() = horizon;
  return out;
}

ExactSolution solve_exact(const MarketSpec& spec, const InventoryGrid& grid, HjbOptions options, TableGrid tables) {
  for (int attempt = 0;; ++attempt) {
    HamiltonianBook book(spec, tables);
    try {
      ValueGrid value = solve(spec, book, grid, options);
      return {std::move(book), std::move(value)};
    } catch (const RangeError&) {
      if (attempt >= 3) throw;
      tables.p_min *= 2.0;
      tables.p_max *= 2.0;
      tables.n_nodes = 2 * tables.n_nodes - 1;
    }
  }
}

QuotePolicy extract_policy(const ValueGrid& value, const MarketSpec& spec, const HamiltonianBook& book, int node) {
  if (node < 0 || node >= static_cast<int>(value.t.size())) throw ConfigError(kModule, "node index out of range");
  const auto& grid = value.grid;
  const auto geometry = rung_geometry(spec, grid);
  const Vector& u = value.u[static_cast<std::size_t>(node)];
  const Matrix& xi = value.xi[static_cast<std::size_t>(node)];

  QuotePolicy policy;
  policy.mode = QuoteMode::exact;
  policy.t = value.t[static_cast<std::size_t>(node)];
  policy.grid = grid;
  policy.offsets = Matrix::Constant(grid.size(), spec.n_rungs(), kNaN);
  policy.xi = xi;
  for (int s = 0; s < grid.size(); ++s) {
    for (int r = 0; r < spec.n_rungs(); ++r) {
      const auto& g = geometry[static_cast<std::size_t>(r)];
      if (!g.has_flow) continue;
      const auto du = reduced_increment(u, grid, s, g);
      if (!du) continue;
      const double shift = spec.targets.is_active(g.tier) ? xi(s, g.tier) : 0.0;
      policy.offsets(s, r) = control_map(book.table(r), *du - shift);
    }
  }
  return policy;
}

}  // namespace hrmm
