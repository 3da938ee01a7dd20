#include "hrmm/quotes.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace hrmm {

namespace {
constexpr const char* kModule = "quotes";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ModeName {
  QuoteMode mode;
  const char* name;
  const char* alias;
};

constexpr ModeName kModes[] = {
    {QuoteMode::exact, "exact", "exact"},
    {QuoteMode::begv_xi_q, "begv_exact_map_xi_q", "begv_xi_q"},
    {QuoteMode::begv_xi_quadratic, "begv_exact_map_xi_quadratic", "begv_xi_quadratic"},
    {QuoteMode::begv_xi_const, "begv_exact_map_xi_const", "begv_xi_const"},
    {QuoteMode::linearized, "linearized", "linearized"},
};

// NaN on rungs without flow and where the fill leaves the lattice.
Matrix lattice_mask(const MarketSpec& spec, const InventoryGrid& grid, Matrix offsets) {
  const auto geometry = rung_geometry(spec, grid);
  for (int s = 0; s < grid.size(); ++s) {
    for (int r = 0; r < spec.n_rungs(); ++r) {
      const auto& g = geometry[static_cast<std::size_t>(r)];
      if (!g.has_flow || fill_destination(grid, g, s) < 0) offsets(s, r) = kNaN;
    }
  }
  return offsets;
}
}  // namespace

const char* mode_name(QuoteMode mode) noexcept {
  for (const auto& m : kModes)
    if (m.mode == mode) return m.name;
  return "unknown";
}

QuoteMode parse_mode(std::string_view name) {
  for (const auto& m : kModes)
    if (name == m.name || name == m.alias) return m.mode;
  throw ConfigError("cli", "unknown quote mode", std::string(name));
}

std::string format_fixed(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9f", x);
  if (std::string_view(buf) == "-0.000000000") return "0.000000000";
  return buf;
}

Vector quote_from_value(const Vector& p, const HamiltonianBook& book) {
  Vector out(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const int r = static_cast<int>(i);
    out(i) = (std::isnan(p(i)) || !book.active(r)) ? kNaN : control_map(book.table(r), p(i));
  }
  return out;
}

Vector apply_dual_shift(const MarketSpec& spec, const Vector& p, const Vector& xi) {
  Vector out = p;
  for (int i = 0; i < spec.n_rungs(); ++i) {
    const int tau = spec.arrivals.rung(i).tier;
    if (spec.targets.is_active(tau)) out(i) -= xi(tau);
  }
  return out;
}

Vector begv_dual(QuoteMode mode, const MarketSpec& spec, const HamiltonianBook& book, const QuadraticValue& value,
                 const QuadraticFrame& frame, const Vector& q, const LocalQuadraticXi* local, const Vector* warm) {
  switch (mode) {
    case QuoteMode::begv_xi_q: return xi_fixed_point(spec, book, frame, q, warm);
    case QuoteMode::begv_xi_const:
    case QuoteMode::linearized: return value.xi(frame, q);
    case QuoteMode::begv_xi_quadratic: {
      if (!local) throw ConfigError(kModule, "local quadratic closure missing");
      Vector xi(spec.n_tiers());
      for (int tau = 0; tau < spec.n_tiers(); ++tau) xi(tau) = local->value(tau, q);
      return xi;
    }
    case QuoteMode::exact: break;
  }
  throw ConfigError(kModule, "exact quotes come from the HJB solver, not the quadratic approximation");
}

QuotePolicy begv_policy(QuoteMode mode, const MarketSpec& spec, const HamiltonianBook& book,
                        const QuadraticValue& value, const QuadraticFrame& frame, const InventoryGrid& grid, double t) {
  if (mode == QuoteMode::linearized) return linearized_policy(spec, book, value, frame, grid, t);
  std::optional<LocalQuadraticXi> local;
  if (mode == QuoteMode::begv_xi_quadratic) local = xi_local_quadratic(spec, book, frame.A);

  QuotePolicy policy;
  policy.mode = mode;
  policy.t = t;
  policy.grid = grid;
  policy.offsets.resize(grid.size(), spec.n_rungs());
  policy.xi.resize(grid.size(), spec.n_tiers());
  Vector warm = Vector::Zero(spec.n_tiers());
  for (int s = 0; s < grid.size(); ++s) {
    const Vector q = grid.inventory(s);
    const Vector xi = begv_dual(mode, spec, book, value, frame, q, local ? &*local : nullptr, &warm);
    warm = xi;
    const Vector p = apply_dual_shift(spec, quadratic_marginal_costs(spec, frame, q), xi);
    policy.offsets.row(s) = quote_from_value(p, book).transpose();
    policy.xi.row(s) = xi.transpose();
  }
  policy.offsets = lattice_mask(spec, grid, std::move(policy.offsets));
  return policy;
}

LinearizedQuote quote_linearized(const MarketSpec& spec, const HamiltonianBook& book, const QuadraticFrame& frame,
                                 const Vector& xi, const Vector& q) {
  const int n = spec.n_rungs();
  LinearizedQuote out;
  out.offset = Vector::Constant(n, kNaN);
  out.riskless = Vector::Constant(n, kNaN);
  out.inventory_correction = Vector::Constant(n, kNaN);
  out.hitratio_correction = Vector::Constant(n, kNaN);
  const Vector p = quadratic_marginal_costs(spec, frame, q);
  for (int i = 0; i < n; ++i) {
    if (!book.active(i)) continue;
    const auto& k = book.constants(i);
    const int tau = spec.arrivals.rung(i).tier;
    out.riskless(i) = k.delta0;
    out.inventory_correction(i) = p(i) / k.c;
    out.hitratio_correction(i) = spec.targets.is_active(tau) ? xi(tau) / k.c : 0.0;
    out.offset(i) = out.riskless(i) + out.inventory_correction(i) - out.hitratio_correction(i);
  }
  return out;
}

QuotePolicy linearized_policy(const MarketSpec& spec, const HamiltonianBook& book, const QuadraticValue& value,
                              const QuadraticFrame& frame, const InventoryGrid& grid, double t) {
  QuotePolicy policy;
  policy.mode = QuoteMode::linearized;
  policy.t = t;
  policy.grid = grid;
  const int S = grid.size();
  const int R = spec.n_rungs();
  policy.offsets.resize(S, R);
  policy.riskless.resize(S, R);
  policy.inventory_correction.resize(S, R);
  policy.hitratio_correction.resize(S, R);
  policy.xi.resize(S, spec.n_tiers());
  for (int s = 0; s < S; ++s) {
    const Vector q = grid.inventory(s);
    const Vector xi = value.xi(frame, q);
    const LinearizedQuote lq = quote_linearized(spec, book, frame, xi, q);
    policy.offsets.row(s) = lq.offset.transpose();
    policy.riskless.row(s) = lq.riskless.transpose();
    policy.inventory_correction.row(s) = lq.inventory_correction.transpose();
    policy.hitratio_correction.row(s) = lq.hitratio_correction.transpose();
    policy.xi.row(s) = xi.transpose();
  }
  policy.offsets = lattice_mask(spec, grid, std::move(policy.offsets));
  return policy;
}

double state_hit_ratio(const QuotePolicy& policy, const MarketSpec& spec, int state, int tau) {
  const double W = notional_scale(spec, tau);
  double filled = 0.0;
  for (int i = 0; i < spec.n_rungs(); ++i) {
    if (spec.arrivals.rung(i).tier != tau || spec.lambda(i) <= 0.0) continue;
    const double delta = policy.offsets(state, i);
    if (std::isnan(delta)) continue;
    filled += spec.size_of(i) * fill_intensity(spec.lambda(i), spec.curve(i), delta);
  }
  return filled / W;
}

std::vector<int> states_in_range(const InventoryGrid& grid, double q_lo, double q_hi) {
  std::vector<int> out;
  for (int s = 0; s < grid.size(); ++s) {
    bool inside = true;
    for (int m = 0; m < grid.n_bonds(); ++m) {
      const double q = grid.inventory(s, m);
      inside = inside && q >= q_lo - 1e-12 && q <= q_hi + 1e-12;
    }
    if (inside) out.push_back(s);
  }
  return out;
}

void write_policy_table(std::ostream& os, const QuotePolicy& policy, const MarketSpec& spec,
                        const std::vector<int>& states) {
  const auto& grid = policy.grid;
  const bool decomposed = policy.has_decomposition();
  os << "mode,t";
  for (int m = 0; m < grid.n_bonds(); ++m) os << ",q_" << spec.bonds[static_cast<std::size_t>(m)];
  os << ",bond,tier,side,size,offset_bp,fill_prob,xi,hit_ratio";
  if (decomposed) os << ",riskless,inventory_correction,hitratio_correction";
  os << '\n';
  std::vector<double> ratio(static_cast<std::size_t>(spec.n_tiers()));
  for (int s : states) {
    if (s < 0 || s >= grid.size()) throw ConfigError(kModule, "state outside the policy lattice");
    for (int tau = 0; tau < spec.n_tiers(); ++tau) ratio[static_cast<std::size_t>(tau)] = state_hit_ratio(policy, spec, s, tau);
    for (int i = 0; i < spec.n_rungs(); ++i) {
      if (spec.lambda(i) <= 0.0) continue;
      const Rung r = spec.arrivals.rung(i);
      const double delta = policy.offsets(s, i);
      os << mode_name(policy.mode) << ',' << format_fixed(policy.t);
      for (int m = 0; m < grid.n_bonds(); ++m) os << ',' << format_fixed(grid.inventory(s, m));
      os << ',' << spec.bonds[static_cast<std::size_t>(r.bond)] << ',' << spec.tiers[static_cast<std::size_t>(r.tier)] << ','
         << side_name(r.side) << ',' << format_fixed(spec.ladder[r.size]) << ',' << format_fixed(delta) << ','
         << format_fixed(std::isnan(delta) ? kNaN : fill_probability(spec.curve(i), delta)) << ','
         << format_fixed(policy.xi(s, r.tier)) << ',' << format_fixed(ratio[static_cast<std::size_t>(r.tier)]);
      if (decomposed) {
        os << ',' << format_fixed(policy.riskless(s, i)) << ',' << format_fixed(policy.inventory_correction(s, i)) << ','
           << format_fixed(policy.hitratio_correction(s, i));
      }
      os << '\n';
    }
  }
}

}  // namespace hrmm
