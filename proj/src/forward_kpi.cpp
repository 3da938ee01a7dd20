#include "hrmm/forward_kpi.hpp"

#include "hrmm/begv.hpp"
#include "hrmm/hjb_exact.hpp"
#include "hrmm/parallel.hpp"
#include "hrmm/quotes.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

namespace hrmm {

namespace {
constexpr const char* kModule = "forward_kpi";
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Incoming transitions in compressed rows, plus the total outflow of every state.
struct GatherGenerator {
  std::vector<int> offset;
  std::vector<int> source;
  std::vector<double> rate;
  Vector outflow;
};

GatherGenerator build_gather(const QuotePolicy& policy, const MarketSpec& spec) {
  const int n = policy.grid.size();
  std::vector<std::vector<Transition>> out(static_cast<std::size_t>(n));
  GatherGenerator g;
  g.outflow = Vector::Zero(n);
  std::vector<int> count(static_cast<std::size_t>(n) + 1, 0);
  for (int s = 0; s < n; ++s) {
    out[static_cast<std::size_t>(s)] = generator_rates(policy, spec, s);
    for (const auto& t : out[static_cast<std::size_t>(s)]) {
      g.outflow(s) += t.rate;
      ++count[static_cast<std::size_t>(t.dest) + 1];
    }
  }
  for (int s = 0; s < n; ++s) count[static_cast<std::size_t>(s) + 1] += count[static_cast<std::size_t>(s)];
  g.offset = count;
  g.source.resize(static_cast<std::size_t>(count.back()));
  g.rate.resize(static_cast<std::size_t>(count.back()));
  std::vector<int> fill(count.begin(), count.end() - 1);
  for (int s = 0; s < n; ++s) {
    for (const auto& t : out[static_cast<std::size_t>(s)]) {
      const auto slot = static_cast<std::size_t>(fill[static_cast<std::size_t>(t.dest)]++);
      g.source[slot] = s;
      g.rate[slot] = t.rate;
    }
  }
  return g;
}

// Size-weighted filled notional per unit time of tier tau at a state.
double filled_notional(const QuotePolicy& policy, const MarketSpec& spec, int state, int tau) {
  double acc = 0.0;
  for (int i = 0; i < spec.n_rungs(); ++i) {
    if (spec.lambda(i) <= 0.0 || spec.arrivals.rung(i).tier != tau) continue;
    const double delta = policy.offsets(state, i);
    if (std::isnan(delta)) continue;
    acc += spec.size_of(i) * fill_intensity(spec.lambda(i), spec.curve(i), delta);
  }
  return acc;
}

double tier_scale(const MarketSpec& spec, int tau) {
  const double W = notional_scale(spec, tau);
  if (!(W > 0.0)) throw ConfigError(kModule, "hit ratio undefined for a tier without arrivals", spec.tiers[static_cast<std::size_t>(tau)]);
  return W;
}

void check_lattice(const InventoryLaw& law, const QuotePolicy& policy) {
  if (law.grid.size() != policy.grid.size() || law.grid.n_bonds() != policy.grid.n_bonds()) {
    throw ConfigError(kModule, "law and policy live on different lattices");
  }
}
}  // namespace

std::vector<Transition> generator_rates(const QuotePolicy& policy, const MarketSpec& spec, int state) {
  const auto geometry = rung_geometry(spec, policy.grid);
  std::vector<Transition> out;
  for (int i = 0; i < spec.n_rungs(); ++i) {
    const auto& g = geometry[static_cast<std::size_t>(i)];
    if (!g.has_flow) continue;
    const int dest = fill_destination(policy.grid, g, state);
    if (dest < 0) continue;
    const double delta = policy.offsets(state, i);
    if (std::isnan(delta)) {
      throw NumericalError(kModule, "incomplete policy: missing quote on an active rung", "rung " + std::to_string(i));
    }
    const double rate = fill_intensity(spec.lambda(i), spec.curve(i), delta);
    auto it = std::find_if(out.begin(), out.end(), [dest](const Transition& t) { return t.dest == dest; });
    if (it == out.end()) {
      out.push_back({dest, rate});
    } else {
      it->rate += rate;
    }
  }
  return out;
}

InventoryLaw forward_propagate(const QuotePolicy& policy, const MarketSpec& spec, int q0, double horizon,
                               ForwardOptions options) {
  const auto& grid = policy.grid;
  const int n = grid.size();
  if (q0 < 0 || q0 >= n) throw ConfigError(kModule, "initial state outside the lattice");
  if (!(horizon > 0.0)) throw ConfigError(kModule, "horizon must be positive");
  const GatherGenerator gen = build_gather(policy, spec);
  const double max_out = gen.outflow.maxCoeff();

  const double requested = options.dt > 0.0 ? options.dt : (max_out > 0.0 ? std::min(1e-3, 0.1 / max_out) : 1e-3);
  const int steps = std::max(1, static_cast<int>(std::ceil(horizon / requested - 1e-9)));
  const double dt = horizon / steps;
  if (dt * max_out > 0.1 + 1e-12) {
    std::ostringstream os;
    os << "dt=" << dt << " max outflow=" << max_out;
    throw ConfigError(kModule, "forward step too large: dt * max outflow must not exceed 0.1", os.str());
  }
  const int stride = options.store_stride > 0 ? options.store_stride : std::max(1, steps / 100);

  InventoryLaw law;
  law.grid = grid;
  law.q0 = q0;
  law.dt = dt;
  law.steps = steps;
  law.occupation = Vector::Zero(n);
  Vector mu = Vector::Zero(n);
  mu(q0) = 1.0;
  law.t.push_back(0.0);
  law.mu.push_back(mu);
  Vector next(n);
  for (int step = 0; step < steps; ++step) {
    law.occupation += dt * mu;
    parallel_for(n, [&](int begin, int end) {
      for (int s = begin; s < end; ++s) {
        double inflow = 0.0;
        for (int j = gen.offset[static_cast<std::size_t>(s)]; j < gen.offset[static_cast<std::size_t>(s) + 1]; ++j) {
          inflow += gen.rate[static_cast<std::size_t>(j)] * mu(gen.source[static_cast<std::size_t>(j)]);
        }
        // rounding lands in the small increment, not in a rounded (1 - dt * outflow) factor
        next(s) = mu(s) + dt * (inflow - gen.outflow(s) * mu(s));
      }
    });
    mu.swap(next);
    const double t = (step + 1) * dt;
    const double drift = std::abs(mu.sum() - 1.0);
    law.max_mass_drift = std::max(law.max_mass_drift, drift);
    if (drift > 1e-12 * std::max(1.0, t)) {
      std::ostringstream os;
      os << "t=" << t << " drift=" << drift;
      throw NumericalError(kModule, "probability mass drifted; reduce dt", os.str());
    }
    if (mu.minCoeff() < -1e-14) {
      std::ostringstream os;
      os << "t=" << t << " min mass=" << mu.minCoeff();
      throw NumericalError(kModule, "negative probability mass; reduce dt", os.str());
    }
    if ((step + 1) % stride == 0 || step + 1 == steps) {
      law.t.push_back(step + 1 == steps ? horizon : t);
      law.mu.push_back(mu);
    }
  }
  return law;
}

double expected_hit_ratio(const InventoryLaw& law, const QuotePolicy& policy, const MarketSpec& spec, int tau) {
  check_lattice(law, policy);
  const double W = tier_scale(spec, tau);
  double acc = 0.0;
  for (int s = 0; s < law.grid.size(); ++s) {
    if (law.occupation(s) != 0.0) acc += law.occupation(s) * filled_notional(policy, spec, s, tau);
  }
  return acc / (law.horizon() * W);
}

double expected_hit_ratio_time_average(const InventoryLaw& law, const QuotePolicy& policy, const MarketSpec& spec,
                                       int tau) {
  check_lattice(law, policy);
  if (static_cast<int>(law.mu.size()) != law.steps + 1) {
    throw ConfigError(kModule, "time-average form needs every Euler step stored");
  }
  tier_scale(spec, tau);
  std::vector<double> ratio(static_cast<std::size_t>(law.grid.size()));
  for (int s = 0; s < law.grid.size(); ++s) ratio[static_cast<std::size_t>(s)] = state_hit_ratio(policy, spec, s, tau);
  double acc = 0.0;
  for (int step = 0; step < law.steps; ++step) {
    const Vector& mu = law.mu[static_cast<std::size_t>(step)];
    double avg = 0.0;
    for (int s = 0; s < law.grid.size(); ++s) avg += mu(s) * ratio[static_cast<std::size_t>(s)];
    acc += law.dt * avg;
  }
  return acc / law.horizon();
}

KpiReport expected_objective(const InventoryLaw& law, const QuotePolicy& policy, const MarketSpec& spec) {
  check_lattice(law, policy);
  const auto& grid = law.grid;
  const int T = spec.n_tiers();
  const Matrix& sigma = spec.risk.sigma_cov;
  KpiReport r;
  r.hit_ratio.assign(static_cast<std::size_t>(T), kNaN);
  std::vector<double> W(static_cast<std::size_t>(T));
  std::vector<double> filled(static_cast<std::size_t>(T), 0.0);
  for (int tau = 0; tau < T; ++tau) W[static_cast<std::size_t>(tau)] = notional_scale(spec, tau);

  for (int s = 0; s < grid.size(); ++s) {
    const double w = law.occupation(s);
    const double terminal = law.terminal()(s);
    if (w == 0.0 && terminal == 0.0) continue;
    const Vector q = grid.inventory(s);
    const double risk = q.dot(sigma * q);
    r.terminal_penalty += 0.5 * spec.risk.eta * risk * terminal;
    if (w == 0.0) continue;
    r.inventory_penalty += w * 0.5 * spec.risk.phi * risk;
    std::vector<double> per_tier(static_cast<std::size_t>(T), 0.0);
    for (int i = 0; i < spec.n_rungs(); ++i) {
      if (spec.lambda(i) <= 0.0) continue;
      const double delta = policy.offsets(s, i);
      if (std::isnan(delta)) continue;
      const double flow = spec.size_of(i) * fill_intensity(spec.lambda(i), spec.curve(i), delta);
      r.pnl += w * flow * delta;
      per_tier[static_cast<std::size_t>(spec.arrivals.rung(i).tier)] += flow;
    }
    for (int tau = 0; tau < T; ++tau) {
      const auto t = static_cast<std::size_t>(tau);
      filled[t] += w * per_tier[t];
      if (!spec.targets.is_targeted(tau) || W[t] <= 0.0) continue;
      const double gap = per_tier[t] / W[t] - spec.targets.r_star[t];
      r.hitratio_penalty += w * 0.5 * spec.targets.kappa[t] * W[t] * gap * gap;
    }
  }
  for (int tau = 0; tau < T; ++tau) {
    const auto t = static_cast<std::size_t>(tau);
    if (W[t] > 0.0) r.hit_ratio[t] = filled[t] / (law.horizon() * W[t]);
  }
  r.objective = r.pnl - r.inventory_penalty - r.hitratio_penalty - r.terminal_penalty;
  return r;
}

const char* axis_name(SweepAxis axis) noexcept {
  switch (axis) {
    case SweepAxis::kappa: return "kappa";
    case SweepAxis::intensity_ratio: return "intensity_ratio";
    case SweepAxis::correlation: return "correlation";
  }
  return "unknown";
}

SweepAxis parse_axis(std::string_view name) {
  if (name == "kappa") return SweepAxis::kappa;
  if (name == "intensity_ratio") return SweepAxis::intensity_ratio;
  if (name == "correlation") return SweepAxis::correlation;
  throw ConfigError("cli", "unknown sweep axis", std::string(name));
}

MarketSpec apply_axis(const MarketSpec& base, SweepAxis axis, double value) {
  std::ostringstream where;
  where << axis_name(axis) << "=" << value;
  if (!std::isfinite(value)) throw ConfigError(kModule, "sweep value must be finite", where.str());
  MarketSpec spec = base;
  switch (axis) {
    case SweepAxis::kappa: {
      if (value < 0.0) throw ConfigError(kModule, "kappa must be non-negative", where.str());
      if (spec.targets.targeted.empty()) throw ConfigError(kModule, "kappa sweep needs a targeted tier");
      for (int tau : spec.targets.targeted) spec.targets.kappa[static_cast<std::size_t>(tau)] = value;
      break;
    }
    case SweepAxis::intensity_ratio: {
      if (value < 0.0) throw ConfigError(kModule, "intensity ratio must be non-negative", where.str());
      if (spec.targets.targeted.size() != 1) throw ConfigError(kModule, "intensity-ratio sweep needs exactly one targeted tier");
      const int target = spec.targets.targeted.front();
      std::vector<int> keep;
      for (int tau = 0; tau < spec.n_tiers(); ++tau) {
        if (tau == target || value > 0.0) keep.push_back(tau);
      }
      if (static_cast<int>(keep.size()) == spec.n_tiers()) {
        auto& book = spec.arrivals;
        for (int tau = 0; tau < spec.n_tiers(); ++tau) {
          if (tau == target) continue;
          for (int m = 0; m < spec.n_bonds(); ++m)
            for (int s = 0; s < 2; ++s)
              for (int k = 0; k < spec.n_sizes(); ++k)
                book.lambda_at(m, tau, static_cast<Side>(s), k) = value * book.lambda_at(m, target, static_cast<Side>(s), k);
        }
        break;
      }
      std::vector<std::string> names;
      for (int tau : keep) names.push_back(base.tiers[static_cast<std::size_t>(tau)]);
      MarketSpec out = make_market(base.bonds, names, base.ladder.sizes);
      out.risk = base.risk;
      out.lattice = base.lattice;
      for (std::size_t j = 0; j < keep.size(); ++j) {
        const int tau = keep[j];
        for (int m = 0; m < base.n_bonds(); ++m)
          for (int s = 0; s < 2; ++s)
            for (int k = 0; k < base.n_sizes(); ++k) {
              const Side side = static_cast<Side>(s);
              out.arrivals.lambda_at(m, static_cast<int>(j), side, k) = base.arrivals.lambda_at(m, tau, side, k);
              out.arrivals.fill_at(m, static_cast<int>(j), side, k) = base.arrivals.fill_at(m, tau, side, k);
            }
        out.targets.r_star[j] = base.targets.r_star[static_cast<std::size_t>(tau)];
        out.targets.kappa[j] = base.targets.kappa[static_cast<std::size_t>(tau)];
        if (tau == target) out.targets.targeted.push_back(static_cast<int>(j));
      }
      spec = std::move(out);
      break;
    }
    case SweepAxis::correlation: {
      if (spec.n_bonds() != 2) throw ConfigError(kModule, "correlation sweep needs exactly two bonds");
      if (!(value > -1.0 && value < 1.0)) throw ConfigError(kModule, "correlation must lie in (-1, 1)", where.str());
      Matrix& S = spec.risk.sigma_cov;
      S(0, 1) = S(1, 0) = value * std::sqrt(S(0, 0) * S(1, 1));
      break;
    }
  }
  validate(spec);
  return spec;
}

SweepRow sweep_point(const MarketSpec& base, SweepAxis axis, double value, const SweepOptions& options) {
  SweepRow row;
  row.value = value;
  const auto start = std::chrono::steady_clock::now();
  try {
    const MarketSpec spec = apply_axis(base, axis, value);
    const InventoryGrid grid = make_grid(spec);
    QuotePolicy policy;
    if (spec.n_bonds() == 1) {
      row.solve_mode = mode_name(QuoteMode::exact);
      HjbOptions hjb;
      hjb.dt = options.hjb_dt;
      hjb.store_stride = std::numeric_limits<int>::max();
      const ExactSolution sol = solve_exact(spec, grid, hjb);
      policy = extract_policy(sol.value, spec, sol.book, 0);
    } else {
      row.solve_mode = mode_name(QuoteMode::begv_xi_q);
      policy = with_table_widening(spec, TableGrid{}, [&](const HamiltonianBook& book) {
        const QuadraticValue value = quadratic_value(spec, book);
        return begv_policy(QuoteMode::begv_xi_q, spec, book, value, value.frame(0.0), grid, 0.0);
      });
    }
    ForwardOptions fwd;
    fwd.dt = options.forward_dt;
    const int q0 = options.q0 >= 0 ? options.q0 : grid.origin();
    const InventoryLaw law = forward_propagate(policy, spec, q0, spec.risk.horizon, fwd);
    const KpiReport kpi = expected_objective(law, policy, spec);
    // Report hit ratios against the base tiers; dropped tiers stay NaN.
    row.kpi = kpi;
    row.kpi.hit_ratio.assign(base.tiers.size(), kNaN);
    for (int tau = 0; tau < spec.n_tiers(); ++tau) {
      for (std::size_t b = 0; b < base.tiers.size(); ++b) {
        if (base.tiers[b] == spec.tiers[static_cast<std::size_t>(tau)]) row.kpi.hit_ratio[b] = kpi.hit_ratio[static_cast<std::size_t>(tau)];
      }
    }
    row.ok = true;
  } catch (const Error& e) {
    row.error = e.module() + ": " + e.what();
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

std::vector<SweepRow> sweep(const MarketSpec& base, SweepAxis axis, const std::vector<double>& values,
                            const SweepOptions& options) {
  std::vector<SweepRow> rows(values.size());
  const int n = static_cast<int>(values.size());
  const int workers = std::min(worker_count(), n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = sweep_point(base, axis, values[static_cast<std::size_t>(i)], options);
    return rows;
  }
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < n; i = next++) rows[static_cast<std::size_t>(i)] = sweep_point(base, axis, values[static_cast<std::size_t>(i)], options);
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  return rows;
}

void write_sweep_csv(std::ostream& os, const MarketSpec& spec, SweepAxis axis, const std::vector<SweepRow>& rows,
                     bool timing) {
  os << axis_name(axis);
  for (const auto& tier : spec.tiers) os << ",hit_ratio_" << tier;
  os << ",objective,pnl,inv_penalty,hr_penalty,terminal_penalty,solve_mode,wall_time_s,error\n";
  for (const auto& r : rows) {
    os << format_fixed(r.value);
    for (std::size_t t = 0; t < spec.tiers.size(); ++t) {
      os << ',' << format_fixed(r.ok && t < r.kpi.hit_ratio.size() ? r.kpi.hit_ratio[t] : kNaN);
    }
    const auto field = [&](double x) { return format_fixed(r.ok ? x : kNaN); };
    os << ',' << field(r.kpi.objective) << ',' << field(r.kpi.pnl) << ',' << field(r.kpi.inventory_penalty) << ','
       << field(r.kpi.hitratio_penalty) << ',' << field(r.kpi.terminal_penalty) << ',' << r.solve_mode << ','
       << format_fixed(timing ? r.wall_time_s : 0.0) << ',';
    std::string err = r.error;
    for (char& c : err)
      if (c == ',' || c == '\n') c = ';';
    os << err << '\n';
  }
}

}  // namespace hrmm
