#pragma once

#include "hrmm/policy.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hrmm {

struct Transition {
  int dest = 0;
  double rate = 0.0;  // 1/day
};

/// Jump rates out of a lattice state under a frozen policy, summed over tiers per
/// destination. Fills that would leave the lattice have rate zero and are omitted.
std::vector<Transition> generator_rates(const QuotePolicy& policy, const MarketSpec& spec, int state);

/// Law of the inventory under a frozen policy.
///
/// Running KPIs only need the occupation measure, the left-point sum of dt * mu_n over
/// the Euler steps, so every step is folded into it and only strided snapshots of mu are kept.
struct InventoryLaw {
  InventoryGrid grid;
  int q0 = 0;
  double dt = 0.0;
  int steps = 0;
  std::vector<double> t;   // snapshot times, front() == 0, back() == T
  std::vector<Vector> mu;  // snapshots
  Vector occupation;       // sum_n dt mu_n over n = 0 .. steps-1
  double max_mass_drift = 0.0;

  double horizon() const { return t.back(); }
  const Vector& terminal() const { return mu.back(); }
};

struct ForwardOptions {
  double dt = 0.0;        // 0 selects min(1e-3, 0.1 / max outflow)
  int store_stride = 0;   // 0 keeps about 100 snapshots
};

/// Explicit Euler on the forward Kolmogorov equation in gather form, mu_0 = point mass at q0.
/// ConfigError when dt * max outflow > 0.1; NumericalError when mass drifts beyond
/// 1e-12 per unit time or a mass falls below -1e-14.
InventoryLaw forward_propagate(const QuotePolicy& policy, const MarketSpec& spec, int q0, double horizon,
                               ForwardOptions options = {});

/// Occupation-form realized hit ratio: int sum_q mu z Lambda dt / (T sum z lambda).
double expected_hit_ratio(const InventoryLaw& law, const QuotePolicy& policy, const MarketSpec& spec, int tau);

/// Time average of the instantaneous ratio over all snapshots; needs store_stride = 1.
double expected_hit_ratio_time_average(const InventoryLaw& law, const QuotePolicy& policy, const MarketSpec& spec,
                                       int tau);

struct KpiReport {
  std::vector<double> hit_ratio;  // per tier, NaN for tiers without flow
  double pnl = 0.0;
  double inventory_penalty = 0.0;
  double hitratio_penalty = 0.0;
  double terminal_penalty = 0.0;
  double objective = 0.0;  // pnl - inventory - hitratio - terminal
};

KpiReport expected_objective(const InventoryLaw& law, const QuotePolicy& policy, const MarketSpec& spec);

enum class SweepAxis { kappa, intensity_ratio, correlation };

const char* axis_name(SweepAxis axis) noexcept;
SweepAxis parse_axis(std::string_view name);

/// Scenario for one sweep value. kappa sets every targeted tier; intensity_ratio scales the
/// untargeted tiers to ratio x the targeted intensities (0 drops them); correlation sets the
/// off-diagonal of Sigma for two bonds.
MarketSpec apply_axis(const MarketSpec& base, SweepAxis axis, double value);

struct SweepRow {
  double value = 0.0;
  bool ok = false;
  std::string error;
  std::string solve_mode;
  KpiReport kpi;
  double wall_time_s = 0.0;
};

struct SweepOptions {
  double hjb_dt = 0.0;
  double forward_dt = 0.0;
  int q0 = -1;  // -1 starts from q = 0
};

/// Solve (exact for one bond, begv_exact_map_xi_q for two), freeze the t = 0 policy,
/// propagate from q0 over the horizon and report KPIs. Failures are recorded per row.
SweepRow sweep_point(const MarketSpec& base, SweepAxis axis, double value, const SweepOptions& options = {});
std::vector<SweepRow> sweep(const MarketSpec& base, SweepAxis axis, const std::vector<double>& values,
                            const SweepOptions& options = {});

/// One header line plus one row per value; wall times are written only when `timing` is set.
void write_sweep_csv(std::ostream& os, const MarketSpec& spec, SweepAxis axis, const std::vector<SweepRow>& rows,
                     bool timing = false);

}  // namespace hrmm
