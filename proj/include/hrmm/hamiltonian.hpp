#pragma once

#include "hrmm/market_model.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace hrmm {

/// H(p) = sup_delta Lambda(delta) (delta - p), its first three p-derivatives and the maximizer.
struct HamiltonianPoint {
  double H = 0.0;
  double H1 = 0.0;
  double H2 = 0.0;
  double H3 = 0.0;
  double delta = 0.0;
};

/// Expansion of a rung's Hamiltonian and control map around p = 0.
struct LinearizationConstants {
  double delta0 = 0.0;  // riskless spread, argmax Lambda(delta) * delta
  double c = 0.0;       // 2 - f f'' / f'^2 at delta0; the control map has slope 1/c at p = 0
  double H0 = 0.0;
  double H1_0 = 0.0;
  double H2_0 = 0.0;
  double H3_0 = 0.0;
};

/// Riskless spread of a rung. Throws NumericalError when lambda is zero (no flow to quote).
double riskless_spread(double lambda, const FillCurve& curve);

/// Direct evaluation: maximizer by safeguarded Newton on the first-order condition,
/// derivatives from the envelope relations of the logistic family.
HamiltonianPoint hamiltonian_eval(double lambda, const FillCurve& curve, double p);

LinearizationConstants linearization_constants(double lambda, const FillCurve& curve);

/// Uniform p-grid of Hamiltonian values and derivatives with cubic interpolation.
///
/// H, H' and H'' are Hermite cubics built from the next derivative at the nodes, so the
/// interpolant of H is C^1 and consistent with the interpolant of H'. H''' uses 4-point
/// Lagrange cubics. Queries outside [p_min, p_max] throw RangeError.
class HamiltonianTable {
 public:
  HamiltonianTable(double lambda, const FillCurve& curve, double p_min, double p_max, int n_nodes);

  double lambda() const noexcept { return lambda_; }
  const FillCurve& curve() const noexcept { return curve_; }
  double p_min() const noexcept { return p_min_; }
  double p_max() const noexcept { return p_max_; }
  int n_nodes() const noexcept { return static_cast<int>(nodes_.size()); }
  double step() const noexcept { return step_; }
  double node_p(int i) const noexcept { return p_min_ + i * step_; }
  const HamiltonianPoint& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  bool contains(double p) const noexcept { return p >= p_min_ && p <= p_max_; }

  double H(double p) const;
  double H1(double p) const;
  double H2(double p) const;
  double H3(double p) const;
  /// {H'(p), H''(p)} sharing one segment lookup.
  std::pair<double, double> slope_curvature(double p) const;
  /// Interpolated point including the control map delta(p).
  HamiltonianPoint at(double p) const;

 private:
  struct Segment {
    int i;
    double t;
  };
  Segment locate(double p) const;

  double lambda_;
  FillCurve curve_;
  double p_min_;
  double p_max_;
  double step_;
  std::vector<HamiltonianPoint> nodes_;
};

HamiltonianTable build_table(double lambda, const FillCurve& curve, double p_min, double p_max, int n_nodes);

/// Exact quote map delta(p) = f^{-1}(-H'(p) / lambda).
double control_map(const HamiltonianTable& table, double p);

struct TableGrid {
  double p_min = -30.0;
  double p_max = 30.0;
  int n_nodes = 2049;
};

/// Tables and linearization constants for every rung of a market that has flow.
class HamiltonianBook {
 public:
  HamiltonianBook(const MarketSpec& spec, TableGrid grid = {});

  const TableGrid& grid() const noexcept { return grid_; }
  int n_rungs() const noexcept { return static_cast<int>(tables_.size()); }
  bool active(int rung) const { return tables_[static_cast<std::size_t>(rung)] != nullptr; }
  const HamiltonianTable& table(int rung) const;
  const LinearizationConstants& constants(int rung) const;

 private:
  TableGrid grid_;
  std::vector<std::shared_ptr<const HamiltonianTable>> tables_;
  std::vector<LinearizationConstants> constants_;
};

/// Calls fn(book) and retries with tables of twice the p-span, at the same spacing,
/// whenever a marginal cost leaves them. Gives up after three widenings.
template <class Fn>
auto with_table_widening(const MarketSpec& spec, TableGrid tables, Fn&& fn) {
  for (int attempt = 0;; ++attempt) {
    const HamiltonianBook book(spec, tables);
    try {
      return fn(book);
    } catch (const RangeError&) {
      if (attempt >= 3) throw;
      tables.p_min *= 2.0;
      tables.p_max *= 2.0;
      tables.n_nodes = 2 * tables.n_nodes - 1;
    }
  }
}

}  // namespace hrmm
