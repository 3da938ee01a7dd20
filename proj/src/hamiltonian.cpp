#include "hrmm/hamiltonian.hpp"

#include "hrmm/root_finding.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hrmm {

namespace {

constexpr const char* kModule = "hamiltonian";

double logistic(double a) {  // 1 / (1 + exp(-a))
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

void require_flow(double lambda) {
  if (!(lambda > 0.0)) {
    throw NumericalError(kModule, "rung has no flow (lambda = 0); it is excluded from quoting");
  }
}

}  // namespace

HamiltonianPoint hamiltonian_eval(double lambda, const FillCurve& curve, double p) {
  require_flow(lambda);
  if (!std::isfinite(p)) throw NumericalError(kModule, "non-finite marginal cost p");
  const double beta = curve.beta;
  const double a0 = curve.alpha + beta * p;

  // First-order condition in x = delta - p: beta * x * (1 - f(p + x)) = 1, increasing in x > 0.
  auto foc = [&](double x) {
    const double s = logistic(a0 + beta * x);
    return std::pair{beta * x * s - 1.0, beta * s + beta * beta * x * s * (1.0 - s)};
  };
  // Deep in the money (a0 << 0) the maximizer sits near -a0 / beta.
  const double hi = (100.0 + std::max(0.0, -a0)) / beta;
  if (foc(hi).first < 0.0) {
    std::ostringstream os;
    os << "alpha=" << curve.alpha << " beta=" << beta << " p=" << p;
    throw NumericalError(kModule, "cannot bracket the Hamiltonian maximizer", os.str());
  }
  const double x0 = 1.0 / (beta * logistic(a0 + 1.0));
  RootResult root = safeguarded_newton(foc, 0.0, hi, x0, 1e-13, 1e-15, 200);
  if (!root.converged) {
    root.x = bisect_increasing([&](double x) { return foc(x).first; }, 0.0, hi, 1e-13);
  }
  const double x = root.x;
  const double a = a0 + beta * x;
  const double f = logistic(-a);
  const double s = logistic(a);

  HamiltonianPoint out;
  out.delta = p + x;
  out.H = lambda * f * x;
  out.H1 = -lambda * f;
  out.H2 = lambda * beta * f * s * s;
  out.H3 = -lambda * beta * beta * f * s * s * s * (1.0 - 3.0 * f);
  return out;
}

double riskless_spread(double lambda, const FillCurve& curve) {
  return hamiltonian_eval(lambda, curve, 0.0).delta;
}

LinearizationConstants linearization_constants(double lambda, const FillCurve& curve) {
  const HamiltonianPoint at0 = hamiltonian_eval(lambda, curve, 0.0);
  const double d0 = at0.delta;
  const double f = fill_probability(curve, d0);
  const double f1 = fill_probability_d1(curve, d0);
  const double f2 = fill_probability_d2(curve, d0);
  if (f1 == 0.0) {
    throw NumericalError(kModule, "degenerate fill curve: f'(delta0) = 0");
  }
  LinearizationConstants out;
  out.delta0 = d0;
  out.c = 2.0 - f * f2 / (f1 * f1);
  const double intensity = lambda * f;
  out.H0 = intensity * d0;
  out.H1_0 = -intensity;
  out.H2_0 = intensity / (d0 * out.c);
  out.H3_0 = at0.H3;
  const double alt = -lambda * f1 / out.c;
  if (std::abs(alt - out.H2_0) > 1e-8 * std::abs(out.H2_0)) {
    throw NumericalError(kModule, "inconsistent curvature constants at the riskless spread");
  }
  return out;
}

HamiltonianTable::HamiltonianTable(double lambda, const FillCurve& curve, double p_min, double p_max, int n_nodes)
    : lambda_(lambda), curve_(curve), p_min_(p_min), p_max_(p_max), step_((p_max - p_min) / (n_nodes - 1)) {
  require_flow(lambda);
  if (!(p_min < 0.0 && p_max > 0.0)) throw ConfigError(kModule, "table range must straddle p = 0");
  if (n_nodes < 64) throw ConfigError(kModule, "table needs at least 64 nodes");
  nodes_.reserve(static_cast<std::size_t>(n_nodes));
  for (int i = 0; i < n_nodes; ++i) {
    nodes_.push_back(hamiltonian_eval(lambda, curve, node_p(i)));
  }
}

HamiltonianTable::Segment HamiltonianTable::locate(double p) const {
  if (!(p >= p_min_ && p <= p_max_)) {
    std::ostringstream os;
    os << "p=" << p << " outside [" << p_min_ << ", " << p_max_ << "]";
    throw RangeError(kModule, "Hamiltonian table query out of range", p, os.str());
  }
  const double u = (p - p_min_) / step_;
  int i = static_cast<int>(u);
  const int last = n_nodes() - 2;
  if (i > last) i = last;
  return {i, u - i};
}

namespace {

struct Hermite {
  double h00, h10, h01, h11;
  explicit Hermite(double t) {
    const double t2 = t * t;
    const double t3 = t2 * t;
    h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    h10 = t3 - 2.0 * t2 + t;
    h01 = -2.0 * t3 + 3.0 * t2;
    h11 = t3 - t2;
  }
  double operator()(double y0, double m0, double y1, double m1, double h) const {
    return h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1;
  }
};

}  // namespace

double HamiltonianTable::H(double p) const {
  const auto [i, t] = locate(p);
  const auto& a = nodes_[static_cast<std::size_t>(i)];
  const auto& b = nodes_[static_cast<std::size_t>(i + 1)];
  return Hermite(t)(a.H, a.H1, b.H, b.H1, step_);
}

double HamiltonianTable::H1(double p) const {
  const auto [i, t] = locate(p);
  const auto& a = nodes_[static_cast<std::size_t>(i)];
  const auto& b = nodes_[static_cast<std::size_t>(i + 1)];
  return Hermite(t)(a.H1, a.H2, b.H1, b.H2, step_);
}

double HamiltonianTable::H2(double p) const {
  const auto [i, t] = locate(p);
  const auto& a = nodes_[static_cast<std::size_t>(i)];
  const auto& b = nodes_[static_cast<std::size_t>(i + 1)];
  return Hermite(t)(a.H2, a.H3, b.H2, b.H3, step_);
}

double HamiltonianTable::H3(double p) const {
  const auto [i, t] = locate(p);
  if (t == 0.0) return nodes_[static_cast<std::size_t>(i)].H3;
  if (t == 1.0) return nodes_[static_cast<std::size_t>(i + 1)].H3;
  // Stencil of four nodes around the segment, shifted inward at the edges.
  int j = i - 1;
  if (j < 0) j = 0;
  if (j > n_nodes() - 4) j = n_nodes() - 4;
  const double u = (p - node_p(j)) / step_;
  double out = 0.0;
  for (int a = 0; a < 4; ++a) {
    double w = 1.0;
    for (int b = 0; b < 4; ++b) {
      if (b != a) w *= (u - b) / static_cast<double>(a - b);
    }
    out += w * nodes_[static_cast<std::size_t>(j + a)].H3;
  }
  return out;
}

std::pair<double, double> HamiltonianTable::slope_curvature(double p) const {
  const auto [i, t] = locate(p);
  const auto& a = nodes_[static_cast<std::size_t>(i)];
  const auto& b = nodes_[static_cast<std::size_t>(i + 1)];
  const Hermite w(t);
  return {w(a.H1, a.H2, b.H1, b.H2, step_), w(a.H2, a.H3, b.H2, b.H3, step_)};
}

HamiltonianPoint HamiltonianTable::at(double p) const {
  HamiltonianPoint out;
  out.H = H(p);
  std::tie(out.H1, out.H2) = slope_curvature(p);
  out.H3 = H3(p);
  out.delta = fill_inverse(curve_, -out.H1 / lambda_);
  return out;
}

HamiltonianTable build_table(double lambda, const FillCurve& curve, double p_min, double p_max, int n_nodes) {
  return HamiltonianTable(lambda, curve, p_min, p_max, n_nodes);
}

double control_map(const HamiltonianTable& table, double p) {
  const double u = -table.H1(p) / table.lambda();
  if (!(u > 0.0 && u < 1.0)) {
    throw NumericalError(kModule, "table corruption: -H'(p)/lambda outside (0, 1)");
  }
  return fill_inverse(table.curve(), u);
}

HamiltonianBook::HamiltonianBook(const MarketSpec& spec, TableGrid grid) : grid_(grid) {
  const int n = spec.n_rungs();
  tables_.resize(static_cast<std::size_t>(n));
  constants_.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double lam = spec.lambda(i);
    if (lam <= 0.0) continue;
    // Reuse a table already built for identical inputs (typically the opposite side).
    for (int j = 0; j < i; ++j) {
      if (tables_[static_cast<std::size_t>(j)] && spec.lambda(j) == lam && spec.curve(j) == spec.curve(i)) {
        tables_[static_cast<std::size_t>(i)] = tables_[static_cast<std::size_t>(j)];
        constants_[static_cast<std::size_t>(i)] = constants_[static_cast<std::size_t>(j)];
        break;
      }
    }
    if (!tables_[static_cast<std::size_t>(i)]) {
      tables_[static_cast<std::size_t>(i)] =
          std::make_shared<const HamiltonianTable>(lam, spec.curve(i), grid.p_min, grid.p_max, grid.n_nodes);
      constants_[static_cast<std::size_t>(i)] = linearization_constants(lam, spec.curve(i));
    }
  }
}

const HamiltonianTable& HamiltonianBook::table(int rung) const {
  const auto& t = tables_[static_cast<std::size_t>(rung)];
  if (!t) throw NumericalError(kModule, "no table for a rung without flow", "rung " + std::to_string(rung));
  return *t;
}

const LinearizationConstants& HamiltonianBook::constants(int rung) const {
  if (!active(rung)) throw NumericalError(kModule, "no constants for a rung without flow", "rung " + std::to_string(rung));
  return constants_[static_cast<std::size_t>(rung)];
}

}  // namespace hrmm
