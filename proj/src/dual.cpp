#include "hrmm/dual.hpp"

#include "hrmm/root_finding.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hrmm {

namespace {
constexpr const char* kModule = "hjb_exact";
}

DualSolution dual_inner_solve(std::span<const DualTerm> terms, double r_star, double kappa, double W,
                              double warm_start) {
  if (!(kappa > 0.0)) return {};

  auto foc = [&](double xi) {
    double s1 = 0.0;
    double s2 = 0.0;
    for (const auto& t : terms) {
      const auto [h1, h2] = t.table->slope_curvature(t.p - xi);
      s1 += t.z * h1;
      s2 += t.z * h2;
    }
    return std::pair{xi / kappa - r_star - s1 / W, 1.0 / kappa + s2 / W};
  };

  double lo = -kappa * (1.0 - r_star);
  double hi = kappa * r_star;
  bool lo_clipped = false;
  bool hi_clipped = false;
  for (const auto& t : terms) {
    const double a = t.p - t.table->p_max();
    const double b = t.p - t.table->p_min();
    if (a > lo) {
      lo = a;
      lo_clipped = true;
    }
    if (b < hi) {
      hi = b;
      hi_clipped = true;
    }
  }
  auto out_of_range = [&](double where) {
    std::ostringstream os;
    os << "kappa=" << kappa << " r*=" << r_star << " bracket=[" << lo << ", " << hi << "]";
    return RangeError(kModule, "dual root lies outside the Hamiltonian tables", where, os.str());
  };
  if (lo > hi) throw out_of_range(lo);
  if (lo_clipped && foc(lo).first > 0.0) throw out_of_range(lo);
  if (hi_clipped && foc(hi).first < 0.0) throw out_of_range(hi);

  const double ftol = 1e-13 / std::max(1.0, kappa);
  const double xtol = 1e-15 * std::max({1.0, std::abs(lo), std::abs(hi)});
  RootResult root = safeguarded_newton(foc, lo, hi, warm_start, xtol, ftol, 100);
  if (!root.converged) {
    root.x = bisect_increasing([&](double xi) { return foc(xi).first; }, lo, hi, xtol);
    root.residual = foc(root.x).first;
  }
  DualSolution out;
  out.xi = root.x;
  out.residual = std::abs(root.residual) * kappa;
  out.iterations = root.iterations;
  return out;
}

double dual_value(std::span<const DualTerm> terms, double r_star, double kappa, double W, double xi) {
  double acc = kappa > 0.0 ? W * (-xi * r_star + xi * xi / (2.0 * kappa)) : 0.0;
  for (const auto& t : terms) acc += t.z * t.table->H(t.p - xi);
  return acc;
}

}  // namespace hrmm
