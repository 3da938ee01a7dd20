#pragma once

#include <cmath>
#include <utility>

namespace hrmm {

struct RootResult {
  double x = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Newton iteration for an increasing scalar function with a sign-change bracket.
///
/// `fn(x)` returns `{f(x), f'(x)}`. The bracket [lo, hi] must satisfy f(lo) <= 0 <= f(hi);
/// it is tightened every iteration and any Newton step leaving it is replaced by a
/// bisection step, so the iteration cannot diverge. Stops when the step is below
/// `xtol` or |f| is below `ftol`.
template <class Fn>
RootResult safeguarded_newton(Fn&& fn, double lo, double hi, double x0, double xtol, double ftol, int max_iter) {
  RootResult out;
  double x = (x0 > lo && x0 < hi) ? x0 : 0.5 * (lo + hi);
  for (int it = 1; it <= max_iter; ++it) {
    const auto [fx, dfx] = fn(x);
    out.iterations = it;
    out.x = x;
    out.residual = fx;
    if (std::abs(fx) <= ftol) {
      out.converged = true;
      return out;
    }
    if (fx < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    double next = (dfx > 0.0) ? x - fx / dfx : lo - 1.0;
    if (!(next > lo && next < hi)) {
      next = 0.5 * (lo + hi);
    }
    if (std::abs(next - x) <= xtol || (hi - lo) <= xtol) {
      const auto [fn_next, unused] = fn(next);
      (void)unused;
      out.x = next;
      out.residual = fn_next;
      out.converged = true;
      return out;
    }
    x = next;
  }
  return out;
}

/// Plain bisection on an increasing function; used where only the sign is trusted.
template <class Fn>
double bisect_increasing(Fn&& fn, double lo, double hi, double xtol, int max_iter = 400) {
  for (int it = 0; it < max_iter && (hi - lo) > xtol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (fn(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace hrmm
