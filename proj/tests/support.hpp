#pragma once

#include "hrmm/market_model.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace testing_support {

using namespace hrmm;

/// One bond, the given tiers, every tier quoting lambda on both sides with one fill curve per size.
inline MarketSpec ladder_market(std::vector<std::string> tiers, std::vector<double> sizes, std::vector<double> lambda,
                                std::vector<double> alpha, std::vector<double> beta, double q_max) {
  const int T = static_cast<int>(tiers.size());
  MarketSpec spec = make_market({"B1"}, std::move(tiers), std::move(sizes));
  spec.risk.phi = 1.0;
  spec.risk.horizon = 1.0;
  spec.lattice.q_max = q_max;
  for (int tau = 0; tau < T; ++tau)
    for (Side s : {Side::bid, Side::ask})
      for (int k = 0; k < spec.n_sizes(); ++k) {
        const auto kk = static_cast<std::size_t>(k);
        spec.arrivals.lambda_at(0, tau, s, k) = lambda[kk];
        spec.arrivals.fill_at(0, tau, s, k) = FillCurve{alpha[kk], beta[kk]};
      }
  return spec;
}

inline void set_target(MarketSpec& spec, int tau, double r_star, double kappa) {
  if (std::find(spec.targets.targeted.begin(), spec.targets.targeted.end(), tau) == spec.targets.targeted.end())
    spec.targets.targeted.push_back(tau);
  spec.targets.r_star[static_cast<std::size_t>(tau)] = r_star;
  spec.targets.kappa[static_cast<std::size_t>(tau)] = kappa;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

}  // namespace testing_support
