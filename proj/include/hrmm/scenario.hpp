#pragma once

#include "hrmm/market_model.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace hrmm {

/// Reads an INI-style scenario. Errors carry "source:line" as context.
///
///   [bonds]     names = B1, B2
///   [tiers]     names = background, target
///   [ladder]    sizes = 1, 5, 20      q_max = 100      unit = 1 (optional)
///   [arrivals]  lambda.<bond>.<tier>[.<side>] = one value per size, or a single value
///               alpha.*, beta.* likewise; '*' matches every bond, tier or side,
///               and later lines override earlier ones
///   [risk]      phi, eta, horizon, sigma (per bond or one value), rho or covariance = a, b; c, d
///   [targets]   tiers = target      r_star.<tier> = 0.1      kappa.<tier> = 10
MarketSpec parse_scenario(std::istream& in, const std::string& source = "<input>");
MarketSpec parse_scenario_text(const std::string& text, const std::string& source = "<input>");
/// IoError when the file cannot be read.
MarketSpec load_scenario(const std::string& path);

/// Every field at full precision in a fixed order; equal specs give equal text.
std::string canonical_text(const MarketSpec& spec);

struct NamedScenario {
  std::string name;
  MarketSpec spec;
};

/// baseline, two_tier, two_bond and asym_toy, built in code. The files under scenarios/
/// describe the same markets.
std::vector<NamedScenario> bundled_scenarios();
MarketSpec bundled_scenario(const std::string& name);

}  // namespace hrmm
