#include "oracles.hpp"
#include "support.hpp"

#include "hrmm/forward_kpi.hpp"
#include "hrmm/quotes.hpp"
#include "hrmm/scenario.hpp"

#include <doctest.h>

#include <sstream>

using namespace hrmm;
using testing_support::ladder_market;
using testing_support::set_target;

namespace {

// Same offset on every rung, NaN where the fill would leave the lattice.
QuotePolicy constant_policy(const MarketSpec& spec, double delta) {
  QuotePolicy p;
  p.grid = make_grid(spec);
  p.offsets = Matrix::Constant(p.grid.size(), spec.n_rungs(), delta);
  p.xi = Matrix::Zero(p.grid.size(), spec.n_tiers());
  const auto geometry = rung_geometry(spec, p.grid);
  for (int s = 0; s < p.grid.size(); ++s)
    for (int i = 0; i < spec.n_rungs(); ++i)
      if (fill_destination(p.grid, geometry[static_cast<std::size_t>(i)], s) < 0) p.offsets(s, i) = std::nan("");
  return p;
}

QuotePolicy baseline_policy(const MarketSpec& spec) {
  const HamiltonianBook book(spec);
  const QuadraticValue v(spec, book);
  return begv_policy(QuoteMode::begv_xi_const, spec, book, v, v.frame(0.0), make_grid(spec));
}

double mean_q(const InventoryGrid& g, const Vector& mu) {
  double m = 0.0;
  for (int s = 0; s < g.size(); ++s) m += mu(s) * g.inventory(s, 0);
  return m;
}

}  // namespace

TEST_CASE("no fills keep the point mass") {
  MarketSpec spec = bundled_scenario("baseline");
  spec.lattice.q_max = 30.0;
  const QuotePolicy p = constant_policy(spec, 1e6);
  const InventoryGrid& g = p.grid;
  const InventoryLaw law = forward_propagate(p, spec, g.index({4}), 1.0);
  CHECK(law.terminal()(g.index({4})) == 1.0);
  CHECK(law.terminal().sum() == 1.0);
  CHECK(std::abs(law.occupation(g.index({4})) - 1.0) < 1e-12);
}

TEST_CASE("three-state chain against the matrix exponential") {
  // q in {-1, 0, 1}, one size, distinct bid and ask curves
  MarketSpec spec = ladder_market({"c"}, {1.0}, {1.0}, {0.0}, {1.0}, 1.0);
  spec.arrivals.lambda_at(0, 0, Side::bid, 0) = 0.5;
  spec.arrivals.lambda_at(0, 0, Side::ask, 0) = 0.3;
  QuotePolicy p = constant_policy(spec, 0.0);
  const InventoryGrid& g = p.grid;
  REQUIRE(g.size() == 3);
  const int bid = spec.arrivals.index(0, 0, Side::bid, 0), ask = spec.arrivals.index(0, 0, Side::ask, 0);
  // state-dependent quotes
  const double db[3] = {-0.5, 0.2, 0.0}, da[3] = {0.0, 0.4, 1.0};
  for (int s = 0; s < 3; ++s) {
    if (!std::isnan(p.offsets(s, bid))) p.offsets(s, bid) = db[s];
    if (!std::isnan(p.offsets(s, ask))) p.offsets(s, ask) = da[s];
  }
  Matrix Q = Matrix::Zero(3, 3);
  for (int s = 0; s < 3; ++s) {
    if (s < 2) Q(s, s + 1) = 0.5 * oracle::fill(0.0, 1.0, db[s]);
    if (s > 0) Q(s, s - 1) = 0.3 * oracle::fill(0.0, 1.0, da[s]);
    Q(s, s) = -Q.row(s).sum();
  }
  for (int s = 0; s < 3; ++s) {
    const auto rates = generator_rates(p, spec, s);
    double total = 0.0;
    for (const auto& t : rates) {
      CHECK(std::abs(t.rate - Q(s, t.dest)) < 1e-15);
      total += t.rate;
    }
    CHECK(std::abs(total + Q(s, s)) < 1e-15);
  }
  const double T = 0.8;
  ForwardOptions o;
  o.dt = 1e-5;  // Euler error ~ dt T |Q^2| / 2, well below the tolerance at these rates
  const InventoryLaw law = forward_propagate(p, spec, 1, T, o);
  Vector e = Vector::Zero(3);
  e(1) = 1.0;
  const Vector ref = (e.transpose() * oracle::expm(Q * T)).transpose();
  CHECK((law.terminal() - ref).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(law.max_mass_drift <= 1e-12 * T);
}

TEST_CASE("mass conservation and symmetry on the baseline") {
  const MarketSpec spec = bundled_scenario("baseline");
  const QuotePolicy p = baseline_policy(spec);
  const InventoryLaw law = forward_propagate(p, spec, p.grid.origin(), 1.0);
  CHECK(law.max_mass_drift <= 1e-12);
  CHECK(std::abs(law.terminal().sum() - 1.0) <= 1e-12);
  CHECK(law.terminal().minCoeff() >= 0.0);
  for (const Vector& mu : law.mu) CHECK(std::abs(mean_q(p.grid, mu)) <= 1e-12);
  CHECK(law.t.front() == 0.0);
  CHECK(law.t.back() == 1.0);
  CHECK(std::abs(law.occupation.sum() - 1.0) <= 1e-12);
}

TEST_CASE("step size guard") {
  const MarketSpec spec = bundled_scenario("baseline");
  const QuotePolicy p = baseline_policy(spec);
  ForwardOptions o;
  o.dt = 0.01;
  CHECK_THROWS_AS(forward_propagate(p, spec, p.grid.origin(), 1.0, o), ConfigError);
  CHECK_THROWS_AS(forward_propagate(p, spec, -1, 1.0), ConfigError);
  CHECK_THROWS_AS(forward_propagate(p, spec, p.grid.origin(), 0.0), ConfigError);
}

TEST_CASE("occupation and time-average hit ratios agree") {
  MarketSpec spec = bundled_scenario("baseline");
  spec.lattice.q_max = 30.0;
  const QuotePolicy p = baseline_policy(spec);
  ForwardOptions o;
  o.store_stride = 1;
  const InventoryLaw law = forward_propagate(p, spec, p.grid.index({10}), 0.5, o);
  const double a = expected_hit_ratio(law, p, spec, 0);
  const double b = expected_hit_ratio_time_average(law, p, spec, 0);
  CHECK(std::abs(a - b) <= 1e-12);
  CHECK(std::abs(expected_objective(law, p, spec).hit_ratio[0] - a) <= 1e-12);

  const InventoryLaw coarse = forward_propagate(p, spec, p.grid.origin(), 0.5);
  CHECK_THROWS_AS(expected_hit_ratio_time_average(coarse, p, spec, 0), ConfigError);
}

TEST_CASE("objective components under a constant policy") {
  // Away from the boundary the inventory is a random walk, so every moment is exact under Euler.
  MarketSpec spec = ladder_market({"c"}, {1.0, 2.0}, {30.0, 10.0}, {1.0, 0.5}, {1.2, 0.8}, 200.0);
  spec.risk.phi = 0.7;
  spec.risk.eta = 0.3;
  spec.risk.sigma_cov(0, 0) = 1.5;
  set_target(spec, 0, 0.4, 6.0);
  const double delta = 0.6;
  const QuotePolicy p = constant_policy(spec, delta);
  ForwardOptions o;
  o.dt = 1e-3;
  const double T = 0.05;  // 50 steps of at most 2 units stay inside the lattice
  const InventoryLaw law = forward_propagate(p, spec, p.grid.origin(), T, o);
  const KpiReport k = expected_objective(law, p, spec);

  double flow = 0.0, W = 0.0, pnl_rate = 0.0, jump_var = 0.0;
  for (int i = 0; i < spec.n_rungs(); ++i) {
    const auto& c = spec.curve(i);
    const double z = spec.size_of(i);
    const double rate = spec.lambda(i) * oracle::fill(c.alpha, c.beta, delta);
    flow += z * rate;
    W += z * spec.lambda(i);
    pnl_rate += z * rate * delta;
    jump_var += z * z * rate;
  }
  const double r = flow / W;
  const int N = law.steps;
  const double dt = law.dt;
  CHECK(std::abs(k.hit_ratio[0] - r) <= 1e-12);
  CHECK(std::abs(k.pnl - T * pnl_rate) <= 1e-12 * T * pnl_rate);
  const double occupied_var = dt * dt * jump_var * N * (N - 1) / 2.0;  // sum_n dt E[q_n^2]
  CHECK(std::abs(k.inventory_penalty - 0.5 * 0.7 * 1.5 * occupied_var) <= 1e-10 * k.inventory_penalty);
  CHECK(std::abs(k.terminal_penalty - 0.5 * 0.3 * 1.5 * T * jump_var) <= 1e-10 * k.terminal_penalty);
  CHECK(std::abs(k.hitratio_penalty - T * 0.5 * 6.0 * W * (r - 0.4) * (r - 0.4)) <= 1e-10 * k.hitratio_penalty);
  CHECK(k.objective == doctest::Approx(k.pnl - k.inventory_penalty - k.hitratio_penalty - k.terminal_penalty).epsilon(1e-14));
}

TEST_CASE("sweep axes") {
  const MarketSpec tier = bundled_scenario("two_tier");
  CHECK(apply_axis(tier, SweepAxis::kappa, 3.0).targets.kappa[1] == 3.0);
  const MarketSpec none = apply_axis(tier, SweepAxis::intensity_ratio, 0.0);
  CHECK(none.n_tiers() == 1);
  CHECK(none.tiers[0] == "target");
  const MarketSpec five = apply_axis(tier, SweepAxis::intensity_ratio, 5.0);
  CHECK(five.arrivals.lambda_at(0, 0, Side::ask, 1) == 5.0 * five.arrivals.lambda_at(0, 1, Side::ask, 1));
  const MarketSpec bonds = bundled_scenario("two_bond");
  CHECK(apply_axis(bonds, SweepAxis::correlation, 0.4).risk.sigma_cov(0, 1) == doctest::Approx(0.4));
  CHECK_THROWS_AS(apply_axis(tier, SweepAxis::kappa, -1.0), ConfigError);
  CHECK_THROWS_AS(apply_axis(tier, SweepAxis::correlation, 0.5), ConfigError);
  CHECK_THROWS_AS(parse_axis("rho"), ConfigError);
}

TEST_CASE("sweep rows and CSV") {
  MarketSpec spec = bundled_scenario("baseline");
  spec.lattice.q_max = 40.0;
  spec.risk.horizon = 0.2;
  const auto rows = sweep(spec, SweepAxis::kappa, {0.0, 10.0});
  REQUIRE(rows.size() == 2u);
  for (const auto& r : rows) {
    CHECK(r.ok);
    CHECK(r.solve_mode == "exact");
  }
  CHECK(std::abs(rows[1].kpi.hit_ratio[0] - 0.1) < std::abs(rows[0].kpi.hit_ratio[0] - 0.1));
  std::ostringstream os;
  write_sweep_csv(os, spec, SweepAxis::kappa, rows);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "kappa,hit_ratio_client,objective,pnl,inv_penalty,hr_penalty,terminal_penalty,solve_mode,wall_time_s,error");
  int n = 0;
  while (std::getline(in, line)) {
    CHECK(line.find(",0.000000000,") != std::string::npos);  // no wall time without timing
    ++n;
  }
  CHECK(n == 2);

  const SweepRow bad = sweep_point(spec, SweepAxis::kappa, -2.0);
  CHECK_FALSE(bad.ok);
  CHECK_FALSE(bad.error.empty());
}
