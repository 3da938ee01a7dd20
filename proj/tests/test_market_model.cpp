#include "oracles.hpp"
#include "support.hpp"

#include "hrmm/scenario.hpp"

#include <doctest.h>

#include <random>

using namespace hrmm;
using testing_support::rel_err;

TEST_CASE("logistic fill probability values and limits") {
  const FillCurve c{2.0, 2.0};
  CHECK(fill_probability(c, 0.0) == doctest::Approx(1.0 / (1.0 + std::exp(2.0))).epsilon(1e-15));
  CHECK(fill_probability(c, 0.0) == doctest::Approx(0.119203).epsilon(1e-6));
  CHECK(fill_probability(c, 1e3) == doctest::Approx(0.0));
  CHECK(fill_probability(c, -1e3) == doctest::Approx(1.0));
  CHECK(std::abs(fill_probability(c, 1.0) - oracle::fill(2.0, 2.0, 1.0)) <= 1e-12);
  CHECK_THROWS_AS(fill_probability(c, std::nan("")), Error);
}

TEST_CASE("fill probability derivatives match finite differences") {
  const FillCurve c{1.5, 1.5};
  for (double d : {-2.0, -0.3, 0.0, 0.7, 3.0}) {
    const auto f = [&](double x) { return fill_probability(c, x); };
    CHECK(rel_err(fill_probability_d1(c, d), oracle::central_difference(f, d, 1e-5)) < 1e-7);
    const auto f1 = [&](double x) { return fill_probability_d1(c, x); };
    CHECK(std::abs(fill_probability_d2(c, d) - oracle::central_difference(f1, d, 1e-5)) < 1e-8);
  }
}

TEST_CASE("fill probability is strictly decreasing inside (0, 1)") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> a(-3.0, 3.0), b(0.2, 4.0), d(-50.0, 50.0);
  for (int curve = 0; curve < 20; ++curve) {
    const FillCurve c{a(rng), b(rng)};
    std::vector<double> xs(1000);
    for (auto& x : xs) x = d(rng) / 5.0;
    // past |alpha + beta delta| ~ 36 the probability rounds to exactly 0 or 1
    std::erase_if(xs, [&](double x) { return std::abs(c.alpha + c.beta * x) > 20.0; });
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    for (std::size_t i = 1; i < xs.size(); ++i) {
      const double f0 = fill_probability(c, xs[i - 1]);
      const double f1 = fill_probability(c, xs[i]);
      REQUIRE(f1 < f0);
      REQUIRE(f1 > 0.0);
      REQUIRE(f0 < 1.0);
    }
  }
}

TEST_CASE("fill inverse") {
  const FillCurve c{2.0, 2.0};
  CHECK(std::abs(fill_inverse(c, 1.0 / (1.0 + std::exp(2.0)))) < 1e-14);
  CHECK(fill_inverse(c, 0.5) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK_THROWS_AS(fill_inverse(c, 0.0), NumericalError);
  CHECK_THROWS_AS(fill_inverse(c, 1.0), NumericalError);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    REQUIRE(std::abs(fill_probability(c, fill_inverse(c, x)) - x) < 1e-10);
  }
}

TEST_CASE("fill inverse round trip over the desk range") {
  for (const FillCurve c : {FillCurve{2.0, 2.0}, FillCurve{1.5, 1.5}, FillCurve{1.0, 1.0}}) {
    for (double d = -50.0; d <= 50.0; d += 0.5) {
      const double f = fill_probability(c, d);
      if (f <= 1e-300 || f >= 1.0) continue;  // beyond double precision
      const double back = fill_inverse(c, f);
      // near f = 1 the information sits in 1 - f, which loses relative precision fast
      if (c.alpha + c.beta * d > -10.0) REQUIRE(std::abs(back - d) < 1e-10);
    }
  }
}

TEST_CASE("fill intensity") {
  const FillCurve c{2.0, 2.0};
  CHECK(fill_intensity(500.0, c, 0.0) == doctest::Approx(59.6015).epsilon(1e-6));
  CHECK(fill_intensity(0.0, c, 1.3) == 0.0);
  for (double d : {-1.0, 0.0, 0.4, 2.5}) CHECK(fill_intensity(50.0, c, d) == doctest::Approx(0.1 * fill_intensity(500.0, c, d)).epsilon(1e-15));
}

TEST_CASE("notional scale") {
  const MarketSpec baseline = bundled_scenario("baseline");
  CHECK(notional_scale(baseline, 0) == doctest::Approx(5000.0));
  const MarketSpec two_tier = bundled_scenario("two_tier");
  CHECK(notional_scale(two_tier, 1) == doctest::Approx(500.0));

  MarketSpec single = make_market({"B1"}, {"t"}, {1.0, 5.0, 20.0});
  single.arrivals.lambda_at(0, 0, Side::ask, 1) = 10.0;
  CHECK(notional_scale(single, 0) == doctest::Approx(50.0));
}

TEST_CASE("instantaneous hit ratio") {
  const MarketSpec spec = bundled_scenario("baseline");
  const int R = spec.n_rungs();

  SUBCASE("constant fill probability factors out") {
    std::vector<double> quotes(static_cast<std::size_t>(R));
    for (int i = 0; i < R; ++i) quotes[static_cast<std::size_t>(i)] = fill_inverse(spec.curve(i), 0.23);
    CHECK(instantaneous_hit_ratio(spec, quotes, 0) == doctest::Approx(0.23).epsilon(1e-12));
  }
  SUBCASE("single active rung") {
    MarketSpec one = make_market({"B1"}, {"t"}, {1.0, 5.0, 20.0});
    one.arrivals.lambda_at(0, 0, Side::bid, 2) = 7.0;
    one.arrivals.fill_at(0, 0, Side::bid, 2) = FillCurve{1.0, 1.0};
    std::vector<double> quotes(static_cast<std::size_t>(one.n_rungs()), std::nan(""));
    quotes[static_cast<std::size_t>(one.arrivals.index(0, 0, Side::bid, 2))] = 0.4;
    CHECK(instantaneous_hit_ratio(one, quotes, 0) == doctest::Approx(oracle::fill(1.0, 1.0, 0.4)).epsilon(1e-14));
  }
  SUBCASE("direct summation oracle, scale invariance, bounds") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-3.0, 5.0);
    std::vector<double> quotes(static_cast<std::size_t>(R));
    for (auto& q : quotes) q = d(rng);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < R; ++i) {
      const double z = spec.size_of(i);
      num += z * spec.lambda(i) * oracle::fill(spec.curve(i).alpha, spec.curve(i).beta, quotes[static_cast<std::size_t>(i)]);
      den += z * spec.lambda(i);
    }
    const double r = instantaneous_hit_ratio(spec, quotes, 0);
    CHECK(std::abs(r - num / den) < 1e-12);
    CHECK(r > 0.0);
    CHECK(r < 1.0);
    MarketSpec scaled = spec;
    for (auto& l : scaled.arrivals.lambda) l *= 3.7;
    CHECK(std::abs(instantaneous_hit_ratio(scaled, quotes, 0) - r) < 1e-14);
  }
  SUBCASE("missing quote on an active rung") {
    std::vector<double> quotes(static_cast<std::size_t>(R), 0.5);
    quotes[3] = std::nan("");
    CHECK_THROWS_AS(instantaneous_hit_ratio(spec, quotes, 0), NumericalError);
  }
}

TEST_CASE("validation rejects broken instances") {
  const MarketSpec good = bundled_scenario("baseline");
  CHECK_NOTHROW(validate(good));
  auto broken = [&](auto&& mutate) {
    MarketSpec s = good;
    mutate(s);
    return s;
  };
  CHECK_THROWS_AS(validate(broken([](MarketSpec& s) { s.ladder.sizes = {1.0, 1.0, 20.0}; })), ConfigError);
  CHECK_THROWS_AS(validate(broken([](MarketSpec& s) { s.ladder.sizes = {5.0, 1.0, 20.0}; })), ConfigError);
  CHECK_THROWS_AS(validate(broken([](MarketSpec& s) { s.arrivals.lambda[0] = -1.0; })), ConfigError);
  CHECK_THROWS_AS(validate(broken([](MarketSpec& s) { s.arrivals.fill[0].beta = 0.0; })), ConfigError);
  CHECK_THROWS_AS(validate(broken([](MarketSpec& s) { for (auto& l : s.arrivals.lambda) l = 0.0; })), ConfigError);
  CHECK_THROWS_AS(validate(broken([](MarketSpec& s) { s.risk.phi = -1.0; })), ConfigError);
  CHECK_THROWS_AS(validate(broken([](MarketSpec& s) { s.risk.eta = -0.1; })), ConfigError);
  CHECK_THROWS_AS(validate(broken([](MarketSpec& s) { s.risk.horizon = 0.0; })), ConfigError);
  CHECK_THROWS_AS(validate(broken([](MarketSpec& s) { s.risk.sigma_cov(0, 0) = -1.0; })), ConfigError);
  CHECK_THROWS_AS(validate(broken([](MarketSpec& s) { s.targets.r_star[0] = 1.0; })), ConfigError);
  CHECK_THROWS_AS(validate(broken([](MarketSpec& s) { s.targets.kappa[0] = -2.0; })), ConfigError);
  CHECK_THROWS_AS(validate(broken([](MarketSpec& s) { s.targets.targeted = {3}; })), ConfigError);
  CHECK_THROWS_AS(validate(broken([](MarketSpec& s) { s.lattice.q_max = 0.0; })), ConfigError);

  MarketSpec two = bundled_scenario("two_bond");
  two.risk.sigma_cov(0, 1) = 0.5;
  CHECK_THROWS_AS(validate(two), ConfigError);  // not symmetric
  two.risk.sigma_cov(1, 0) = 0.5;
  CHECK_NOTHROW(validate(two));
  two.risk.sigma_cov << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(validate(two), ConfigError);  // indefinite
}

TEST_CASE("side symmetry detection") {
  CHECK(side_symmetric(bundled_scenario("baseline")));
  CHECK(side_symmetric(bundled_scenario("two_bond")));
  CHECK_FALSE(side_symmetric(bundled_scenario("asym_toy")));
}
