#include "begv_oracle.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include "hrmm/begv.hpp"
#include "hrmm/scenario.hpp"

#include <doctest.h>

#include <chrono>
#include <random>

using namespace hrmm;
using testing_support::rel_err;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

RiskSpec risk_of(double phi, double eta, const Matrix& sigma, double T) {
  RiskSpec r;
  r.phi = phi;
  r.eta = eta;
  r.sigma_cov = sigma;
  r.horizon = T;
  return r;
}

Matrix two_bond_sigma(double rho) {
  Matrix s(2, 2);
  s << 1.0, rho, rho, 1.0;
  return s;
}

}  // namespace

TEST_CASE("Jacobi eigendecomposition against Eigen") {
  std::mt19937_64 rng(3);
  for (int n = 1; n <= 6; ++n) {
    for (int rep = 0; rep < 5; ++rep) {
      const Matrix S = oracle::random_psd(rng, n);
      const auto eig = jacobi_eigen<double>(S);
      Eigen::SelfAdjointEigenSolver<Matrix> ref(S);
      CHECK((eig.values - ref.eigenvalues()).cwiseAbs().maxCoeff() <= 1e-12 * ref.eigenvalues().cwiseAbs().maxCoeff());
      CHECK(max_abs(eig.vectors.transpose() * eig.vectors - Matrix::Identity(n, n)) <= 1e-12);
      CHECK(max_abs(eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose() - S) <= 1e-12 * max_abs(S));

      const Matrix R = sym_sqrt(S);
      CHECK(max_abs(R - oracle::sqrtm_psd(S)) <= 1e-11 * std::max(1.0, max_abs(R)));
      CHECK(max_abs(R * R - S) <= 1e-11 * max_abs(S));
      const Matrix Ri = sym_inverse_sqrt(S);
      CHECK(max_abs(Ri * S * Ri - Matrix::Identity(n, n)) <= 1e-10);
    }
  }
  Matrix neg = Matrix::Identity(2, 2);
  neg(1, 1) = -1.0;
  CHECK_THROWS_AS(sym_sqrt(neg), NumericalError);
  CHECK_THROWS_AS(sym_inverse_sqrt(Matrix(Matrix::Zero(2, 2))), NumericalError);
  // a rank-deficient PSD matrix still has a square root
  Matrix r1(2, 2);
  r1 << 1.0, 1.0, 1.0, 1.0;
  CHECK(max_abs(sym_sqrt(r1) * sym_sqrt(r1) - r1) <= 1e-12);
}

TEST_CASE("curvature matrix by direct summation") {
  for (const char* name : {"baseline", "two_tier", "two_bond"}) {
    const MarketSpec spec = bundled_scenario(name);
    const HamiltonianBook book(spec);
    const oracle::Moments mom(spec);
    const Matrix D = curvature_matrix_D(spec, book);
    CHECK(max_abs(D - Matrix(mom.d.asDiagonal())) <= 1e-6 * mom.d.maxCoeff());
    CHECK(max_abs(D - Matrix(D.diagonal().asDiagonal())) == 0.0);
  }
}

TEST_CASE("Riccati closed form against RK4") {
  struct Case {
    Matrix D;
    RiskSpec risk;
  };
  std::vector<Case> cases;
  const MarketSpec base = bundled_scenario("baseline");
  const Matrix D1 = curvature_matrix_D(base, HamiltonianBook(base));
  const MarketSpec tb = bundled_scenario("two_bond");
  const Matrix D2 = curvature_matrix_D(tb, HamiltonianBook(tb));
  Matrix s1(1, 1);
  s1 << 1.0;
  cases.push_back({D1, risk_of(1.0, 0.0, s1, 1.0)});
  cases.push_back({D2, risk_of(1.0, 0.0, two_bond_sigma(0.8), 1.0)});
  // tanh branch with a terminal penalty, the flat branch, coth (eta above the stationary level) and phi = 0
  cases.push_back({D2, risk_of(1.0, 0.01, two_bond_sigma(0.8), 1.0)});
  const double g1 = std::sqrt(D1(0, 0));
  cases.push_back({D1, risk_of(1.0, 1.0 / g1, s1, 1.0)});
  cases.push_back({D2, risk_of(1.0, 3.0, two_bond_sigma(0.8), 1.0)});
  cases.push_back({D2, risk_of(0.0, 0.5, two_bond_sigma(0.8), 1.0)});
  cases.push_back({D2, risk_of(0.0, 0.0, two_bond_sigma(0.8), 1.0)});

  for (const auto& c : cases) {
    const RiccatiFlow flow(c.D, c.risk);
    for (double t : {0.0, 0.3, 0.9, 1.0}) {
      const Matrix ref = oracle::rk4_riccati(c.D, c.risk.phi, c.risk.sigma_cov, c.risk.eta, 1.0, t);
      const Matrix A = flow.A(t);
      CHECK(max_abs(A - ref) <= 1e-8);
      CHECK(max_abs(A - A.transpose()) == 0.0);
    }
  }
}

TEST_CASE("Riccati runtime") {
  const MarketSpec tb = bundled_scenario("two_bond");
  const Matrix D = curvature_matrix_D(tb, HamiltonianBook(tb));
  const auto start = std::chrono::steady_clock::now();
  Matrix acc = Matrix::Zero(2, 2);
  for (int i = 0; i <= 1000; ++i) acc += riccati_closed_form(D, tb.risk, i / 1000.0);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(acc.allFinite());
  CHECK(secs < 1.0);
}

TEST_CASE("stationary Riccati solution") {
  for (const char* name : {"baseline", "two_bond"}) {
    const MarketSpec spec = bundled_scenario(name);
    const Matrix D = curvature_matrix_D(spec, HamiltonianBook(spec));
    const Matrix A = riccati_stationary(D, spec.risk);
    const Matrix target = spec.risk.phi * spec.risk.sigma_cov;
    CHECK(max_abs(A * D * A - target) <= 1e-10 * max_abs(target));
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(A).eigenvalues().minCoeff() > 0.0);
    // long horizons forget the terminal condition
    RiskSpec longer = spec.risk;
    longer.horizon = 40.0;
    CHECK(max_abs(riccati_closed_form(D, longer, 0.0) - A) <= 1e-12 * max_abs(A) + 1e-15);
    // square-root form: sqrt(phi) D^{-1/2} (D^{1/2} Sigma D^{1/2})^{1/2} D^{-1/2}
    const Matrix Dh = oracle::sqrtm_psd(D);
    const Matrix Dih = Dh.inverse();
    const Matrix ref = std::sqrt(spec.risk.phi) * Dih * oracle::sqrtm_psd(Dh * spec.risk.sigma_cov * Dh) * Dih;
    CHECK(max_abs(A - ref) <= 1e-12 * max_abs(ref));
  }
  RiskSpec flat = bundled_scenario("baseline").risk;
  flat.phi = 0.0;
  CHECK_THROWS_AS(riccati_stationary(Matrix::Identity(1, 1), flat), NumericalError);
}

TEST_CASE("constant dual closure") {
  const MarketSpec spec = bundled_scenario("baseline");
  const HamiltonianBook book(spec);
  const oracle::Moments mom(spec);
  const Matrix A = riccati_closed_form(curvature_matrix_D(spec, book), spec.risk, 0.0);
  const Vector xi = xi_explicit(spec, book, A);
  CHECK(rel_err(xi(0), mom.kappa_tilde[0] * mom.y(0, A)) < 1e-6);

  const auto closures = tier_closures(spec, book);
  CHECK(closures[0].kappa_tilde > 0.0);
  CHECK(closures[0].kappa_tilde < spec.targets.kappa[0]);
  CHECK(closures[0].kappa_tilde < mom.W[0] / mom.sum_h2[0]);

  MarketSpec off = spec;
  off.targets.kappa[0] = 0.0;
  CHECK(xi_explicit(off, HamiltonianBook(off), A)(0) == 0.0);

  const MarketSpec asym = bundled_scenario("asym_toy");
  CHECK_THROWS_AS(xi_explicit(asym, HamiltonianBook(asym), A), ConfigError);
}

TEST_CASE("fixed-point dual closure") {
  const MarketSpec spec = bundled_scenario("baseline");
  const HamiltonianBook book(spec);
  const Matrix A = riccati_closed_form(curvature_matrix_D(spec, book), spec.risk, 0.0);
  const Vector B0 = Vector::Zero(1);
  for (double q : {0.0, 7.0, 25.0, 50.0}) {
    const Vector qp = Vector::Constant(1, q), qm = Vector::Constant(1, -q);
    const double plus = xi_fixed_point(spec, book, {A, B0}, qp)(0);
    const double minus = xi_fixed_point(spec, book, {A, B0}, qm)(0);
    CHECK(std::abs(plus - minus) <= 1e-10);
    CHECK(std::abs(plus - oracle::xi_oracle(spec, 0, A, B0, qp)) <= 1e-6);
  }
}

TEST_CASE("local quadratic dual closure matches a finite-difference Hessian") {
  const MarketSpec spec = bundled_scenario("baseline");
  const HamiltonianBook book(spec);
  const Matrix A = riccati_closed_form(curvature_matrix_D(spec, book), spec.risk, 0.0);
  const LocalQuadraticXi lq = xi_local_quadratic(spec, book, A);
  const auto xi = [&](double q) { return xi_fixed_point(spec, book, {A, Vector::Zero(1)}, Vector::Constant(1, q))(0); };
  CHECK(std::abs(lq.anchor(0) - xi(0.0)) == 0.0);
  // Richardson-extrapolated second difference
  const double h = 1.0;
  const double d_h = oracle::second_difference(xi, 0.0, h);
  const double d_2h = oracle::second_difference(xi, 0.0, 2.0 * h);
  const double fd = (4.0 * d_h - d_2h) / 3.0;
  CHECK(rel_err(lq.hessian[0](0, 0), fd) <= 1e-3);
  CHECK(lq.value(0, Vector::Zero(1)) == lq.xi0(0));
}

TEST_CASE("local quadratic Hessian on two bonds") {
  MarketSpec spec = bundled_scenario("two_bond");
  const HamiltonianBook book(spec);
  const Matrix A = riccati_closed_form(curvature_matrix_D(spec, book), spec.risk, 0.0);
  const LocalQuadraticXi lq = xi_local_quadratic(spec, book, A);
  const auto xi = [&](double a, double b) {
    Vector q(2);
    q << a, b;
    return xi_fixed_point(spec, book, {A, Vector::Zero(2)}, q)(0);
  };
  const double h = 1.0;
  Matrix fd(2, 2);
  fd(0, 0) = (xi(h, 0) - 2.0 * xi(0, 0) + xi(-h, 0)) / (h * h);
  fd(1, 1) = (xi(0, h) - 2.0 * xi(0, 0) + xi(0, -h)) / (h * h);
  fd(0, 1) = fd(1, 0) = (xi(h, h) - xi(h, -h) - xi(-h, h) + xi(-h, -h)) / (4.0 * h * h);
  const Matrix& H = lq.hessian[0];
  CHECK(max_abs(H - fd) <= 1e-2 * max_abs(H));
  CHECK(max_abs(lq.hessian[1]) == 0.0);  // background tier carries no target
}

TEST_CASE("symmetric markets degenerate: h = 0, Dcal = D, B = 0") {
  for (const char* name : {"baseline", "two_tier", "two_bond"}) {
    const MarketSpec spec = bundled_scenario(name);
    const HamiltonianBook book(spec);
    const AsymCoefficients c = asym_coefficients(spec, book);
    CHECK(c.symmetric);
    CHECK(max_abs(c.h11) == 0.0);
    CHECK(max_abs(c.h12) == 0.0);
    CHECK(max_abs(c.h22) == 0.0);
    CHECK(max_abs(c.Dcal - c.D) == 0.0);
    const QuadraticValue v(spec, book);
    for (double t : {0.0, 0.5}) CHECK(v.B(t).cwiseAbs().maxCoeff() == 0.0);
    CHECK(v.B_stat().cwiseAbs().maxCoeff() == 0.0);
    const Matrix A = v.A(0.0);
    CHECK(v.Y(A).cwiseAbs().maxCoeff() == 0.0);
    // closure with zero h agrees with the constant closure exactly
    const Vector q = Vector::Constant(spec.n_bonds(), 13.0);
    const Vector a = v.xi({A, v.B(0.0)}, q);
    const Vector b = xi_explicit(spec, book, A);
    CHECK(max_abs(a - b) <= 1e-12);
  }
}

TEST_CASE("asymmetric coefficients") {
  const MarketSpec spec = bundled_scenario("asym_toy");
  const HamiltonianBook book(spec);
  const oracle::Moments mom(spec);
  const AsymCoefficients c = asym_coefficients(spec, book);
  CHECK_FALSE(c.symmetric);
  CHECK(max_abs(c.h11 - mom.h11) <= 1e-6 * max_abs(mom.h11));
  CHECK(max_abs(c.h12 - mom.h12) <= 1e-6 * max_abs(mom.h12));
  CHECK(max_abs(c.h22 - mom.h22) <= 1e-6 * max_abs(mom.h22));
  CHECK(max_abs(c.Dcal - mom.Dcal) <= 1e-6 * max_abs(mom.Dcal));
  CHECK(c.Dcal(0, 0) < c.D(0, 0));
  // bids are more frequent, so bid Hamiltonians dominate
  CHECK(c.h12(0, 0) > 0.0);
  CHECK(c.h11(0, 0) < 0.0);

  // one tier keeps Dcal positive for any kappa: the correction never exceeds the rung-wise harmonic bound
  MarketSpec hot = spec;
  hot.targets.kappa[0] = 1e9;
  const AsymCoefficients ch = asym_coefficients(hot, HamiltonianBook(hot));
  const oracle::Moments mh(hot);
  CHECK(max_abs(ch.Dcal - mh.Dcal) <= 1e-6 * max_abs(mh.Dcal));
  CHECK(ch.Dcal(0, 0) > 0.0);
}

TEST_CASE("linear coefficient B against RK4") {
  const MarketSpec spec = bundled_scenario("asym_toy");
  const HamiltonianBook book(spec);
  const oracle::Moments mom(spec);
  const QuadraticValue v(spec, book);
  const auto Y = [&](const Matrix& A) { return mom.Y(A); };
  for (double t : {0.0, 0.25, 0.5, 0.9, 1.0}) {
    const auto [A_ref, B_ref] =
        oracle::rk4_riccati_linear(mom.Dcal, spec.risk.phi, spec.risk.sigma_cov, spec.risk.eta, 1.0, t, Y);
    CHECK(max_abs(v.A(t) - A_ref) <= 1e-8);
    CHECK((v.B(t) - B_ref).cwiseAbs().maxCoeff() <= 1e-7);
  }
  CHECK(v.B(1.0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(v.B(0.0)(0) != 0.0);
}

TEST_CASE("stationary linear coefficient") {
  const MarketSpec spec = bundled_scenario("asym_toy");
  const HamiltonianBook book(spec);
  const oracle::Moments mom(spec);
  const QuadraticValue v(spec, book);
  const Matrix& A = v.A_stat();
  const Vector& B = v.B_stat();
  const Vector Y = mom.Y(A);
  CHECK((A * mom.Dcal * B - Y).norm() <= 1e-8 * Y.norm());
  CHECK(max_abs(A * mom.Dcal * A - spec.risk.phi * spec.risk.sigma_cov) <= 1e-10 * spec.risk.phi);

  MarketSpec longer = spec;
  longer.risk.horizon = 20.0;
  const QuadraticValue vl(longer, book);
  CHECK((vl.B(0.0) - B).cwiseAbs().maxCoeff() <= 1e-7 * std::max(1.0, B.cwiseAbs().maxCoeff()));
}

TEST_CASE("asymmetric dual closure solves the linearized first-order condition") {
  const MarketSpec spec = bundled_scenario("asym_toy");
  const HamiltonianBook book(spec);
  const oracle::Moments mom(spec);
  const QuadraticValue v(spec, book);
  const QuadraticFrame f = v.frame(0.0);
  for (double q : {-40.0, -5.0, 0.0, 3.0, 60.0}) {
    const Vector qv = Vector::Constant(1, q);
    double num = mom.r_star[0] + mom.sum_h1[0] / mom.W[0];
    for (int i = 0; i < spec.n_rungs(); ++i) {
      if (spec.lambda(i) <= 0.0) continue;
      const Rung r = spec.arrivals.rung(i);
      const double s = r.side == Side::bid ? 1.0 : -1.0;
      const double z = spec.ladder[r.size];
      const double p = s * ((f.A * qv)(0) + f.B(0)) + 0.5 * z * f.A(0, 0);
      num += z * hamiltonian_eval(spec.lambda(i), spec.curve(i), 0.0).H2 * p / mom.W[0];
    }
    const double expect = num * mom.kappa_tilde[0];
    CHECK(std::abs(xi_asym(v, f, qv)(0) - expect) <= 1e-8 * std::max(1.0, std::abs(expect)));
  }
  // affine in q
  const auto x = [&](double q) { return xi_asym(v, f, Vector::Constant(1, q))(0); };
  CHECK(std::abs(x(10.0) - 2.0 * x(5.0) + x(0.0)) <= 1e-12);
}
