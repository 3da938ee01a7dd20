#include "hrmm/begv.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace hrmm {

namespace {
constexpr const char* kModule = "begv";
constexpr double kLn2 = 0.69314718055994530942;

double log_cosh(double a) {
  const double x = std::abs(a);
  return x + std::log1p(std::exp(-2.0 * x)) - kLn2;
}

// a > 0
double log_sinh(double a) { return a + std::log1p(-std::exp(-2.0 * a)) - kLn2; }

double min_eigenvalue(const Matrix& S) { return jacobi_eigen<double>(S).values.minCoeff(); }

void require_square(const Matrix& S, Eigen::Index n, const char* what) {
  if (S.rows() != n || S.cols() != n) throw ConfigError(kModule, std::string(what) + " has the wrong dimension");
}
}  // namespace

Vector curvature_diagonal(const MarketSpec& spec, const HamiltonianBook& book) {
  Vector d = Vector::Zero(spec.n_bonds());
  for (int i = 0; i < spec.n_rungs(); ++i) {
    if (!book.active(i)) continue;
    const double h2 = book.constants(i).H2_0;
    if (!(h2 > 0.0)) {
      throw NumericalError(kModule, "Hamiltonian curvature at p = 0 is not positive (corrupt table)", "rung " + std::to_string(i));
    }
    d(spec.arrivals.rung(i).bond) += spec.size_of(i) * h2;
  }
  for (int m = 0; m < d.size(); ++m) {
    if (!(d(m) > 0.0)) throw NumericalError(kModule, "bond without any flow has zero curvature", spec.bonds[static_cast<std::size_t>(m)]);
  }
  return d;
}

Matrix curvature_matrix_D(const MarketSpec& spec, const HamiltonianBook& book) {
  return curvature_diagonal(spec, book).asDiagonal();
}

RiccatiFlow::RiccatiFlow(const Matrix& Dm, const RiskSpec& risk) : horizon_(risk.horizon) {
  const Eigen::Index n = Dm.rows();
  require_square(Dm, n, "curvature matrix");
  require_square(risk.sigma_cov, n, "covariance matrix");
  terminal_ = symmetrize(risk.eta * risk.sigma_cov);
  if (!(risk.phi >= 0.0) || !(risk.eta >= 0.0)) throw ConfigError(kModule, "phi and eta must be non-negative");
  const auto dm_eig = jacobi_eigen<double>(Dm);
  if (!(dm_eig.values.minCoeff() > 0.0)) {
    std::ostringstream os;
    os << "min eigenvalue " << dm_eig.values.minCoeff();
    throw NumericalError(kModule, "curvature matrix is not positive definite", os.str());
  }
  d_half_ = apply_spectral(dm_eig, [](double x) { return std::sqrt(x); });
  d_inv_half_ = apply_spectral(dm_eig, [](double x) { return 1.0 / std::sqrt(x); });
  const Matrix S = symmetrize(d_half_ * risk.sigma_cov * d_half_);

  g_.resize(n);
  k0_.resize(n);
  shift_ = Vector::Zero(n);
  branch_.assign(static_cast<std::size_t>(n), Branch::hyperbolic);
  if (risk.phi > 0.0) {
    const auto eig = jacobi_eigen<double>(Matrix(risk.phi * S));
    basis_ = eig.vectors;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double g2 = std::max(eig.values(i), 0.0);
      g_(i) = std::sqrt(g2);
      k0_(i) = risk.eta * g2 / risk.phi;
    }
    const double top = eig.values.maxCoeff();
    stationary_ = top > 0.0 && eig.values.minCoeff() > 1e-12 * top;
  } else {
    const auto eig = jacobi_eigen<double>(Matrix(risk.eta * S));
    basis_ = eig.vectors;
    g_.setZero();
    for (Eigen::Index i = 0; i < n; ++i) k0_(i) = std::max(eig.values(i), 0.0);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& b = branch_[static_cast<std::size_t>(i)];
    if (g_(i) == 0.0) continue;
    const double r = k0_(i) / g_(i);
    if (std::abs(r - 1.0) <= 1e-12) {
      b = Branch::flat;
    } else if (r < 1.0) {
      b = Branch::tanh;
      shift_(i) = std::atanh(r);
    } else {
      b = Branch::coth;
      shift_(i) = std::atanh(1.0 / r);
    }
  }
}

Vector RiccatiFlow::k(double x) const {
  Vector out(g_.size());
  for (Eigen::Index i = 0; i < g_.size(); ++i) {
    const double g = g_(i);
    switch (branch_[static_cast<std::size_t>(i)]) {
      case Branch::tanh: out(i) = g * std::tanh(g * x + shift_(i)); break;
      case Branch::flat: out(i) = g; break;
      case Branch::coth: out(i) = g / std::tanh(g * x + shift_(i)); break;
      case Branch::hyperbolic: out(i) = k0_(i) / (1.0 + k0_(i) * x); break;
    }
  }
  return out;
}

Vector RiccatiFlow::log_propagator(double x) const {
  Vector out(g_.size());
  for (Eigen::Index i = 0; i < g_.size(); ++i) {
    const double g = g_(i);
    const double c = shift_(i);
    switch (branch_[static_cast<std::size_t>(i)]) {
      case Branch::tanh: out(i) = log_cosh(g * x + c) - log_cosh(c); break;
      case Branch::flat: out(i) = g * x; break;
      case Branch::coth: out(i) = log_sinh(g * x + c) - log_sinh(c); break;
      case Branch::hyperbolic: out(i) = std::log1p(k0_(i) * x); break;
    }
  }
  return out;
}

Matrix RiccatiFlow::A(double t) const {
  const double tol = 1e-12 * std::max(1.0, horizon_);
  if (t < -tol || t > horizon_ + tol) {
    std::ostringstream os;
    os << "t=" << t << " horizon=" << horizon_;
    throw ConfigError(kModule, "time outside [0, T]", os.str());
  }
  const double x = std::max(0.0, horizon_ - t);
  if (x == 0.0) return terminal_;
  const Matrix K = basis_ * k(x).asDiagonal() * basis_.transpose();
  return symmetrize(d_inv_half_ * K * d_inv_half_);
}

Matrix RiccatiFlow::A_stationary() const {
  if (!stationary_) throw NumericalError(kModule, "no stationary solution: phi must be positive and Sigma non-singular");
  const Matrix G = basis_ * g_.asDiagonal() * basis_.transpose();
  return symmetrize(d_inv_half_ * G * d_inv_half_);
}

Matrix riccati_closed_form(const Matrix& Dm, const RiskSpec& risk, double t) { return RiccatiFlow(Dm, risk).A(t); }

Matrix riccati_stationary(const Matrix& Dm, const RiskSpec& risk) { return RiccatiFlow(Dm, risk).A_stationary(); }

double TierClosure::y(const Matrix& A) const {
  double acc = 0.0;
  for (Eigen::Index m = 0; m < z2h2.size(); ++m) acc += z2h2(m) * A(m, m);
  return y0 + acc / (2.0 * W);
}

std::vector<TierClosure> tier_closures(const MarketSpec& spec, const HamiltonianBook& book) {
  std::vector<TierClosure> out(static_cast<std::size_t>(spec.n_tiers()));
  for (int tau = 0; tau < spec.n_tiers(); ++tau) {
    auto& c = out[static_cast<std::size_t>(tau)];
    c.tier = tau;
    c.W = notional_scale(spec, tau);
    c.live = spec.targets.is_active(tau);
    if (spec.targets.is_targeted(tau)) {
      c.r_star = spec.targets.r_star[static_cast<std::size_t>(tau)];
      c.kappa = spec.targets.kappa[static_cast<std::size_t>(tau)];
    }
    c.z2h2 = Vector::Zero(spec.n_bonds());
  }
  std::vector<double> sum_h1(out.size(), 0.0), sum_h2(out.size(), 0.0);
  for (int i = 0; i < spec.n_rungs(); ++i) {
    if (!book.active(i)) continue;
    const Rung r = spec.arrivals.rung(i);
    const double z = spec.size_of(i);
    const auto& k = book.constants(i);
    sum_h1[static_cast<std::size_t>(r.tier)] += z * k.H1_0;
    sum_h2[static_cast<std::size_t>(r.tier)] += z * k.H2_0;
    out[static_cast<std::size_t>(r.tier)].z2h2(r.bond) += z * z * k.H2_0;
  }
  for (auto& c : out) {
    const auto t = static_cast<std::size_t>(c.tier);
    c.y0 = c.r_star + sum_h1[t] / c.W;
    if (c.live) c.kappa_tilde = 1.0 / (1.0 / c.kappa + sum_h2[t] / c.W);
  }
  return out;
}

Vector xi_explicit(const MarketSpec& spec, const HamiltonianBook& book, const Matrix& A) {
  if (!side_symmetric(spec)) {
    throw ConfigError(kModule, "constant dual closure needs side-symmetric intensities; use the asymmetric closure");
  }
  const auto closures = tier_closures(spec, book);
  Vector xi = Vector::Zero(spec.n_tiers());
  for (const auto& c : closures) {
    if (c.live) xi(c.tier) = c.kappa_tilde * c.y(A);
  }
  return xi;
}

Vector quadratic_marginal_costs(const MarketSpec& spec, const QuadraticFrame& frame, const Vector& q) {
  const Matrix& A = frame.A;
  if (q.size() != spec.n_bonds()) throw ConfigError(kModule, "inventory vector has the wrong dimension");
  const Vector Aq = A * q;
  const bool has_b = frame.B.size() > 0;
  Vector p = Vector::Constant(spec.n_rungs(), std::numeric_limits<double>::quiet_NaN());
  for (int i = 0; i < spec.n_rungs(); ++i) {
    if (spec.lambda(i) <= 0.0) continue;
    const Rung r = spec.arrivals.rung(i);
    const double sign = side_sign(r.side);
    const double z = spec.ladder[r.size];
    p(i) = sign * Aq(r.bond) + 0.5 * z * A(r.bond, r.bond) + (has_b ? sign * frame.B(r.bond) : 0.0);
  }
  return p;
}

Vector xi_fixed_point(const MarketSpec& spec, const HamiltonianBook& book, const QuadraticFrame& frame,
                      const Vector& q, const Vector* warm_start) {
  const Vector p = quadratic_marginal_costs(spec, frame, q);
  Vector xi = Vector::Zero(spec.n_tiers());
  std::vector<DualTerm> terms;
  for (int tau = 0; tau < spec.n_tiers(); ++tau) {
    if (!spec.targets.is_active(tau)) continue;
    terms.clear();
    for (int i = 0; i < spec.n_rungs(); ++i) {
      if (!book.active(i) || spec.arrivals.rung(i).tier != tau) continue;
      terms.push_back({&book.table(i), spec.size_of(i), p(i)});
    }
    const double warm = warm_start ? (*warm_start)(tau) : 0.0;
    xi(tau) = dual_inner_solve(terms, spec.targets.r_star[static_cast<std::size_t>(tau)],
                               spec.targets.kappa[static_cast<std::size_t>(tau)], notional_scale(spec, tau), warm)
                  .xi;
  }
  return xi;
}

LocalQuadraticXi xi_local_quadratic(const MarketSpec& spec, const HamiltonianBook& book, const Matrix& A) {
  if (!side_symmetric(spec)) throw ConfigError(kModule, "local quadratic dual closure needs side-symmetric intensities");
  const int M = spec.n_bonds();
  LocalQuadraticXi out;
  out.xi0 = xi_explicit(spec, book, A);
  out.anchor = xi_fixed_point(spec, book, {A, Vector::Zero(M)}, Vector::Zero(M));
  out.hessian.assign(static_cast<std::size_t>(spec.n_tiers()), Matrix::Zero(M, M));
  for (int tau = 0; tau < spec.n_tiers(); ++tau) {
    if (!spec.targets.is_active(tau)) continue;
    const double W = notional_scale(spec, tau);
    Vector weight = Vector::Zero(M);
    double curvature = 0.0;
    for (int i = 0; i < spec.n_rungs(); ++i) {
      if (!book.active(i)) continue;
      const Rung r = spec.arrivals.rung(i);
      if (r.tier != tau) continue;
      const double z = spec.ladder[r.size];
      const double zeta = 0.5 * z * A(r.bond, r.bond) - out.anchor(tau);
      const HamiltonianPoint h = hamiltonian_eval(spec.lambda(i), spec.curve(i), zeta);
      weight(r.bond) += z * h.H3;
      curvature += z * h.H2;
    }
    const double denom = 1.0 / spec.targets.kappa[static_cast<std::size_t>(tau)] + curvature / W;
    if (!(denom > 0.0)) throw NumericalError(kModule, "dual closure curvature is not positive", "tier " + spec.tiers[static_cast<std::size_t>(tau)]);
    Matrix num = Matrix::Zero(M, M);
    for (int m = 0; m < M; ++m) num += weight(m) * A.col(m) * A.col(m).transpose();
    out.hessian[static_cast<std::size_t>(tau)] = symmetrize(num / (W * denom));
  }
  return out;
}

AsymCoefficients asym_coefficients(const MarketSpec& spec, const HamiltonianBook& book) {
  const int M = spec.n_bonds();
  const int T = spec.n_tiers();
  AsymCoefficients c;
  c.symmetric = side_symmetric(spec);
  c.h11 = Matrix::Zero(M, T);
  c.h12 = Matrix::Zero(M, T);
  c.h22 = Matrix::Zero(M, T);
  c.D = curvature_matrix_D(spec, book);
  c.Dcal = c.D;
  if (c.symmetric) return c;

  for (int i = 0; i < spec.n_rungs(); ++i) {
    if (!book.active(i)) continue;
    const Rung r = spec.arrivals.rung(i);
    const double sign = side_sign(r.side);
    const double z = spec.ladder[r.size];
    const auto& k = book.constants(i);
    c.h11(r.bond, r.tier) += sign * z * k.H1_0;
    c.h12(r.bond, r.tier) += sign * z * k.H2_0;
    c.h22(r.bond, r.tier) += sign * z * z * k.H2_0;
  }
  const auto closures = tier_closures(spec, book);
  for (const auto& tc : closures) {
    if (!tc.live) continue;
    const Vector h = c.h12.col(tc.tier);
    c.Dcal -= (tc.kappa_tilde / tc.W) * h * h.transpose();
  }
  c.Dcal = symmetrize(c.Dcal);
  const double lo = min_eigenvalue(c.Dcal);
  if (!(lo > 0.0)) {
    std::ostringstream os;
    os << "min eigenvalue " << lo;
    throw NumericalError(kModule, "quadratic closure invalid: corrected curvature matrix is not positive definite; reduce kappa",
                         os.str());
  }
  return c;
}

QuadraticValue::QuadraticValue(const MarketSpec& spec, const HamiltonianBook& book)
    : n_bonds_(spec.n_bonds()), coef_(asym_coefficients(spec, book)), closures_(tier_closures(spec, book)), flow_(coef_.Dcal, spec.risk) {
  if (!flow_.has_stationary()) return;
  A_stat_ = flow_.A_stationary();
  if (symmetric()) {
    B_stat_ = Vector::Zero(spec.n_bonds());
    return;
  }
  const Vector inv_g = flow_.g().cwiseInverse();
  const Matrix G_inv = flow_.basis() * inv_g.asDiagonal() * flow_.basis().transpose();
  B_stat_ = flow_.d_inv_half() * G_inv * flow_.d_half() * Y(*A_stat_);
}

const Matrix& QuadraticValue::A_stat() const {
  if (!A_stat_) throw NumericalError(kModule, "no stationary solution: phi must be positive and Sigma non-singular");
  return *A_stat_;
}

const Vector& QuadraticValue::B_stat() const {
  if (!B_stat_) throw NumericalError(kModule, "no stationary solution: phi must be positive and Sigma non-singular");
  return *B_stat_;
}

Vector QuadraticValue::Y(const Matrix& A) const {
  const int M = static_cast<int>(A.rows());
  Vector v = Vector::Zero(M);
  for (int m = 0; m < M; ++m) {
    for (const auto& tc : closures_) {
      const int tau = tc.tier;
      v(m) -= coef_.h11(m, tau) + 0.5 * A(m, m) * coef_.h22(m, tau);
      if (tc.live) v(m) += tc.kappa_tilde * tc.y(A) * coef_.h12(m, tau);
    }
  }
  return A * v;
}

Vector QuadraticValue::B(double t) const {
  const int M = n_bonds_;
  const double x = horizon() - t;
  if (symmetric() || x <= 0.0) return Vector::Zero(M);
  (void)A(t);  // range check on t

  const Matrix to_hat = flow_.basis().transpose() * flow_.d_half();
  const Vector log_x = flow_.log_propagator(x);
  auto integrand = [&](double s) -> Vector {
    const Vector y_hat = to_hat * Y(A(horizon() - s));
    return ((flow_.log_propagator(s) - log_x).array().exp() * y_hat.array()).matrix();
  };
  auto simpson = [&](int panels) {
    const double h = x / panels;
    Vector acc = integrand(0.0) + integrand(x);
    for (int j = 1; j < panels; ++j) acc += (j % 2 ? 4.0 : 2.0) * integrand(j * h);
    return Vector(acc * (h / 3.0));
  };

  int panels = std::max(16, 2 * static_cast<int>(std::ceil(256.0 * x)));
  Vector prev = simpson(panels);
  double change = std::numeric_limits<double>::infinity();
  for (int round = 0; round < 10; ++round) {
    panels *= 2;
    const Vector next = simpson(panels);
    change = (next - prev).cwiseAbs().maxCoeff();
    prev = next;
    if (change <= 1e-8 * std::max(1.0, next.cwiseAbs().maxCoeff())) {
      return flow_.d_inv_half() * flow_.basis() * prev;
    }
  }
  std::ostringstream os;
  os << "achieved change " << change << " with " << panels << " panels";
  throw NumericalError(kModule, "quadrature for the linear coefficient did not converge", os.str());
}

Vector QuadraticValue::xi(const QuadraticFrame& frame, const Vector& q) const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(closures_.size()));
  const Vector Aq = frame.A * q;
  const bool has_b = frame.B.size() > 0;
  for (const auto& tc : closures_) {
    if (!tc.live) continue;
    double lin = 0.0;
    for (int m = 0; m < static_cast<int>(Aq.size()); ++m) {
      lin += coef_.h12(m, tc.tier) * (Aq(m) + (has_b ? frame.B(m) : 0.0));
    }
    out(tc.tier) = tc.kappa_tilde * tc.y(frame.A) + tc.kappa_tilde / tc.W * lin;
  }
  return out;
}

QuadraticValue quadratic_value(const MarketSpec& spec, const HamiltonianBook& book) { return QuadraticValue(spec, book); }

}  // namespace hrmm
