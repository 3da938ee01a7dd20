#pragma once

#include "hrmm/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>
#include <vector>

namespace hrmm {

template <typename Scalar>
struct SymmetricEigen {
  VectorX<Scalar> values;   // ascending
  MatrixX<Scalar> vectors;  // columns are orthonormal eigenvectors
  int sweeps = 0;
};

template <typename Derived>
MatrixX<typename Derived::Scalar> symmetrize(const Eigen::MatrixBase<Derived>& S) {
  const MatrixX<typename Derived::Scalar> m = S;
  return (m + m.transpose()) * typename Derived::Scalar(0.5);
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps over all (p, q) pairs with Rutishauser's rotation until the off-diagonal
/// Frobenius norm is below `tol` times the Frobenius norm of S.
template <typename Scalar>
SymmetricEigen<Scalar> jacobi_eigen(const MatrixX<Scalar>& S, Scalar tol = Scalar(1e-13), int max_sweeps = 100) {
  const Eigen::Index n = S.rows();
  if (S.cols() != n) throw NumericalError("begv", "eigendecomposition needs a square matrix");
  MatrixX<Scalar> a = symmetrize(S);
  MatrixX<Scalar> v = MatrixX<Scalar>::Identity(n, n);
  const Scalar scale = a.norm();
  SymmetricEigen<Scalar> out;

  auto off_norm = [&] {
    Scalar s(0);
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) s += Scalar(2) * a(p, q) * a(p, q);
    return std::sqrt(s);
  };

  while (scale > Scalar(0) && off_norm() > tol * scale) {
    if (out.sweeps++ >= max_sweeps) {
      throw NumericalError("begv", "Jacobi eigendecomposition did not converge");
    }
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        const Scalar t = (theta >= Scalar(0) ? Scalar(1) : Scalar(-1)) /
                         (std::abs(theta) + std::sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / std::sqrt(t * t + Scalar(1));
        const Scalar s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar akp = a(k, p);
          const Scalar akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar apk = a(p, k);
          const Scalar aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar vkp = v(k, p);
          const Scalar vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  // Sort ascending.
  out.values.resize(n);
  out.vectors.resize(n, n);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) { return a(x, x) < a(y, y); });
  for (Eigen::Index i = 0; i < n; ++i) {
    out.values(i) = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
    out.vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  return out;
}

/// V diag(g(lambda_i)) V^T for a decomposition already at hand.
template <typename Scalar, class Fn>
MatrixX<Scalar> apply_spectral(const SymmetricEigen<Scalar>& eig, Fn&& fn) {
  VectorX<Scalar> mapped(eig.values.size());
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    mapped(i) = fn(eig.values(i));
    if (!std::isfinite(static_cast<double>(mapped(i)))) {
      std::ostringstream os;
      os << "eigenvalue " << eig.values(i) << " is outside the domain of the matrix function";
      throw NumericalError("begv", os.str());
    }
  }
  return symmetrize(eig.vectors * mapped.asDiagonal() * eig.vectors.transpose());
}

/// f(S) for symmetric S through its Jacobi eigendecomposition.
/// `in_domain` is checked on every eigenvalue first; the offending value is named in the error.
template <typename Scalar, class Fn, class Domain>
MatrixX<Scalar> sym_matrix_function(const MatrixX<Scalar>& S, Fn&& fn, Domain&& in_domain) {
  const auto eig = jacobi_eigen<Scalar>(S);
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    if (!in_domain(eig.values(i))) {
      std::ostringstream os;
      os << "eigenvalue " << eig.values(i) << " is outside the domain of the matrix function";
      throw NumericalError("begv", os.str());
    }
  }
  return apply_spectral(eig, std::forward<Fn>(fn));
}

template <typename Scalar, class Fn>
MatrixX<Scalar> sym_matrix_function(const MatrixX<Scalar>& S, Fn&& fn) {
  return sym_matrix_function(S, std::forward<Fn>(fn), [](Scalar) { return true; });
}

/// Principal square root of a PSD matrix; eigenvalues down to -tol*|S| are clamped to zero.
template <typename Scalar>
MatrixX<Scalar> sym_sqrt(const MatrixX<Scalar>& S) {
  const Scalar floor = -Scalar(1e-12) * std::max(Scalar(1), S.cwiseAbs().maxCoeff());
  return sym_matrix_function(
      S, [](Scalar x) { return x > Scalar(0) ? std::sqrt(x) : Scalar(0); }, [floor](Scalar x) { return x >= floor; });
}

template <typename Scalar>
MatrixX<Scalar> sym_inverse_sqrt(const MatrixX<Scalar>& S) {
  return sym_matrix_function(
      S, [](Scalar x) { return Scalar(1) / std::sqrt(x); }, [](Scalar x) { return x > Scalar(0); });
}

}  // namespace hrmm
