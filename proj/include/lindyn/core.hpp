#ifndef LINDYN_CORE_HPP
#define LINDYN_CORE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lindyn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not chain or do not match.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition on a numeric argument is violated.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input file could not be parsed. The message carries the position.
class ParseError : public Error {
 public:
  using Error::Error;
};

inline std::string shape_str(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// Symmetric eigendecomposition with eigenvalues sorted non-increasing.
template <typename Scalar>
struct SymmetricEigen {
  Vector<Scalar> values;
  Matrix<Scalar> vectors;
};

template <typename Derived>
SymmetricEigen<typename Derived::Scalar> symmetric_eigen(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(a.derived().eval());
  if (solver.info() != Eigen::Success) {
    throw Error("symmetric eigendecomposition did not converge");
  }
  SymmetricEigen<Scalar> out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

/// Relative symmetry check: max |a - a^T| <= tol * max |a|.
template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar tol) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  const auto scale = a.cwiseAbs().maxCoeff();
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// Moore-Penrose pseudoinverse of a symmetric PSD matrix; eigenvalues at or below
/// rtol * lambda_max are treated as zero.
template <typename Derived>
Matrix<typename Derived::Scalar> symmetric_pinv(const Eigen::MatrixBase<Derived>& a,
                                                typename Derived::Scalar rtol) {
  using Scalar = typename Derived::Scalar;
  const auto eig = symmetric_eigen(a);
  const Scalar lmax = eig.values.size() ? std::max<Scalar>(eig.values(0), Scalar(0)) : Scalar(0);
  Vector<Scalar> inv = Vector<Scalar>::Zero(eig.values.size());
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) {
    if (eig.values(i) > rtol * lmax && eig.values(i) > Scalar(0)) inv(i) = Scalar(1) / eig.values(i);
  }
  return eig.vectors * inv.asDiagonal() * eig.vectors.transpose();
}

/// Apply a scalar function to the spectrum of a symmetric matrix: Q f(D) Q^T.
template <typename Scalar, typename Fn>
Matrix<Scalar> spectral_apply(const SymmetricEigen<Scalar>& eig, Fn&& fn) {
  Vector<Scalar> mapped(eig.values.size());
  for (Eigen::Index i = 0; i < eig.values.size(); ++i) mapped(i) = fn(eig.values(i));
  return eig.vectors * mapped.asDiagonal() * eig.vectors.transpose();
}

template <typename Derived>
typename Derived::Scalar nuclear_norm(const Eigen::MatrixBase<Derived>& a) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix<typename Derived::Scalar>> svd(a.derived().eval());
  return svd.singularValues().sum();
}

/// Number of singular values strictly above threshold.
template <typename Derived>
int rank_above(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar threshold) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix<typename Derived::Scalar>> svd(a.derived().eval());
  const auto& s = svd.singularValues();
  return static_cast<int>((s.array() > threshold).count());
}

}  // namespace lindyn

#endif  // LINDYN_CORE_HPP
