#ifndef LINDYN_SPECTRAL_HPP
#define LINDYN_SPECTRAL_HPP

#include "lindyn/core.hpp"
#include "lindyn/datasets.hpp"

#include <numeric>

namespace lindyn {

/// Joint decomposition Sigma_x = U (D_x + B) U^T, Sigma_xy = U D_xy V^T.
///
/// U holds the left singular vectors of Sigma_xy for the retained singular values,
/// followed by an orthonormal basis of their complement. The complement basis
/// diagonalizes the compression of Sigma_x onto it, so B has no entries coupling two
/// complement directions. Within a group of equal singular values the singular pairs
/// are rotated together to diagonalize Sigma_x on that group.
template <typename Scalar>
struct JointSpectrum {
  Matrix<Scalar> u;       ///< d x d orthogonal
  Matrix<Scalar> v;       ///< p x p orthogonal
  Vector<Scalar> sigma;   ///< r_xy retained singular values, non-increasing
  Vector<Scalar> lambda;  ///< diag(U^T Sigma_x U), length d
  Matrix<Scalar> b;       ///< off-diagonal part of U^T Sigma_x U
  Scalar epsilon = 0;     ///< Frobenius norm of b
  int r_xy = 0;
  int r_x = 0;

  /// Rectangular d x p diagonal holding sigma.
  Matrix<Scalar> d_xy() const {
    Matrix<Scalar> out = Matrix<Scalar>::Zero(u.rows(), v.rows());
    for (int i = 0; i < r_xy; ++i) out(i, i) = sigma(i);
    return out;
  }
  Matrix<Scalar> d_x() const { return lambda.asDiagonal(); }
};

namespace detail {

/// Flip the column so that its largest-magnitude entry is positive. Returns the sign applied.
template <typename Scalar>
Scalar canonical_sign(const Eigen::Ref<const Vector<Scalar>>& col) {
  Eigen::Index idx = 0;
  col.cwiseAbs().maxCoeff(&idx);
  return col(idx) < Scalar(0) ? Scalar(-1) : Scalar(1);
}

template <typename Scalar>
bool lexicographic_less(const Vector<Scalar>& a, const Vector<Scalar>& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) < b(i)) return true;
    if (a(i) > b(i)) return false;
  }
  return false;
}

}  // namespace detail

template <typename Scalar>
JointSpectrum<Scalar> joint_decompose(const MomentPair<Scalar>& moments, Scalar rank_tol = Scalar(1e-10)) {
  moments.validate();
  if (!(rank_tol > Scalar(0))) throw DomainError("rank_tol must be positive");
  const Eigen::Index d = moments.d();
  const Eigen::Index p = moments.p();

  // Symmetric PSD Sigma_xy (autoencoders): the eigenvectors serve as both singular bases,
  // so V = U holds exactly instead of to rounding.
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  bool psd = false;
  Vector<Scalar> s;
  Matrix<Scalar> u_full, v;
  if (is_symmetric(moments.sigma_xy, Scalar(16) * eps)) {
    auto eig = symmetric_eigen(Matrix<Scalar>((moments.sigma_xy + moments.sigma_xy.transpose()) * Scalar(0.5)));
    const Scalar top = eig.values.size() ? eig.values(0) : Scalar(0);
    if (eig.values.minCoeff() >= -Scalar(d) * eps * std::abs(top)) {
      psd = true;
      s = eig.values.cwiseMax(Scalar(0));
      u_full = eig.vectors;
      v = eig.vectors;
    }
  }
  if (!psd) {
    Eigen::JacobiSVD<Matrix<Scalar>> svd(moments.sigma_xy, Eigen::ComputeFullU | Eigen::ComputeFullV);
    s = svd.singularValues();
    u_full = svd.matrixU();
    v = svd.matrixV();
  }

  const Scalar smax = s.size() ? s(0) : Scalar(0);
  int r_xy = 0;
  while (r_xy < s.size() && s(r_xy) > rank_tol * smax && s(r_xy) > Scalar(0)) ++r_xy;

  JointSpectrum<Scalar> out;
  out.r_xy = r_xy;
  out.sigma = s.head(r_xy);

  Matrix<Scalar> u_top = u_full.leftCols(r_xy);
  Matrix<Scalar> v_top = v.leftCols(r_xy);

  // Canonical signs first so lexicographic tie-breaking is well defined.
  for (int i = 0; i < r_xy; ++i) {
    const Scalar sgn = detail::canonical_sign<Scalar>(u_top.col(i));
    u_top.col(i) *= sgn;
    v_top.col(i) *= sgn;
  }

  // Groups of equal singular values: rotate the pairs jointly (keeps U D V^T) so that
  // Sigma_x is diagonal on the group, then order by lexicographic column order.
  const Scalar tie_tol = Scalar(1e-12) * std::max<Scalar>(smax, std::numeric_limits<Scalar>::min());
  for (int start = 0; start < r_xy;) {
    int end = start + 1;
    while (end < r_xy && out.sigma(start) - out.sigma(end) <= tie_tol) ++end;
    const int len = end - start;
    if (len > 1) {
      const Matrix<Scalar> uc = u_top.middleCols(start, len);
      const Matrix<Scalar> compressed = uc.transpose() * moments.sigma_x * uc;
      const auto eig = symmetric_eigen(Matrix<Scalar>((compressed + compressed.transpose()) * Scalar(0.5)));
      Matrix<Scalar> ur = uc * eig.vectors;
      Matrix<Scalar> vr = v_top.middleCols(start, len) * eig.vectors;
      std::vector<int> order(len);
      std::iota(order.begin(), order.end(), 0);
      for (int j = 0; j < len; ++j) {
        const Scalar sgn = detail::canonical_sign<Scalar>(ur.col(j));
        ur.col(j) *= sgn;
        vr.col(j) *= sgn;
      }
      std::vector<Vector<Scalar>> cols;
      for (int j = 0; j < len; ++j) cols.push_back(ur.col(j));
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return detail::lexicographic_less<Scalar>(cols[a], cols[b]); });
      for (int j = 0; j < len; ++j) {
        u_top.col(start + j) = ur.col(order[j]);
        v_top.col(start + j) = vr.col(order[j]);
      }
    }
    start = end;
  }

  // Complement of the retained left singular space, rotated to diagonalize Sigma_x there.
  Matrix<Scalar> comp = u_full.rightCols(d - r_xy);
  if (comp.cols() > 0) {
    const Matrix<Scalar> compressed = comp.transpose() * moments.sigma_x * comp;
    const auto eig = symmetric_eigen(Matrix<Scalar>((compressed + compressed.transpose()) * Scalar(0.5)));
    comp = comp * eig.vectors;
    for (Eigen::Index j = 0; j < comp.cols(); ++j) comp.col(j) *= detail::canonical_sign<Scalar>(comp.col(j));
  }

  out.u.resize(d, d);
  out.u << u_top, comp;
  out.v = v;
  out.v.leftCols(r_xy) = v_top;
  for (Eigen::Index j = r_xy; j < p; ++j) out.v.col(j) *= detail::canonical_sign<Scalar>(out.v.col(j));
  if (psd) out.v = out.u;

  const Matrix<Scalar> rotated = out.u.transpose() * moments.sigma_x * out.u;
  out.lambda = rotated.diagonal();
  out.b = rotated;
  out.b.diagonal().setZero();
  out.epsilon = out.b.norm();

  const auto sx_eig = symmetric_eigen(moments.sigma_x);
  const Scalar lmax = std::max<Scalar>(sx_eig.values(0), Scalar(0));
  out.r_x = static_cast<int>((sx_eig.values.array() > rank_tol * lmax).count());
  if (lmax == Scalar(0)) out.r_x = 0;
  return out;
}

/// Normalized measures of how far the data are from the joint-diagonal structure
/// (delta_xy) and from isotropic features (delta_x). Frobenius norms throughout.
struct AssumptionReport {
  double delta_xy = 0;
  double delta_x = 0;
  int r_xy = 0;
  int r_x = 0;
  double epsilon = 0;
};

/// delta_xy = |B| / |Sigma_x| and delta_x = |Xh^T Xh - I/|I|| / 2 with Xh = X / |X|.
template <typename Scalar>
AssumptionReport assumption_metrics(const DataMatrixPair<Scalar>& data, Scalar rank_tol = Scalar(1e-10)) {
  data.validate();
  const Scalar xnorm = data.x.norm();
  if (!(xnorm > Scalar(0))) throw DomainError("X is identically zero; normalized metrics are undefined");
  const auto moments = compute_moments(data);
  const auto spectrum = joint_decompose(moments, rank_tol);

  const Matrix<Scalar> xh = data.x / xnorm;
  const Eigen::Index d = data.d();
  const Matrix<Scalar> gram = xh.transpose() * xh;
  const Matrix<Scalar> ih = Matrix<Scalar>::Identity(d, d) / std::sqrt(static_cast<Scalar>(d));

  AssumptionReport rep;
  rep.delta_xy = static_cast<double>(spectrum.b.norm() / moments.sigma_x.norm());
  rep.delta_x = static_cast<double>(Scalar(0.5) * (gram - ih).norm());
  rep.r_xy = spectrum.r_xy;
  rep.r_x = spectrum.r_x;
  rep.epsilon = static_cast<double>(spectrum.epsilon);
  return rep;
}

}  // namespace lindyn

#endif  // LINDYN_SPECTRAL_HPP
