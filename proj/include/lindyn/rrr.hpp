#ifndef LINDYN_RRR_HPP
#define LINDYN_RRR_HPP

#include "lindyn/core.hpp"
#include "lindyn/datasets.hpp"
#include "lindyn/layers.hpp"
#include "lindyn/parallel.hpp"

#include <vector>

namespace lindyn {

/// Sigma_x^+ Sigma_xy with eigenvalue cutoff max(d, p) * eps relative to lambda_max.
template <typename Scalar>
Matrix<Scalar> ols_min_norm(const MomentPair<Scalar>& moments) {
  moments.validate();
  const Scalar rtol = static_cast<Scalar>(std::max(moments.d(), moments.p())) * std::numeric_limits<Scalar>::epsilon();
  return symmetric_pinv(moments.sigma_x, rtol) * moments.sigma_xy;
}

template <typename Scalar>
struct RRRSolution {
  int k = 0;
  Matrix<Scalar> w;
  /// Excess loss over the unconstrained optimum: tr((W - W_ols)^T Sigma_x (W - W_ols)) / 2.
  Scalar residual = 0;
  int rank = 0;  ///< rank of the returned matrix (smaller than k when the constraint is inactive)
};

/// Rank-constrained least squares. With W_ols the minimum-norm OLS solution and V_k the
/// top-k eigenvectors of W_ols^T Sigma_x W_ols, the solution is W_ols V_k V_k^T.
template <typename Scalar>
RRRSolution<Scalar> rrr_solve(const MomentPair<Scalar>& moments, int k) {
  if (k < 1) throw DomainError("rank bound k must be at least 1");
  const Matrix<Scalar> w_ols = ols_min_norm(moments);
  Matrix<Scalar> m = w_ols.transpose() * moments.sigma_x * w_ols;
  m = (m + m.transpose()) * Scalar(0.5);
  const auto eig = symmetric_eigen(m);
  const Scalar top = std::max<Scalar>(eig.values(0), Scalar(0));
  const int full_rank = static_cast<int>((eig.values.array() > Scalar(1e-10) * top).count());

  RRRSolution<Scalar> sol;
  sol.k = k;
  if (top == Scalar(0) || k >= full_rank) {
    sol.w = w_ols;
    sol.rank = (top == Scalar(0)) ? 0 : full_rank;
    sol.residual = 0;
    return sol;
  }
  const Matrix<Scalar> vk = eig.vectors.leftCols(k);
  sol.w = w_ols * vk * vk.transpose();
  sol.rank = k;
  Scalar tail = 0;
  for (Eigen::Index j = k; j < eig.values.size(); ++j) tail += std::max<Scalar>(eig.values(j), Scalar(0));
  sol.residual = Scalar(0.5) * tail;
  return sol;
}

template <typename Scalar>
struct PgdResult {
  Matrix<Scalar> w;
  Scalar loss = 0;  ///< objective up to the constant |Y|^2 / 2n
  std::uint64_t seed = 0;
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> truncate_rank(const Matrix<Scalar>& w, int k) {
  Eigen::JacobiSVD<Matrix<Scalar>> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const int keep = std::min<int>(k, static_cast<int>(svd.singularValues().size()));
  return svd.matrixU().leftCols(keep) * svd.singularValues().head(keep).asDiagonal() *
         svd.matrixV().leftCols(keep).transpose();
}

}  // namespace detail

/// Projected gradient descent with rank-k truncation after every step, from ten seeds.
/// Kept deliberately naive: it is the reference the closed form is checked against.
template <typename Scalar>
PgdResult<Scalar> rrr_oracle_pgd(const MomentPair<Scalar>& moments, int k, int iters, int seeds = 10) {
  if (k < 1) throw DomainError("rank bound k must be at least 1");
  moments.validate();
  const Scalar lmax = symmetric_eigen(moments.sigma_x).values(0);
  if (!(lmax > Scalar(0))) throw DomainError("sigma_x is zero; step 0.5 / lambda_max undefined");
  const Scalar step = Scalar(0.5) / lmax;

  std::vector<PgdResult<Scalar>> runs(seeds);
  parallel_for(static_cast<std::size_t>(seeds), [&](std::size_t s) {
    PortableRng rng(s);
    Matrix<Scalar> w(moments.d(), moments.p());
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = static_cast<Scalar>(rng.gaussian());
    w = detail::truncate_rank(w, k);
    for (int it = 0; it < iters; ++it) {
      w = detail::truncate_rank<Scalar>(w - step * (moments.sigma_x * w - moments.sigma_xy), k);
    }
    runs[s] = {w, loss_up_to_constant(moments, w), s};
  });
  std::size_t best = 0;
  for (std::size_t s = 1; s < runs.size(); ++s)
    if (runs[s].loss < runs[best].loss) best = s;
  return runs[best];
}

}  // namespace lindyn

#endif  // LINDYN_RRR_HPP
