#include "doctest.h"
#include "lindyn/rrr.hpp"
#include "lindyn/spectral.hpp"
#include "oracles.hpp"

using namespace lindyn;

namespace {

MomentPair<double> random_moments(int d, int p, std::mt19937_64& gen, int n_factor = 3) {
  const Matrix<double> x = oracle::gaussian(n_factor * d, d, gen);
  const Matrix<double> y = x * oracle::gaussian(d, p, gen) + oracle::gaussian(n_factor * d, p, gen);
  MomentPair<double> m{x.transpose() * x / double(n_factor * d), x.transpose() * y / double(n_factor * d)};
  m.sigma_x = 0.5 * (m.sigma_x + m.sigma_x.transpose()).eval();
  return m;
}

/// Sigma_x of rank r < d built from a thin factor.
MomentPair<double> rank_deficient(int d, int p, int r, std::mt19937_64& gen) {
  const Matrix<double> f = oracle::gaussian(d, r, gen);
  MomentPair<double> m{f * f.transpose(), f * oracle::gaussian(r, p, gen)};
  m.sigma_x = 0.5 * (m.sigma_x + m.sigma_x.transpose()).eval();
  return m;
}

double excess(const MomentPair<double>& m, const Matrix<double>& w) {
  return loss_up_to_constant(m, w) - loss_up_to_constant(m, ols_min_norm(m));
}

}  // namespace

TEST_CASE("OLS with invertible covariance is the plain inverse") {
  std::mt19937_64 gen(1);
  const auto m = random_moments(4, 3, gen);
  const Matrix<double> direct = m.sigma_x.inverse() * m.sigma_xy;
  CHECK((ols_min_norm(m) - direct).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("autoencoder OLS is an orthogonal projector of rank r") {
  std::mt19937_64 gen(2);
  DataMatrixPair<double> data{oracle::gaussian(40, 3, gen) * oracle::gaussian(3, 6, gen), {}};
  data.y = data.x;
  const auto m = compute_moments(data);
  const Matrix<double> p = ols_min_norm(m);
  CHECK((p * p - p).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((p - p.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(rank_above(p, 1e-8) == 3);
}

TEST_CASE("OLS on a rank-deficient instance minimizes and has minimal norm") {
  std::mt19937_64 gen(3);
  const auto m = rank_deficient(6, 3, 3, gen);
  const Matrix<double> w = ols_min_norm(m);
  CHECK((m.sigma_x * w - m.sigma_xy).cwiseAbs().maxCoeff() < 1e-10);  // stationary
  Eigen::SelfAdjointEigenSolver<Matrix<double>> es(m.sigma_x);
  const Matrix<double> null = es.eigenvectors().leftCols(3);  // smallest eigenvalues ~ 0
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix<double> w2 = w + null * oracle::gaussian(3, 3, gen) * 0.1;
    CHECK(loss_up_to_constant(m, w2) == doctest::Approx(loss_up_to_constant(m, w)).epsilon(1e-9));
    CHECK(w2.norm() > w.norm());
  }
  // Projected gradient oracle at full rank reaches the same loss.
  const auto pgd = rrr_oracle_pgd(m, 3, 3000);
  CHECK(pgd.loss == doctest::Approx(loss_up_to_constant(m, w)).epsilon(1e-8));
}

TEST_CASE("inactive rank constraint returns the OLS solution") {
  std::mt19937_64 gen(4);
  const auto m = random_moments(5, 3, gen);
  const auto sol = rrr_solve(m, 3);
  CHECK(sol.w == ols_min_norm(m));
  CHECK(sol.rank == 3);
  CHECK(rrr_solve(m, 7).rank == 3);
  CHECK(sol.residual == 0.0);
  CHECK_THROWS_AS(rrr_solve(m, 0), DomainError);
}

TEST_CASE("identity covariance reduces to SVD truncation") {
  MomentPair<double> m{Matrix<double>::Identity(3, 3), Matrix<double>::Zero(3, 3)};
  m.sigma_xy.diagonal() << 0.1, 0.01, 0.001;
  const auto sol = rrr_solve(m, 1);
  Matrix<double> expected = Matrix<double>::Zero(3, 3);
  expected(0, 0) = 0.1;
  CHECK((sol.w - expected).cwiseAbs().maxCoeff() < 1e-10);

  const auto pgd = rrr_oracle_pgd(m, 1, 500);
  CHECK((pgd.w - expected).cwiseAbs().maxCoeff() < 1e-6);

  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 5; ++trial) {
    MomentPair<double> r{Matrix<double>::Identity(5, 5), oracle::gaussian(5, 4, gen)};
    for (int k = 1; k <= 4; ++k) CHECK((rrr_solve(r, k).w - oracle::truncated_svd(r.sigma_xy, k)).norm() < 1e-10);
  }
}

TEST_CASE("closed form agrees with projected gradient on random instances") {
  std::mt19937_64 gen(6);
  for (int trial = 0; trial < 4; ++trial) {
    const auto m = random_moments(6, 4, gen);
    const auto sol = rrr_solve(m, 2);
    const auto pgd = rrr_oracle_pgd(m, 2, 6000);
    CHECK((sol.w - pgd.w).norm() < 1e-4);
    CHECK(pgd.loss >= loss_up_to_constant(m, sol.w) - 1e-9);
    CHECK(sol.residual == doctest::Approx(excess(m, sol.w)).epsilon(1e-8));
  }
}

TEST_CASE("residual is non-increasing in k") {
  std::mt19937_64 gen(7);
  const auto m = random_moments(7, 5, gen);
  double prev = 1e300;
  for (int k = 1; k <= 6; ++k) {
    const auto sol = rrr_solve(m, k);
    CHECK(sol.residual <= prev);
    CHECK(rank_above(sol.w, 1e-10 * sol.w.norm()) <= k);
    prev = sol.residual;
  }
  CHECK(prev == 0.0);
}

TEST_CASE("solutions lie in the range of the covariance") {
  std::mt19937_64 gen(8);
  const auto m = rank_deficient(6, 4, 3, gen);
  Eigen::SelfAdjointEigenSolver<Matrix<double>> es(m.sigma_x);
  const Matrix<double> null = es.eigenvectors().leftCols(3);
  for (int k = 1; k <= 3; ++k) CHECK((null.transpose() * rrr_solve(m, k).w).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("commuting instances give the spectral formula") {
  std::mt19937_64 gen(9);
  auto inst = oracle::commuting_instance(5, 4, gen);
  for (int i = 0; i < 5; ++i) inst.lambda(i) = 0.8 + 0.2 * i;  // sigma and sigma^2/lambda ordered alike
  Matrix<double> dxy = Matrix<double>::Zero(5, 4);
  for (int i = 0; i < 4; ++i) dxy(i, i) = inst.sigma(i);
  MomentPair<double> m{inst.u * inst.lambda.asDiagonal() * inst.u.transpose(), inst.u * dxy * inst.v.transpose()};
  m.sigma_x = 0.5 * (m.sigma_x + m.sigma_x.transpose()).eval();
  for (int k = 1; k <= 4; ++k) {
    Matrix<double> expected = Matrix<double>::Zero(5, 4);
    for (int i = 0; i < k; ++i) expected += inst.sigma(i) / inst.lambda(i) * inst.u.col(i) * inst.v.col(i).transpose();
    CHECK((rrr_solve(m, k).w - expected).norm() < 1e-10);
  }
}

TEST_CASE("oracle and closed-form residuals agree on a battery") {
  std::mt19937_64 gen(10);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 3 + trial % 4, p = 2 + trial % 3;
    const auto m = random_moments(d, p, gen);
    const int k = 1 + trial % std::min(d, p);
    const auto sol = rrr_solve(m, k);
    const auto pgd = rrr_oracle_pgd(m, k, 3000);
    const double solved = loss_up_to_constant(m, sol.w);
    CHECK(pgd.loss <= solved + 1e-6);
    CHECK(solved <= pgd.loss + 1e-9);
  }
}
