#include "doctest.h"
#include "lindyn/analysis.hpp"
#include "lindyn/continuous.hpp"
#include "lindyn/discrete.hpp"
#include "oracles.hpp"

using namespace lindyn;

namespace {

std::vector<double> log_grid(double a, double b, int n) {
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) t[i] = a * std::pow(b / a, double(i) / (n - 1));
  return t;
}

// Squared norm of the rescaled two-layer autoencoder profile with lambda = sigma.
std::vector<double> two_layer_profile(const std::vector<double>& t, double delta) {
  std::vector<double> out;
  for (double s : t) {
    double v = 0;
    for (double sig : {0.1, 0.01, 0.001}) {
      const double w = closed_form_mode(ModeParams::from_delta(sig, sig, delta), delta * s);
      v += w * w;
    }
    out.push_back(v);
  }
  return out;
}

std::vector<double> one_layer_profile(const std::vector<double>& t, double delta) {
  MomentPair<double> m{Matrix<double>::Zero(3, 3), Matrix<double>::Zero(3, 3)};
  m.sigma_x.diagonal() << 0.1, 0.01, 0.001;
  m.sigma_xy = m.sigma_x;
  const Matrix<double> w0 = std::exp(-2 * delta) * Matrix<double>::Identity(3, 3);
  std::vector<double> out;
  for (double s : t) out.push_back(closed_form_linear(m, w0, delta * s).squaredNorm());
  return out;
}

TrajectoryRecord<double> constant_record(const Matrix<double>& w, int n) {
  TrajectoryRecord<double> rec;
  for (int i = 0; i < n; ++i) {
    rec.times.push_back(i);
    rec.products.push_back(w);
    rec.losses.push_back(0);
  }
  return rec;
}

}  // namespace

TEST_CASE("metrics of a constant identity product") {
  const auto rows = trajectory_metrics(constant_record(Matrix<double>::Identity(3, 3), 4));
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.nuclear_norm == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(r.sq_frobenius == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(r.effective_rank == 3);
    CHECK_FALSE(r.reconstruction_error.has_value());
  }
}

TEST_CASE("effective rank threshold") {
  Matrix<double> w = Matrix<double>::Zero(2, 2);
  w.diagonal() << 1.0, 1e-9;
  MetricsOptions<double> opt;
  CHECK(matrix_metrics(w, opt).effective_rank == 1);
  opt.rank_tol = 1e-10;
  CHECK(matrix_metrics(w, opt).effective_rank == 2);
  opt.rank_tol = 0.5;
  opt.rank_scale = 4.0;
  CHECK(matrix_metrics(w, opt).effective_rank == 0);
  CHECK(matrix_metrics(Matrix<double>(Matrix<double>::Zero(3, 2)), MetricsOptions<double>{}).effective_rank == 0);
}

TEST_CASE("metrics are invariant under orthogonal rotations") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix<double> w = oracle::gaussian(5, 3, gen) * oracle::gaussian(3, 4, gen);
    const Matrix<double> rotated = oracle::random_orthogonal(5, gen) * w * oracle::random_orthogonal(4, gen);
    const auto a = matrix_metrics(w, MetricsOptions<double>{});
    const auto b = matrix_metrics(rotated, MetricsOptions<double>{});
    CHECK(std::abs(a.nuclear_norm - b.nuclear_norm) < 1e-10);
    CHECK(std::abs(a.sq_frobenius - b.sq_frobenius) < 1e-10);
    CHECK(a.effective_rank == 3);
    CHECK(b.effective_rank == 3);
  }
}

TEST_CASE("reconstruction error and input validation") {
  const Matrix<double> target = Matrix<double>::Ones(2, 2);
  MetricsOptions<double> opt;
  opt.target = &target;
  const auto rows = trajectory_metrics(constant_record(Matrix<double>::Identity(2, 2), 2), opt);
  CHECK(*rows[0].reconstruction_error == doctest::Approx(std::sqrt(2.0)));

  const Matrix<double> wrong = Matrix<double>::Ones(3, 2);
  opt.target = &wrong;
  CHECK_THROWS_AS(trajectory_metrics(constant_record(Matrix<double>::Identity(2, 2), 2), opt), ShapeError);
  CHECK_THROWS_AS(trajectory_metrics(TrajectoryRecord<double>{}), Error);
}

TEST_CASE("exact step function is recovered") {
  std::vector<double> t, x;
  for (int i = 0; i < 100; ++i) {
    t.push_back(i);
    x.push_back(i < 30 ? 0.0 : i < 70 ? 2.0 : 5.0);
  }
  const auto rep = detect_plateaus(t, x);
  REQUIRE(rep.size() == 3);
  CHECK(rep.plateau_values == std::vector<double>{0.0, 2.0, 5.0});
  CHECK(rep.transition_times == std::vector<double>{29.5, 69.5});
  CHECK(rep.sample_windows[1] == std::pair<std::size_t, std::size_t>{30, 69});
  CHECK(reconstruct_step(rep, t) == x);
  CHECK(rep.count_away_from(0.0) == 2);
}

TEST_CASE("a line steeper than the tolerance has no plateau") {
  std::vector<double> t, x;
  for (int i = 0; i < 500; ++i) {
    t.push_back(i);
    x.push_back(3.0 * i);
  }
  CHECK(detect_plateaus(t, x).size() == 0);
  CHECK_THROWS_AS(reconstruct_step(detect_plateaus(t, x), t), DomainError);
  CHECK_THROWS_AS(detect_plateaus({}, {}), DomainError);
  CHECK_THROWS_AS(detect_plateaus({1, 2}, {1}), ShapeError);
  PlateauOptions bad;
  bad.flatness_tol = 0;
  CHECK_THROWS_AS(detect_plateaus(t, x, bad), DomainError);
}

TEST_CASE("constant series is a single plateau") {
  const auto rep = detect_plateaus({0, 1, 2}, {4, 4, 4});
  CHECK(rep.size() == 1);
  CHECK(rep.plateau_values[0] == 4.0);
  CHECK(rep.transition_times.empty());
}

TEST_CASE("two-layer autoencoder profile is a staircase at 1, 2, 3") {
  const auto t = log_grid(1, 1e4, 2000);
  const auto rep = detect_plateaus(t, two_layer_profile(t, 30));
  REQUIRE(rep.size() == 4);
  CHECK(std::abs(rep.plateau_values[0]) < 1e-2);
  CHECK(rep.count_away_from(0.0) == 3);
  const double expected_t[] = {10, 100, 1000};
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(rep.plateau_values[k + 1] - (k + 1)) < 1e-2);
    CHECK(std::abs(rep.transition_times[k] / expected_t[k] - 1) < 0.05);
  }
  for (std::size_t k = 1; k < rep.size(); ++k) {
    CHECK(rep.plateau_windows[k].first > rep.plateau_windows[k - 1].second);
    CHECK(rep.sample_windows[k].first > rep.sample_windows[k - 1].second);
  }
}

TEST_CASE("one-layer profile over the same horizon has at most one plateau") {
  const auto t = log_grid(1, 1e4, 2000);
  CHECK(detect_plateaus(t, one_layer_profile(t, 30)).size() <= 1);
}

TEST_CASE("detection is idempotent on its own reconstruction") {
  const auto t = log_grid(1, 1e4, 2000);
  const auto first = detect_plateaus(t, two_layer_profile(t, 30));
  const auto second = detect_plateaus(t, reconstruct_step(first, t));
  CHECK(second.plateau_values == first.plateau_values);
  CHECK(second.transition_times == first.transition_times);
  const auto third = detect_plateaus(t, reconstruct_step(second, t));
  CHECK(third.plateau_values == second.plateau_values);
  CHECK(third.transition_times == second.transition_times);
  CHECK(third.plateau_windows == second.plateau_windows);
  CHECK(third.sample_windows == second.sample_windows);
}

TEST_CASE("a trajectory sitting on the RRR solutions is at distance zero") {
  std::mt19937_64 gen(2);
  auto inst = oracle::commuting_instance(4, 4, gen);
  for (int i = 0; i < 4; ++i) inst.lambda(i) = 0.8 + 0.2 * i;
  MomentPair<double> m{inst.u * inst.lambda.asDiagonal() * inst.u.transpose(), inst.sigma_xy};
  m.sigma_x = 0.5 * (m.sigma_x + m.sigma_x.transpose()).eval();
  const auto js = joint_decompose(m);
  const double delta = 5;
  TrajectoryRecord<double> rec;
  for (int i = 1; i <= 4000; ++i) {
    const double time = 0.01 * i;
    int k = 1;
    while (k < js.r_xy && time >= delta / js.sigma(k)) ++k;
    rec.times.push_back(time);
    rec.products.push_back(rrr_solve(m, k).w);
    rec.losses.push_back(0);
  }
  const auto dist = compare_plateaus_to_rrr(rec, js, m, delta, 10);
  REQUIRE(dist.size() == 4);
  for (const auto& d : dist) {
    CHECK(d.distance < 1e-14);
    CHECK(d.reached);
    CHECK(std::abs(d.t_sample - d.t_mid) <= 0.005 + 1e-12);
  }
  CHECK(dist[0].t_mid == doctest::Approx(delta / std::sqrt(js.sigma(0) * js.sigma(1))));
}

TEST_CASE("two-layer descent visits the RRR solutions and one-layer descent does not") {
  std::mt19937_64 gen(3);
  auto inst = oracle::commuting_instance(4, 4, gen);
  for (int i = 0; i < 4; ++i) inst.lambda(i) = 1.0;
  inst.sigma << 1.0, 0.5, 0.25, 0.125;
  Matrix<double> dxy = inst.sigma.asDiagonal();
  MomentPair<double> m{Matrix<double>::Identity(4, 4), inst.u * dxy * inst.v.transpose()};
  const auto js = joint_decompose(m);
  const double delta = 10, eta = 0.05;

  GDConfig<double> cfg;
  cfg.widths = {4, 4, 4};
  cfg.init = Thm1Init<double>{delta, {}};
  cfg.eta = eta;
  cfg.steps = static_cast<long>(3 * delta / (eta * 0.125));
  cfg.record_stride = 4;
  const auto two = run_gd(m, cfg, &js);
  const auto d2 = compare_plateaus_to_rrr(two, js, m, delta, 3);
  for (const auto& d : d2) CHECK(d.distance < 0.05);

  cfg.widths = {4, 4};
  cfg.init = LayerStack<double>{{std::exp(-2 * delta) * Matrix<double>::Identity(4, 4)}};
  const auto one = run_gd(m, cfg, &js);
  for (const auto& d : compare_plateaus_to_rrr(one, js, m, delta, 3)) CHECK(d.distance > 0.05);
}
