#include "doctest.h"
#include "lindyn/datasets.hpp"
#include "oracles.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <thread>

using namespace lindyn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "lindyn_test_datasets";
  fs::create_directories(dir);
  return dir / name;
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

int pixel(int i, int r, int c) { return (i * 7 + r * 13 + c * 29) % 256; }

}  // namespace

TEST_CASE("moments of a single sample are the outer product") {
  DataMatrixPair<double> data;
  data.x = Matrix<double>(1, 3);
  data.x << 1.0, -2.0, 0.5;
  data.y = data.x;
  const auto m = compute_moments(data);
  const Matrix<double> expected = data.x.transpose() * data.x;
  CHECK((m.sigma_x - expected).norm() == doctest::Approx(0.0));
}

TEST_CASE("scaled identity design gives identity moments") {
  const int n = 4;
  DataMatrixPair<double> data{std::sqrt(double(n)) * Matrix<double>::Identity(n, n),
                              std::sqrt(double(n)) * Matrix<double>::Identity(n, n)};
  const auto m = compute_moments(data);
  CHECK((m.sigma_x - Matrix<double>::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((m.sigma_xy - Matrix<double>::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("moments are exactly symmetric and autoencoder cross moment is a bitwise copy") {
  std::mt19937_64 gen(3);
  DataMatrixPair<double> data{oracle::gaussian(37, 6, gen), {}};
  data.y = data.x;
  const auto m = compute_moments(data);
  CHECK(m.sigma_x == m.sigma_x.transpose());
  CHECK(m.sigma_xy == m.sigma_x);

  // Against a loop evaluation.
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) {
      double s = 0;
      for (int i = 0; i < 37; ++i) s += data.x(i, a) * data.x(i, b);
      CHECK(m.sigma_x(a, b) == doctest::Approx(s / 37).epsilon(1e-13));
    }
}

TEST_CASE("mismatched row counts are rejected") {
  DataMatrixPair<double> data{Matrix<double>::Ones(5, 2), Matrix<double>::Ones(4, 2)};
  CHECK_THROWS_AS(compute_moments(data), ShapeError);
}

TEST_CASE("synthetic data is reproducible and has the declared shapes") {
  SyntheticSpec spec;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a.data.x.rows() == 1000);
  CHECK(a.data.x.cols() == 20);
  CHECK(a.data.y.cols() == 20);
  CHECK(a.data.x == b.data.x);
  CHECK(a.mixing == b.mixing);
  CHECK(a.data.y == a.data.x);
  CHECK(a.mixing.minCoeff() >= 0.0);
  CHECK(a.mixing.maxCoeff() < 1.0);

  spec.seed = 1;
  const auto c = generate_synthetic(spec);
  CHECK(c.data.x != a.data.x);
}

TEST_CASE("synthetic generation does not depend on the calling thread") {
  SyntheticSpec spec;
  spec.seed = 11;
  const auto here = generate_synthetic(spec);
  Matrix<double> there;
  std::thread th([&] { there = generate_synthetic(spec).data.x; });
  th.join();
  CHECK(here.data.x == there);
}

TEST_CASE("PortableRng sequence is pinned") {
  // The standard fixes the 10000th output of mt19937_64 seeded with 5489.
  PortableRng rng(5489);
  for (int i = 0; i < 9999; ++i) rng.uniform();
  const double expected = static_cast<double>(9981545732273789042ULL >> 11) * 0x1.0p-53;
  CHECK(rng.uniform() == expected);
}

TEST_CASE("synthetic covariance matches the population covariance within sampling error") {
  for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
    SyntheticSpec spec;
    spec.seed = seed;
    const auto syn = generate_synthetic(spec);
    const auto m = compute_moments(syn.data);
    const Matrix<double> pop =
        syn.signal_covariance() + spec.noise_scale * spec.noise_scale * Matrix<double>::Identity(20, 20);
    // Entry (a, b) of a Gaussian sample covariance has standard deviation
    // sqrt((P_aa P_bb + P_ab^2) / n); allow five of them.
    for (int a = 0; a < 20; ++a)
      for (int b = 0; b < 20; ++b) {
        const double sd = std::sqrt((pop(a, a) * pop(b, b) + pop(a, b) * pop(a, b)) / spec.n);
        CHECK(std::abs(m.sigma_x(a, b) - pop(a, b)) < 5 * sd);
      }
  }
}

TEST_CASE("noise-free synthetic data has rank r") {
  SyntheticSpec spec;
  spec.noise_scale = 0.0;
  const auto syn = generate_synthetic(spec);
  Eigen::JacobiSVD<Matrix<double>> svd(syn.data.x);
  const auto& s = svd.singularValues();
  CHECK((s.array() > 1e-10 * s(0)).count() == 5);
}

TEST_CASE("synthetic spec validation") {
  SyntheticSpec spec;
  spec.r = 21;
  spec.latent_variances.assign(21, 1.0);
  CHECK_THROWS_AS(spec.validate(), DomainError);
  SyntheticSpec inc;
  inc.latent_variances = {1, 2, 1, 1, 1};
  CHECK_THROWS_AS(inc.validate(), DomainError);
  SyntheticSpec zero;
  zero.latent_variances = {1, 1, 1, 1, 0};
  CHECK_THROWS_AS(zero.validate(), DomainError);
}

TEST_CASE("CSV round trip is exact") {
  std::mt19937_64 gen(5);
  Matrix<double> m = oracle::gaussian(7, 4, gen);
  m(0, 0) = 1e-300;
  m(1, 1) = -123456789.123456789;
  const auto path = scratch("roundtrip.csv").string();
  write_csv_matrix(path, m, {"header line"});
  CHECK(read_csv_matrix(path) == m);
}

TEST_CASE("CSV errors report the position") {
  const auto path = scratch("ragged.csv").string();
  {
    std::ofstream out(path);
    out << "1,2,3\n4,5\n";
  }
  try {
    read_csv_matrix(path);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":2:") != std::string::npos);
  }
  {
    std::ofstream out(path);
    out << "1,2\n3,abc\n";
  }
  CHECK_THROWS_AS(read_csv_matrix(path), ParseError);
}

TEST_CASE("one-hot encoding") {
  const auto y = one_hot({3}, 10);
  Matrix<double> expected = Matrix<double>::Zero(1, 10);
  expected(0, 3) = 1.0;
  CHECK(y == expected);
  CHECK_THROWS_AS(one_hot({10}, 10), ParseError);
}

TEST_CASE("IDX images flatten to one row per image") {
  const auto path = scratch("images.idx").string();
  {
    std::ofstream out(path, std::ios::binary);
    const unsigned char magic[4] = {0, 0, 8, 3};
    out.write(reinterpret_cast<const char*>(magic), 4);
    write_be32(out, 10000);
    write_be32(out, 28);
    write_be32(out, 28);
    for (int i = 0; i < 10000; ++i)
      for (int r = 0; r < 28; ++r)
        for (int c = 0; c < 28; ++c) out.put(static_cast<char>(pixel(i, r, c)));
  }
  const auto x = idx_to_matrix(read_idx(path));
  CHECK(x.rows() == 10000);
  CHECK(x.cols() == 784);
  // Values from tests/oracles/frozen_values.py.
  CHECK(x.sum() == doctest::Approx(3919982.9333333219).epsilon(1e-12));
  CHECK(x(9999, 783) == doctest::Approx(0.84313725490196079).epsilon(1e-15));
  CHECK(x(1, 28 * 2 + 3) == pixel(1, 2, 3) / 255.0);
}

TEST_CASE("IDX header errors are diagnosed") {
  const auto path = scratch("bad.idx").string();
  {
    std::ofstream out(path, std::ios::binary);
    const unsigned char magic[4] = {0, 0, 8, 1};
    out.write(reinterpret_cast<const char*>(magic), 4);
    write_be32(out, 5);
    out.put(1).put(2);
  }
  CHECK_THROWS_AS(read_idx(path), ParseError);
  {
    std::ofstream out(path, std::ios::binary);
    const unsigned char magic[4] = {1, 0, 8, 1};
    out.write(reinterpret_cast<const char*>(magic), 4);
  }
  CHECK_THROWS_AS(read_idx(path), ParseError);
}

TEST_CASE("ingest with IDX labels and one-hot targets") {
  const auto img = scratch("small-images.idx").string();
  const auto lab = scratch("small-labels.idx").string();
  {
    std::ofstream out(img, std::ios::binary);
    const unsigned char magic[4] = {0, 0, 8, 3};
    out.write(reinterpret_cast<const char*>(magic), 4);
    write_be32(out, 3);
    write_be32(out, 2);
    write_be32(out, 2);
    for (int k = 0; k < 12; ++k) out.put(static_cast<char>(k * 20));
  }
  {
    std::ofstream out(lab, std::ios::binary);
    const unsigned char magic[4] = {0, 0, 8, 1};
    out.write(reinterpret_cast<const char*>(magic), 4);
    write_be32(out, 3);
    out.put(2).put(0).put(1);
  }
  const auto data = ingest_dataset(img, FileFormat::Idx, lab, TargetEncoding::one_hot(3));
  CHECK(data.x.rows() == 3);
  CHECK(data.x.cols() == 4);
  CHECK(data.x(2, 3) == 220 / 255.0);
  CHECK(data.y(0, 2) == 1.0);
  CHECK(data.y.row(0).sum() == 1.0);
  CHECK_THROWS_AS(ingest_dataset(img, FileFormat::Idx, lab, TargetEncoding::one_hot(2)), ParseError);
  const auto auto_enc = ingest_dataset(img, FileFormat::Idx, std::nullopt, TargetEncoding::raw());
  CHECK(auto_enc.y == auto_enc.x);
}
