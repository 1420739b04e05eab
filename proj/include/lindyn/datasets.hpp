#ifndef LINDYN_DATASETS_HPP
#define LINDYN_DATASETS_HPP

#include "lindyn/core.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace lindyn {

/// Design matrices: one sample per row, X is n x d and Y is n x p.
template <typename Scalar>
struct DataMatrixPair {
  Matrix<Scalar> x;
  Matrix<Scalar> y;

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index d() const { return x.cols(); }
  Eigen::Index p() const { return y.cols(); }

  void validate() const {
    if (x.rows() < 1 || x.cols() < 1 || y.cols() < 1) {
      throw ShapeError("data matrices must be non-empty, got X " + shape_str(x.rows(), x.cols()) +
                       " and Y " + shape_str(y.rows(), y.cols()));
    }
    if (x.rows() != y.rows()) {
      throw ShapeError("row counts differ: X " + shape_str(x.rows(), x.cols()) + ", Y " +
                       shape_str(y.rows(), y.cols()));
    }
    if (!x.allFinite() || !y.allFinite()) throw DomainError("data matrices contain non-finite entries");
  }
};

/// Second moments Sigma_x = X^T X / n and Sigma_xy = X^T Y / n.
template <typename Scalar>
struct MomentPair {
  Matrix<Scalar> sigma_x;
  Matrix<Scalar> sigma_xy;

  Eigen::Index d() const { return sigma_x.rows(); }
  Eigen::Index p() const { return sigma_xy.cols(); }

  void validate() const {
    if (sigma_x.rows() != sigma_x.cols() || sigma_xy.rows() != sigma_x.rows() || sigma_x.rows() < 1 ||
        sigma_xy.cols() < 1) {
      throw ShapeError("moment shapes inconsistent: sigma_x " + shape_str(sigma_x.rows(), sigma_x.cols()) +
                       ", sigma_xy " + shape_str(sigma_xy.rows(), sigma_xy.cols()));
    }
    if (!sigma_x.allFinite() || !sigma_xy.allFinite()) throw DomainError("moments contain non-finite entries");
    if (!is_symmetric(sigma_x, Scalar(1e-12))) throw DomainError("sigma_x is not symmetric");
    const auto eig = symmetric_eigen(sigma_x);
    const Scalar lmax = eig.values(0);
    if (eig.values(eig.values.size() - 1) < -Scalar(1e-10) * std::max<Scalar>(lmax, Scalar(0))) {
      throw DomainError("sigma_x is not positive semidefinite");
    }
  }
};

template <typename Scalar>
MomentPair<Scalar> compute_moments(const DataMatrixPair<Scalar>& data) {
  data.validate();
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(data.n());
  MomentPair<Scalar> m;
  Matrix<Scalar> gram = data.x.transpose() * data.x * inv_n;
  m.sigma_x = (gram + gram.transpose()) * Scalar(0.5);
  const bool autoencoder = data.x.cols() == data.y.cols() && data.x == data.y;
  if (autoencoder) {
    m.sigma_xy = m.sigma_x;
  } else {
    m.sigma_xy = data.x.transpose() * data.y * inv_n;
  }
  return m;
}

/// Seeded generator with a fixed, platform-independent output sequence.
/// mt19937_64 is fully specified by the standard; uniforms use the top 53 bits and
/// Gaussians use Box-Muller, so no library distribution (whose algorithms vary by
/// implementation) is involved.
class PortableRng {
 public:
  explicit PortableRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

struct SyntheticSpec {
  int d = 20;
  int p = 20;
  int n = 1000;
  int r = 5;
  std::vector<double> latent_variances{4.0, 2.0, 1.0, 0.5, 0.25};
  double noise_scale = 1e-3;
  std::uint64_t seed = 0;

  void validate() const {
    if (d < 1 || p < 1 || n < 1 || r < 1) throw DomainError("synthetic dimensions must be positive");
    if (r > std::min(d, p)) {
      throw DomainError("latent rank r=" + std::to_string(r) + " exceeds min(d, p)=" + std::to_string(std::min(d, p)));
    }
    if (static_cast<int>(latent_variances.size()) != r) {
      throw DomainError("latent_variances must have length r=" + std::to_string(r));
    }
    for (std::size_t i = 0; i < latent_variances.size(); ++i) {
      if (!(latent_variances[i] > 0.0)) throw DomainError("latent variances must be strictly positive");
      if (i > 0 && latent_variances[i] > latent_variances[i - 1]) {
        throw DomainError("latent variances must be non-increasing");
      }
    }
    if (!(noise_scale >= 0.0)) throw DomainError("noise_scale must be nonnegative");
    if (p != d) throw DomainError("synthetic data is an autoencoder (Y = X); p must equal d");
  }
};

template <typename Scalar>
struct SyntheticData {
  DataMatrixPair<Scalar> data;
  Matrix<Scalar> mixing;  ///< d x r, entries U[0, 1)
  Matrix<Scalar> latent;  ///< r x r diagonal of latent variances

  /// Population covariance B D B^T (noise excluded), the reconstruction target.
  Matrix<Scalar> signal_covariance() const { return mixing * latent * mixing.transpose(); }
};

/// x_i = B z_i + noise * e_i, z_i ~ N(0, D), e_i ~ N(0, I), Y = X.
/// Draw order: B row-major, then per sample z_i followed by e_i.
template <typename Scalar = double>
SyntheticData<Scalar> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  PortableRng rng(spec.seed);
  SyntheticData<Scalar> out;
  out.mixing.resize(spec.d, spec.r);
  for (int k = 0; k < spec.d; ++k)
    for (int l = 0; l < spec.r; ++l) out.mixing(k, l) = static_cast<Scalar>(rng.uniform());
  out.latent = Matrix<Scalar>::Zero(spec.r, spec.r);
  Vector<Scalar> scale(spec.r);
  for (int l = 0; l < spec.r; ++l) {
    out.latent(l, l) = static_cast<Scalar>(spec.latent_variances[l]);
    scale(l) = std::sqrt(static_cast<Scalar>(spec.latent_variances[l]));
  }
  Matrix<Scalar> x(spec.n, spec.d);
  Vector<Scalar> z(spec.r);
  Vector<Scalar> e(spec.d);
  for (int i = 0; i < spec.n; ++i) {
    for (int l = 0; l < spec.r; ++l) z(l) = scale(l) * static_cast<Scalar>(rng.gaussian());
    for (int k = 0; k < spec.d; ++k) e(k) = static_cast<Scalar>(spec.noise_scale * rng.gaussian());
    x.row(i) = (out.mixing * z + e).transpose();
  }
  out.data.x = x;
  out.data.y = x;
  return out;
}

// ---------------------------------------------------------------------------
// File ingestion (double precision; see datasets_io.cpp).

enum class FileFormat { Csv, Idx };

/// Raw keeps the label file as a numeric matrix; OneHot maps integer label c to e_c.
struct TargetEncoding {
  enum class Kind { Raw, OneHot } kind = Kind::Raw;
  int classes = 0;

  static TargetEncoding raw() { return {}; }
  static TargetEncoding one_hot(int p) { return {Kind::OneHot, p}; }
};

struct IdxArray {
  std::vector<std::int32_t> dims;
  std::vector<std::uint8_t> data;
};

/// Reads a numeric CSV. Lines starting with '#' and blank lines are skipped.
Matrix<double> read_csv_matrix(const std::string& path);

/// Writes with 17 significant digits, optional leading '#' comment lines.
void write_csv_matrix(const std::string& path, const Matrix<double>& m,
                      const std::vector<std::string>& comments = {});

/// Unsigned-byte IDX file (magic 0x0000 08 NN, big-endian dimensions).
IdxArray read_idx(const std::string& path);

/// First dimension becomes rows; remaining dimensions are flattened; bytes scaled by 1/255.
Matrix<double> idx_to_matrix(const IdxArray& idx);

Matrix<double> one_hot(const std::vector<long>& labels, int classes);

FileFormat format_from_path(const std::string& path);

/// Loads features; targets come from `labels_path` when given, otherwise Y = X.
DataMatrixPair<double> ingest_dataset(const std::string& features_path, FileFormat format,
                                      const std::optional<std::string>& labels_path,
                                      TargetEncoding encoding);

}  // namespace lindyn

#endif  // LINDYN_DATASETS_HPP
