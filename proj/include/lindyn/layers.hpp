#ifndef LINDYN_LAYERS_HPP
#define LINDYN_LAYERS_HPP

#include "lindyn/core.hpp"
#include "lindyn/datasets.hpp"
#include "lindyn/spectral.hpp"

#include <variant>
#include <vector>

namespace lindyn {

/// W_1 ... W_L with W_l of shape r_{l-1} x r_l; the end-to-end map is their product.
template <typename Scalar>
struct LayerStack {
  std::vector<Matrix<Scalar>> layers;

  int depth() const { return static_cast<int>(layers.size()); }

  std::vector<int> widths() const {
    std::vector<int> w;
    if (layers.empty()) return w;
    w.push_back(static_cast<int>(layers.front().rows()));
    for (const auto& l : layers) w.push_back(static_cast<int>(l.cols()));
    return w;
  }

  void validate(Eigen::Index d, Eigen::Index p) const {
    if (layers.empty()) throw ShapeError("layer stack is empty");
    if (layers.front().rows() != d) {
      throw ShapeError("first layer has " + std::to_string(layers.front().rows()) + " rows, expected d=" +
                       std::to_string(d));
    }
    for (std::size_t l = 1; l < layers.size(); ++l) {
      if (layers[l - 1].cols() != layers[l].rows()) {
        throw ShapeError("layers " + std::to_string(l) + " and " + std::to_string(l + 1) + " do not chain: " +
                         shape_str(layers[l - 1].rows(), layers[l - 1].cols()) + " then " +
                         shape_str(layers[l].rows(), layers[l].cols()));
      }
    }
    if (layers.back().cols() != p) {
      throw ShapeError("last layer has " + std::to_string(layers.back().cols()) + " columns, expected p=" +
                       std::to_string(p));
    }
  }

  Matrix<Scalar> product() const {
    Matrix<Scalar> w = layers.front();
    for (std::size_t l = 1; l < layers.size(); ++l) w = w * layers[l];
    return w;
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.allFinite()) return false;
    return true;
  }
};

/// Zero-padded diagonal initialization aligned with the joint spectrum:
/// W_1 = U E_1 Q_1, W_l = Q_{l-1}^{-1} E_l Q_l, W_L = Q_{L-1}^{-1} E_L V^T,
/// every E_l carrying exp(-2 delta / L) on its diagonal so the product's diagonal is exp(-2 delta).
template <typename Scalar>
struct Thm1Init {
  Scalar delta = 0;
  std::vector<Matrix<Scalar>> q;  ///< L-1 invertible r_l x r_l matrices; empty means identity
};

template <typename Scalar>
using LayerInit = std::variant<Thm1Init<Scalar>, LayerStack<Scalar>>;

inline void check_widths(const std::vector<int>& widths, Eigen::Index d, Eigen::Index p) {
  if (widths.size() < 2) throw ShapeError("layer widths need at least (d, p)");
  for (int w : widths)
    if (w < 1) throw ShapeError("layer widths must be positive");
  if (widths.front() != d || widths.back() != p) {
    throw ShapeError("layer widths must start at d=" + std::to_string(d) + " and end at p=" + std::to_string(p));
  }
}

template <typename Scalar>
LayerStack<Scalar> thm1_layers(const JointSpectrum<Scalar>& spectrum, const std::vector<int>& widths,
                               const Thm1Init<Scalar>& init) {
  check_widths(widths, spectrum.u.rows(), spectrum.v.rows());
  const int depth = static_cast<int>(widths.size()) - 1;
  if (!init.q.empty() && static_cast<int>(init.q.size()) != depth - 1) {
    throw ShapeError("expected " + std::to_string(depth - 1) + " basis matrices Q, got " +
                     std::to_string(init.q.size()));
  }
  const Scalar scale = std::exp(Scalar(-2) * init.delta / static_cast<Scalar>(depth));
  std::vector<Matrix<Scalar>> q_inv;
  for (std::size_t l = 0; l < init.q.size(); ++l) {
    const auto& q = init.q[l];
    if (q.rows() != widths[l + 1] || q.cols() != widths[l + 1]) {
      throw ShapeError("Q_" + std::to_string(l + 1) + " must be " + shape_str(widths[l + 1], widths[l + 1]));
    }
    Eigen::FullPivLU<Matrix<Scalar>> lu(q);
    if (!lu.isInvertible()) throw DomainError("Q_" + std::to_string(l + 1) + " is not invertible");
    q_inv.push_back(lu.inverse());
  }
  LayerStack<Scalar> stack;
  for (int l = 0; l < depth; ++l) {
    Matrix<Scalar> e = Matrix<Scalar>::Zero(widths[l], widths[l + 1]);
    for (int i = 0; i < std::min(widths[l], widths[l + 1]); ++i) e(i, i) = scale;
    Matrix<Scalar> w = e;
    if (l == 0) w = spectrum.u * w;
    else if (!q_inv.empty()) w = q_inv[l - 1] * w;
    if (l == depth - 1) w = w * spectrum.v.transpose();
    else if (!init.q.empty()) w = w * init.q[l];
    stack.layers.push_back(std::move(w));
  }
  return stack;
}

/// Gradients of f = |Y - X W_1...W_L|^2 / 2n with respect to every layer:
/// W_{1:l-1}^T (Sigma_x W - Sigma_xy) W_{l+1:L}^T.
template <typename Scalar>
std::vector<Matrix<Scalar>> layer_gradients(const MomentPair<Scalar>& moments, const LayerStack<Scalar>& stack) {
  const int depth = stack.depth();
  // prefix[l] = W_1...W_l (prefix[0] unused), suffix[l] = W_l...W_L.
  std::vector<Matrix<Scalar>> prefix(depth + 1), suffix(depth + 2);
  prefix[1] = stack.layers[0];
  for (int l = 2; l <= depth; ++l) prefix[l] = prefix[l - 1] * stack.layers[l - 1];
  suffix[depth] = stack.layers[depth - 1];
  for (int l = depth - 1; l >= 1; --l) suffix[l] = stack.layers[l - 1] * suffix[l + 1];

  const Matrix<Scalar> residual = moments.sigma_x * prefix[depth] - moments.sigma_xy;
  std::vector<Matrix<Scalar>> grads(depth);
  for (int l = 1; l <= depth; ++l) {
    Matrix<Scalar> left = (l == 1) ? residual : Matrix<Scalar>(prefix[l - 1].transpose() * residual);
    grads[l - 1] = (l == depth) ? left : Matrix<Scalar>(left * suffix[l + 1].transpose());
  }
  return grads;
}

/// f(W) - |Y|^2 / 2n = tr(W^T Sigma_x W) / 2 - tr(W^T Sigma_xy).
template <typename Scalar>
Scalar loss_up_to_constant(const MomentPair<Scalar>& moments, const Matrix<Scalar>& w) {
  return Scalar(0.5) * (w.transpose() * moments.sigma_x * w).trace() - (w.transpose() * moments.sigma_xy).trace();
}

/// Per-mode values diag(U^T W V) and the Frobenius norm of the off-diagonal leakage.
template <typename Scalar>
std::pair<Vector<Scalar>, Scalar> project_modes(const JointSpectrum<Scalar>& spectrum, const Matrix<Scalar>& w) {
  Matrix<Scalar> rotated = spectrum.u.transpose() * w * spectrum.v;
  const Eigen::Index r = std::min(rotated.rows(), rotated.cols());
  Vector<Scalar> modes = rotated.diagonal().head(r);
  rotated.diagonal().setZero();
  return {modes, rotated.norm()};
}

}  // namespace lindyn

#endif  // LINDYN_LAYERS_HPP
