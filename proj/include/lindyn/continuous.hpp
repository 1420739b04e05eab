#ifndef LINDYN_CONTINUOUS_HPP
#define LINDYN_CONTINUOUS_HPP

#include "lindyn/layers.hpp"
#include "lindyn/rrr.hpp"
#include "lindyn/spectral.hpp"
#include "lindyn/trajectory.hpp"

#include <optional>
#include <variant>
#include <vector>

namespace lindyn {

/// Gradient flow of the one-layer model: W(t) = e^{-t Sigma_x}(W0 - W*) + W* with W* = Sigma_x^+ Sigma_xy.
template <typename Scalar>
Matrix<Scalar> closed_form_linear(const MomentPair<Scalar>& moments, const Matrix<Scalar>& w0, Scalar t) {
  moments.validate();
  if (w0.rows() != moments.d() || w0.cols() != moments.p()) {
    throw ShapeError("W0 is " + shape_str(w0.rows(), w0.cols()) + ", expected " +
                     shape_str(moments.d(), moments.p()));
  }
  if (!(t >= Scalar(0))) throw DomainError("t must be nonnegative");
  if (t == Scalar(0)) return w0;
  const Matrix<Scalar> w_star = ols_min_norm(moments);
  const auto eig = symmetric_eigen(moments.sigma_x);
  const Matrix<Scalar> decay = spectral_apply(eig, [t](Scalar l) { return std::exp(-t * l); });
  return decay * (w0 - w_star) + w_star;
}

struct ModeParams {
  double sigma = 0;
  double lambda = 1;
  double w0 = 0;
  double delta = 0;

  static ModeParams from_delta(double sigma, double lambda, double delta) {
    return {sigma, lambda, std::exp(-2.0 * delta), delta};
  }

  void validate() const {
    if (!(sigma >= 0.0)) throw DomainError("sigma must be nonnegative");
    if (sigma > 0.0) {
      if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
      if (!(w0 > 0.0 && w0 < sigma / lambda)) throw DomainError("w0 must lie in (0, sigma/lambda)");
    } else {
      if (!(lambda >= 0.0)) throw DomainError("lambda must be nonnegative");
      if (!(w0 > 0.0 && w0 < 1.0)) throw DomainError("w0 must lie in (0, 1) for sigma = 0");
    }
  }
};

/// Two-layer per-mode solution. For sigma > 0 it is the logistic
/// w0 sigma / (w0 lambda (1 - e^{-2 sigma t}) + sigma e^{-2 sigma t}), written with
/// decaying exponentials so large t cannot overflow; for sigma = 0, w0 / (1 + 2 w0 lambda t).
inline double closed_form_mode(const ModeParams& mode, double t) {
  mode.validate();
  if (!(t >= 0.0)) throw DomainError("t must be nonnegative");
  if (t == 0.0) return mode.w0;
  if (mode.sigma == 0.0) return mode.w0 / (1.0 + 2.0 * mode.w0 * mode.lambda * t);
  const double decay = std::exp(-2.0 * mode.sigma * t);
  return mode.w0 * mode.sigma / (mode.w0 * mode.lambda * -std::expm1(-2.0 * mode.sigma * t) + mode.sigma * decay);
}

inline std::vector<double> phase_times(const std::vector<double>& sigmas, std::optional<double> eta = std::nullopt) {
  if (eta && !(*eta > 0.0)) throw DomainError("eta must be positive");
  std::vector<double> out;
  out.reserve(sigmas.size());
  for (double s : sigmas) {
    if (!(s > 0.0)) throw DomainError("phase times need strictly positive singular values");
    out.push_back(eta ? 1.0 / (*eta * s) : 1.0 / s);
  }
  return out;
}

template <typename Scalar>
struct LimitProfile {
  Vector<Scalar> mode_values;
  Scalar sq_norm = 0;
  Matrix<Scalar> product_matrix;
  int rank = 0;
  bool knife_edge = false;
  std::vector<int> knife_edge_modes;  ///< zero-based indices with t == 1/sigma_i
};

/// Vanishing-initialization limit of the rescaled two-layer flow at rescaled time t.
template <typename Scalar>
LimitProfile<Scalar> limit_profile(const JointSpectrum<Scalar>& spectrum, Scalar t) {
  if (!(t >= Scalar(0))) throw DomainError("t must be nonnegative");
  LimitProfile<Scalar> out;
  out.mode_values = Vector<Scalar>::Zero(spectrum.r_xy);
  out.product_matrix = Matrix<Scalar>::Zero(spectrum.u.rows(), spectrum.v.rows());
  for (int i = 0; i < spectrum.r_xy; ++i) {
    const Scalar s = spectrum.sigma(i);
    const Scalar l = spectrum.lambda(i);
    const Scalar ti = Scalar(1) / s;
    if (t < ti) continue;
    if (!(l > Scalar(0))) throw DomainError("mode " + std::to_string(i + 1) + " has lambda <= 0; limit undefined");
    if (t == ti) {
      out.mode_values(i) = s / (l + s);
      out.knife_edge = true;
      out.knife_edge_modes.push_back(i);
    } else {
      out.mode_values(i) = s / l;
      out.product_matrix += (s / l) * spectrum.u.col(i) * spectrum.v.col(i).transpose();
      ++out.rank;
    }
    out.sq_norm += out.mode_values(i) * out.mode_values(i);
  }
  return out;
}

template <typename Scalar>
struct FlowConfig {
  std::vector<int> widths;
  LayerInit<Scalar> init = Thm1Init<Scalar>{};
  Scalar horizon = 1;
  Scalar step = Scalar(1e-3);
  long record_every = 1;  ///< snapshot stride in integration steps
  bool record_layers = false;

  void validate(Eigen::Index d, Eigen::Index p) const {
    check_widths(widths, d, p);
    if (!(step > Scalar(0))) throw DomainError("step must be positive");
    if (!(horizon >= step)) throw DomainError("horizon must be at least one step");
    if (record_every < 1) throw DomainError("record stride must be positive");
  }
};

/// Resolves the configured initialization to explicit layers.
template <typename Scalar>
LayerStack<Scalar> resolve_init(const LayerInit<Scalar>& init, const std::vector<int>& widths,
                                const JointSpectrum<Scalar>* spectrum) {
  if (const auto* explicit_stack = std::get_if<LayerStack<Scalar>>(&init)) {
    if (explicit_stack->widths() != widths) throw ShapeError("explicit initialization does not match layer widths");
    return *explicit_stack;
  }
  if (!spectrum) throw Error("spectral initialization needs a joint spectrum");
  return thm1_layers(*spectrum, widths, std::get<Thm1Init<Scalar>>(init));
}

namespace detail {

template <typename Scalar>
void axpy_layers(LayerStack<Scalar>& out, const LayerStack<Scalar>& base, Scalar h,
                 const std::vector<Matrix<Scalar>>& dir) {
  for (std::size_t l = 0; l < base.layers.size(); ++l) out.layers[l] = base.layers[l] + h * dir[l];
}

}  // namespace detail

/// Classical fixed-step RK4 on W_l' = -grad_l f for all layers jointly.
/// Mode values are recorded when a spectrum is given or computed for a spectral init.
template <typename Scalar>
TrajectoryRecord<Scalar> integrate_flow(const MomentPair<Scalar>& moments, const FlowConfig<Scalar>& config,
                                        const JointSpectrum<Scalar>* spectrum = nullptr) {
  moments.validate();
  config.validate(moments.d(), moments.p());
  std::optional<JointSpectrum<Scalar>> own;
  if (!spectrum && std::holds_alternative<Thm1Init<Scalar>>(config.init)) {
    own = joint_decompose(moments);
    spectrum = &*own;
  }
  LayerStack<Scalar> w = resolve_init(config.init, config.widths, spectrum);

  const long total = static_cast<long>(std::llround(config.horizon / config.step));
  const Scalar h = config.step;
  TrajectoryRecord<Scalar> rec;
  detail::record_snapshot(rec, moments, w, spectrum, Scalar(0), 0, false, config.record_layers);

  LayerStack<Scalar> stage = w;
  for (long n = 1; n <= total; ++n) {
    auto k1 = layer_gradients(moments, w);
    detail::axpy_layers(stage, w, -h / 2, k1);
    auto k2 = layer_gradients(moments, stage);
    detail::axpy_layers(stage, w, -h / 2, k2);
    auto k3 = layer_gradients(moments, stage);
    detail::axpy_layers(stage, w, -h, k3);
    auto k4 = layer_gradients(moments, stage);
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
      w.layers[l] -= (h / 6) * (k1[l] + Scalar(2) * k2[l] + Scalar(2) * k3[l] + k4[l]);
    }
    if (!w.all_finite()) {
      rec.halted = true;
      return rec;
    }
    if (n % config.record_every == 0 || n == total) {
      detail::record_snapshot(rec, moments, w, spectrum, static_cast<Scalar>(n) * h, n, false,
                              config.record_layers);
    }
  }
  return rec;
}

template <typename Scalar>
struct RefinedFlow {
  TrajectoryRecord<Scalar> record;
  Scalar step = 0;       ///< step of the accepted run
  Scalar agreement = 0;  ///< max product difference against the previous refinement at shared snapshots
  bool converged = false;
};

/// Halves the RK4 step until two successive runs agree to `tol` (max norm over shared
/// snapshot times). The snapshot grid is kept fixed in time while the step shrinks.
template <typename Scalar>
RefinedFlow<Scalar> integrate_flow_refined(const MomentPair<Scalar>& moments, FlowConfig<Scalar> config,
                                           Scalar tol = Scalar(1e-9), int max_halvings = 12,
                                           const JointSpectrum<Scalar>* spectrum = nullptr) {
  RefinedFlow<Scalar> out;
  out.record = integrate_flow(moments, config, spectrum);
  out.step = config.step;
  for (int i = 0; i < max_halvings; ++i) {
    config.step /= 2;
    config.record_every *= 2;
    auto next = integrate_flow(moments, config, spectrum);
    if (next.halted || out.record.halted || next.size() != out.record.size()) {
      out.record = std::move(next);
      out.step = config.step;
      continue;
    }
    Scalar diff = 0;
    for (std::size_t k = 0; k < next.size(); ++k) {
      diff = std::max<Scalar>(diff, (next.products[k] - out.record.products[k]).cwiseAbs().maxCoeff());
    }
    out.record = std::move(next);
    out.step = config.step;
    out.agreement = diff;
    if (diff <= tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

template <typename Scalar>
struct PerturbationGap {
  std::vector<Scalar> times;
  std::vector<std::vector<Scalar>> gaps;  ///< gaps[k][l] = |W_l(t_k) - W_l^0(t_k)|_F
};

/// Integrates the true flow and the flow with B removed (Sigma_x replaced by U D_x U^T)
/// from one initialization and reports the per-layer Frobenius gap at each snapshot.
template <typename Scalar>
PerturbationGap<Scalar> perturbation_gap(const MomentPair<Scalar>& moments, FlowConfig<Scalar> config) {
  const auto spectrum = joint_decompose(moments);
  config.init = resolve_init(config.init, config.widths, &spectrum);
  config.record_layers = true;

  MomentPair<Scalar> commuting = moments;
  Matrix<Scalar> sx0 = spectrum.u * spectrum.lambda.asDiagonal() * spectrum.u.transpose();
  commuting.sigma_x = (sx0 + sx0.transpose()) * Scalar(0.5);

  const auto full = integrate_flow(moments, config, &spectrum);
  const auto base = integrate_flow(commuting, config, &spectrum);
  PerturbationGap<Scalar> out;
  const std::size_t n = std::min(full.size(), base.size());
  for (std::size_t k = 0; k < n; ++k) {
    out.times.push_back(full.times[k]);
    std::vector<Scalar> row;
    for (std::size_t l = 0; l < full.layers[k].layers.size(); ++l) {
      row.push_back((full.layers[k].layers[l] - base.layers[k].layers[l]).norm());
    }
    out.gaps.push_back(std::move(row));
  }
  return out;
}

}  // namespace lindyn

#endif  // LINDYN_CONTINUOUS_HPP
