#ifndef LINDYN_DISCRETE_HPP
#define LINDYN_DISCRETE_HPP

#include "lindyn/continuous.hpp"
#include "lindyn/layers.hpp"
#include "lindyn/rrr.hpp"
#include "lindyn/trajectory.hpp"

#include <cstdio>
#include <string>
#include <vector>

namespace lindyn {

template <typename Scalar>
struct LossValue {
  enum class Convention { Exact, UpToConstant };
  Scalar value = 0;
  Convention convention = Convention::Exact;

  std::string label() const { return convention == Convention::Exact ? "exact" : "up_to_constant"; }
};

/// (1 / 2n) |Y - X W_1...W_L|_F^2.
template <typename Scalar>
LossValue<Scalar> evaluate_loss(const DataMatrixPair<Scalar>& data, const LayerStack<Scalar>& stack) {
  data.validate();
  stack.validate(data.d(), data.p());
  const Scalar sq = (data.y - data.x * stack.product()).squaredNorm();
  return {sq / (Scalar(2) * static_cast<Scalar>(data.n())), LossValue<Scalar>::Convention::Exact};
}

/// Same objective minus |Y|^2 / 2n, which the moments do not determine.
template <typename Scalar>
LossValue<Scalar> evaluate_loss(const MomentPair<Scalar>& moments, const LayerStack<Scalar>& stack) {
  stack.validate(moments.d(), moments.p());
  return {loss_up_to_constant(moments, stack.product()), LossValue<Scalar>::Convention::UpToConstant};
}

template <typename Scalar>
struct GDConfig {
  std::vector<int> widths;
  LayerInit<Scalar> init = Thm1Init<Scalar>{};
  Scalar eta = Scalar(1e-2);
  long steps = 0;
  long record_stride = 1;
  bool record_layers = false;

  void validate(Eigen::Index d, Eigen::Index p) const {
    check_widths(widths, d, p);
    if (!(eta > Scalar(0))) throw DomainError("eta must be positive");
    if (steps < 0) throw DomainError("steps must be nonnegative");
    if (record_stride < 1) throw DomainError("record stride must be positive");
  }
};

/// Gradient descent with simultaneous layer updates; snapshot times are step * eta.
template <typename Scalar>
TrajectoryRecord<Scalar> run_gd(const MomentPair<Scalar>& moments, const GDConfig<Scalar>& config,
                                const JointSpectrum<Scalar>* spectrum = nullptr) {
  moments.validate();
  config.validate(moments.d(), moments.p());
  std::optional<JointSpectrum<Scalar>> own;
  if (!spectrum && std::holds_alternative<Thm1Init<Scalar>>(config.init)) {
    own = joint_decompose(moments);
    spectrum = &*own;
  }
  LayerStack<Scalar> w = resolve_init(config.init, config.widths, spectrum);

  TrajectoryRecord<Scalar> rec;
  detail::record_snapshot(rec, moments, w, spectrum, Scalar(0), 0, true, config.record_layers);
  for (long t = 1; t <= config.steps; ++t) {
    const auto grads = layer_gradients(moments, w);
    for (std::size_t l = 0; l < w.layers.size(); ++l) w.layers[l] -= config.eta * grads[l];
    if (!w.all_finite()) {
      rec.halted = true;
      return rec;
    }
    if (t % config.record_stride == 0 || t == config.steps) {
      detail::record_snapshot(rec, moments, w, spectrum, static_cast<Scalar>(t) * config.eta, t, true,
                              config.record_layers);
    }
  }
  return rec;
}

/// One-layer descent after t steps: (I - eta Sigma_x)^t (W0 - W*) + W*.
template <typename Scalar>
Matrix<Scalar> linear_gd_closed_form(const MomentPair<Scalar>& moments, const Matrix<Scalar>& w0, Scalar eta,
                                     long t) {
  moments.validate();
  if (w0.rows() != moments.d() || w0.cols() != moments.p()) {
    throw ShapeError("W0 is " + shape_str(w0.rows(), w0.cols()) + ", expected " +
                     shape_str(moments.d(), moments.p()));
  }
  if (t < 0) throw DomainError("t must be nonnegative");
  const auto eig = symmetric_eigen(moments.sigma_x);
  const Scalar lmax = eig.values(0);
  if (!(eta > Scalar(0)) || !(eta * lmax < Scalar(1))) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "eta must lie in (0, 1/lambda_max) with lambda_max = %.17g", double(lmax));
    throw DomainError(buf);
  }
  if (t == 0) return w0;
  const Matrix<Scalar> w_star = ols_min_norm(moments);
  const Matrix<Scalar> power =
      spectral_apply(eig, [&](Scalar l) { return std::pow(Scalar(1) - eta * l, static_cast<Scalar>(t)); });
  return power * (w0 - w_star) + w_star;
}

struct ModeTrace {
  std::vector<double> w;
  std::vector<double> m;
  std::vector<double> n;
};

/// Iterates a' = a + eta a (sigma - lambda a)(2 + eta (sigma - lambda a)), the product of two
/// symmetric diagonal layers m = n = sqrt(a) under simultaneous updates.
inline ModeTrace mode_recursion(double sigma, double lambda, double w0, double eta, long steps) {
  if (!(sigma >= 0.0) || !(lambda >= 0.0)) throw DomainError("sigma and lambda must be nonnegative");
  if (!(eta >= 0.0)) throw DomainError("eta must be nonnegative");
  if (!(2.0 * eta * sigma < 1.0)) throw DomainError("step-size condition 2 eta sigma < 1 violated");
  if (!(w0 > 0.0)) throw DomainError("w0 must be positive");
  if (sigma > 0.0 && !(lambda > 0.0 && w0 < sigma / lambda)) throw DomainError("w0 must lie in (0, sigma/lambda)");
  if (steps < 0) throw DomainError("steps must be nonnegative");
  ModeTrace out;
  out.w.reserve(steps + 1);
  double a = w0;
  out.w.push_back(a);
  for (long t = 0; t < steps; ++t) {
    const double g = sigma - lambda * a;
    a = a + eta * a * g * (2.0 + eta * g);
    out.w.push_back(a);
  }
  out.m.reserve(out.w.size());
  for (double v : out.w) out.m.push_back(std::sqrt(v));
  out.n = out.m;
  return out;
}

struct Envelope {
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Two-sided bound on the mode recursion. The lower end is
/// sigma w0 / ((sigma - lambda w0) e^{(-2 eta sigma + 4 eta^2 sigma^2) t} + lambda w0).
/// The upper end uses the per-step contraction (1 - 2 eta sigma - eta^2 sigma^2)^t of the gap
/// 1/a - lambda/sigma; its exponential relaxation is not a bound (see thm3_upper_exponential).
inline Envelope thm3_envelope(double sigma, double lambda, double w0, double eta, long steps) {
  mode_recursion(sigma, lambda, w0, eta, 0);  // same preconditions
  Envelope env;
  env.lower.reserve(steps + 1);
  env.upper.reserve(steps + 1);
  if (sigma == 0.0) {
    for (long t = 0; t <= steps; ++t) {
      env.lower.push_back(0.0);
      env.upper.push_back(w0 / (1.0 + w0 * lambda * eta * static_cast<double>(t)));
    }
    env.lower[0] = w0;
    return env;
  }
  const double gap = sigma - lambda * w0;
  const double rate_lower = -2.0 * eta * sigma + 4.0 * eta * eta * sigma * sigma;
  const double base_upper = std::max(0.0, 1.0 - 2.0 * eta * sigma - eta * eta * sigma * sigma);
  for (long t = 0; t <= steps; ++t) {
    const double tt = static_cast<double>(t);
    env.lower.push_back(sigma * w0 / (gap * std::exp(rate_lower * tt) + w0 * lambda));
    env.upper.push_back(sigma * w0 / (gap * std::pow(base_upper, tt) + w0 * lambda));
  }
  return env;
}

/// The exponential form sigma w0 / ((sigma - lambda w0) e^{(-2 eta sigma - eta^2 sigma^2) t} + lambda w0).
/// Since (1 - c)^t <= e^{-ct}, this sits below the geometric upper bound and the recursion
/// overtakes it near convergence; it is exposed so tests can document that.
inline double thm3_upper_exponential(double sigma, double lambda, double w0, double eta, long t) {
  const double rate = -2.0 * eta * sigma - eta * eta * sigma * sigma;
  return sigma * w0 / ((sigma - lambda * w0) * std::exp(rate * static_cast<double>(t)) + w0 * lambda);
}

struct GateBound {
  std::string name;
  int index = 0;  ///< zero-based mode index i (the pair i, i+1 for gap bounds)
  double bound = 0;
  double margin = 0;  ///< bound - eta
};

struct GateResult {
  bool pass = true;
  std::vector<GateBound> bounds;
};

/// eta < 1/(2 sigma_1), eta < 2(sigma_i - sigma_{i+1})/sigma_i^2, eta < (sigma_i - sigma_{i+1})/(2 sigma_{i+1}^2).
inline GateResult stepsize_gate(const std::vector<double>& sigmas, double eta) {
  if (sigmas.empty()) throw DomainError("stepsize gate needs at least one singular value");
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    if (!(sigmas[i] > 0.0)) throw DomainError("singular values must be positive");
    if (i > 0) {
      const double gap = sigmas[i - 1] - sigmas[i];
      if (std::abs(gap) <= 1e-12 * sigmas[i - 1]) {
        throw DomainError("singular values " + std::to_string(i) + " and " + std::to_string(i + 1) +
                          " are repeated; the eigen-gap is zero");
      }
      if (gap < 0.0) throw DomainError("singular values must be strictly decreasing");
    }
  }
  GateResult res;
  auto add = [&](std::string name, int index, double bound) {
    const double margin = bound - eta;
    if (!(eta < bound)) res.pass = false;
    res.bounds.push_back({std::move(name), index, bound, margin});
  };
  add("half_inverse_sigma1", 0, 1.0 / (2.0 * sigmas[0]));
  for (std::size_t i = 0; i + 1 < sigmas.size(); ++i) {
    const double gap = sigmas[i] - sigmas[i + 1];
    add("gap_over_sigma_i", static_cast<int>(i), 2.0 * gap / (sigmas[i] * sigmas[i]));
    add("gap_over_sigma_next", static_cast<int>(i), gap / (2.0 * sigmas[i + 1] * sigmas[i + 1]));
  }
  return res;
}

}  // namespace lindyn

#endif  // LINDYN_DISCRETE_HPP
