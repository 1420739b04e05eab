#ifndef LINDYN_ANALYSIS_HPP
#define LINDYN_ANALYSIS_HPP

#include "lindyn/rrr.hpp"
#include "lindyn/spectral.hpp"
#include "lindyn/trajectory.hpp"

#include <algorithm>
#include <deque>
#include <optional>
#include <utility>
#include <vector>

namespace lindyn {

template <typename Scalar>
struct MetricsRow {
  Scalar time = 0;
  Scalar nuclear_norm = 0;
  Scalar sq_frobenius = 0;
  int effective_rank = 0;
  std::optional<Scalar> reconstruction_error;
};

template <typename Scalar>
struct MetricsOptions {
  Scalar rank_tol = Scalar(1e-3);
  /// Singular values are compared against rank_tol * rank_scale when set, otherwise
  /// against rank_tol times the snapshot's own largest singular value.
  std::optional<Scalar> rank_scale;
  const Matrix<Scalar>* target = nullptr;
};

template <typename Scalar>
MetricsRow<Scalar> matrix_metrics(const Matrix<Scalar>& w, const MetricsOptions<Scalar>& opt) {
  MetricsRow<Scalar> row;
  Eigen::JacobiSVD<Matrix<Scalar>> svd(w);
  const auto& s = svd.singularValues();
  row.nuclear_norm = s.sum();
  row.sq_frobenius = s.squaredNorm();
  const Scalar smax = s.size() ? s(0) : Scalar(0);
  const Scalar threshold = opt.rank_tol * (opt.rank_scale ? *opt.rank_scale : smax);
  row.effective_rank = smax > Scalar(0) ? static_cast<int>((s.array() > threshold).count()) : 0;
  if (opt.target) {
    if (opt.target->rows() != w.rows() || opt.target->cols() != w.cols()) {
      throw ShapeError("reconstruction target is " + shape_str(opt.target->rows(), opt.target->cols()) +
                       ", products are " + shape_str(w.rows(), w.cols()));
    }
    row.reconstruction_error = (w - *opt.target).norm();
  }
  return row;
}

template <typename Scalar>
std::vector<MetricsRow<Scalar>> trajectory_metrics(const TrajectoryRecord<Scalar>& traj,
                                                   const MetricsOptions<Scalar>& opt = {}) {
  if (traj.empty()) throw Error("trajectory is empty");
  traj.validate();
  if (!(opt.rank_tol > Scalar(0))) throw DomainError("rank_tol must be positive");
  std::vector<MetricsRow<Scalar>> rows;
  rows.reserve(traj.size());
  for (std::size_t k = 0; k < traj.size(); ++k) {
    auto row = matrix_metrics(traj.products[k], opt);
    row.time = traj.times[k];
    rows.push_back(std::move(row));
  }
  return rows;
}

struct PlateauReport {
  std::vector<double> transition_times;
  std::vector<double> plateau_values;
  std::vector<std::pair<double, double>> plateau_windows;      ///< (start, end) times
  std::vector<std::pair<std::size_t, std::size_t>> sample_windows;  ///< inclusive sample indices
  double abs_tol = 0;

  std::size_t size() const { return plateau_values.size(); }

  /// Plateaus whose level differs from `baseline` by more than the flatness tolerance.
  std::size_t count_away_from(double baseline) const {
    std::size_t n = 0;
    for (double v : plateau_values)
      if (std::abs(v - baseline) > abs_tol) ++n;
    return n;
  }
};

struct PlateauOptions {
  double flatness_tol = 1e-2;  ///< relative to the series range
  std::size_t min_length = 0;  ///< samples; 0 picks max(3, n / 50)
};

namespace detail {

/// Longest window inside [lo, hi] whose spread is at most tol; two pointers with monotone deques.
inline std::pair<std::size_t, std::size_t> longest_flat_window(const std::vector<double>& x, std::size_t lo,
                                                               std::size_t hi, double tol) {
  std::deque<std::size_t> mx, mn;
  std::pair<std::size_t, std::size_t> best{lo, lo};
  std::size_t j = lo;  // one past the current window end
  for (std::size_t i = lo; i <= hi; ++i) {
    if (j < i) j = i;
    while (j <= hi) {
      const double hi_v = mx.empty() ? x[j] : std::max(x[mx.front()], x[j]);
      const double lo_v = mn.empty() ? x[j] : std::min(x[mn.front()], x[j]);
      if (hi_v - lo_v > tol) break;
      while (!mx.empty() && x[mx.back()] <= x[j]) mx.pop_back();
      while (!mn.empty() && x[mn.back()] >= x[j]) mn.pop_back();
      mx.push_back(j);
      mn.push_back(j);
      ++j;
    }
    if (j - i > best.second - best.first + 1) best = {i, j - 1};
    if (!mx.empty() && mx.front() == i) mx.pop_front();
    if (!mn.empty() && mn.front() == i) mn.pop_front();
  }
  return best;
}

inline void split_plateaus(const std::vector<double>& x, std::size_t lo, std::size_t hi, double tol,
                           std::size_t min_len, std::vector<std::pair<std::size_t, std::size_t>>& out) {
  if (hi < lo || hi - lo + 1 < min_len) return;
  const auto w = longest_flat_window(x, lo, hi, tol);
  if (w.second - w.first + 1 < min_len) return;
  out.push_back(w);
  if (w.first > lo) split_plateaus(x, lo, w.first - 1, tol, min_len, out);
  split_plateaus(x, w.second + 1, hi, tol, min_len, out);
}

}  // namespace detail

/// Plateaus are maximal windows over which the series varies by at most flatness_tol * range
/// and that hold at least min_length samples: the longest such window is taken first and the
/// remainder on either side is searched again. The default min_length of n / 50 keeps a ramp
/// across the whole range from qualifying.
inline PlateauReport detect_plateaus(const std::vector<double>& times, const std::vector<double>& series,
                                     const PlateauOptions& opt = {}) {
  if (series.empty()) throw DomainError("series must be non-empty");
  if (times.size() != series.size()) throw ShapeError("times and series differ in length");
  if (!(opt.flatness_tol > 0.0)) throw DomainError("flatness_tol must be positive");
  const std::size_t n = series.size();
  const auto [lo_it, hi_it] = std::minmax_element(series.begin(), series.end());
  const double range = *hi_it - *lo_it;
  PlateauReport rep;
  rep.abs_tol = opt.flatness_tol * range;

  if (range == 0.0) {
    rep.plateau_values.push_back(series.front());
    rep.plateau_windows.push_back({times.front(), times.back()});
    rep.sample_windows.push_back({0, n - 1});
    return rep;
  }

  const std::size_t min_len = opt.min_length ? opt.min_length : std::max<std::size_t>(3, n / 50);
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  detail::split_plateaus(series, 0, n - 1, rep.abs_tol, min_len, runs);
  std::sort(runs.begin(), runs.end());

  for (const auto& [a, b] : runs) {
    std::vector<double> vals(series.begin() + a, series.begin() + b + 1);
    const auto mid = vals.begin() + vals.size() / 2;
    std::nth_element(vals.begin(), mid, vals.end());
    double level = *mid;
    if (vals.size() % 2 == 0) level = 0.5 * (level + *std::max_element(vals.begin(), mid));
    rep.plateau_values.push_back(level);
    rep.plateau_windows.push_back({times[a], times[b]});
    rep.sample_windows.push_back({a, b});
  }
  // Transition: midpoint of the two samples between which the series crosses the level
  // halfway between neighbouring plateaus; falls back to the gap midpoint.
  for (std::size_t k = 0; k + 1 < runs.size(); ++k) {
    const std::size_t b = runs[k].second;
    const std::size_t a = runs[k + 1].first;
    const double mid_level = 0.5 * (rep.plateau_values[k] + rep.plateau_values[k + 1]);
    double t = 0.5 * (times[b] + times[a]);
    for (std::size_t c = b; c < a; ++c) {
      if ((series[c] > mid_level) != (series[c + 1] > mid_level)) {
        t = 0.5 * (times[c] + times[c + 1]);
        break;
      }
    }
    rep.transition_times.push_back(t);
  }
  return rep;
}

/// Step function on `times` built from a report: each sample takes the level of the
/// plateau whose transition interval contains it.
inline std::vector<double> reconstruct_step(const PlateauReport& rep, const std::vector<double>& times) {
  if (rep.plateau_values.empty()) throw DomainError("report has no plateaus");
  std::vector<double> out(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    std::size_t k = 0;
    while (k < rep.transition_times.size() && times[i] >= rep.transition_times[k]) ++k;
    out[i] = rep.plateau_values[k];
  }
  return out;
}

template <typename Scalar>
struct PlateauDistance {
  int k = 0;
  double t_mid = 0;      ///< requested mid-plateau time
  double t_sample = 0;   ///< snapshot time actually used
  double distance = 0;   ///< |W(t) - W^{k,*}| / |W^{k,*}|
  bool reached = false;  ///< t_mid lies within the recorded horizon
};

/// Relative distance of the trajectory to each rank-k RRR solution at the geometric
/// mid-plateau delta * sqrt(T_k T_{k+1}), T_i = 1/sigma_i in the record's time units.
/// The last mode's upper end is the recorded horizon.
template <typename Scalar>
std::vector<PlateauDistance<Scalar>> compare_plateaus_to_rrr(const TrajectoryRecord<Scalar>& traj,
                                                             const JointSpectrum<Scalar>& spectrum,
                                                             const MomentPair<Scalar>& moments, double delta,
                                                             int max_k) {
  traj.validate();
  if (!(delta > 0.0)) throw DomainError("delta must be positive");
  std::vector<PlateauDistance<Scalar>> out;
  const int kmax = std::min(max_k, spectrum.r_xy);
  const double t_end = static_cast<double>(traj.times.back());
  for (int k = 1; k <= kmax; ++k) {
    const double start = delta / static_cast<double>(spectrum.sigma(k - 1));
    double end = k < spectrum.r_xy ? delta / static_cast<double>(spectrum.sigma(k)) : t_end;
    end = std::min(end, t_end);
    PlateauDistance<Scalar> pd;
    pd.k = k;
    pd.t_mid = std::sqrt(start * std::max(end, start));
    pd.reached = pd.t_mid <= t_end;
    std::size_t best = 0;
    for (std::size_t i = 1; i < traj.size(); ++i) {
      if (std::abs(double(traj.times[i]) - pd.t_mid) < std::abs(double(traj.times[best]) - pd.t_mid)) best = i;
    }
    pd.t_sample = static_cast<double>(traj.times[best]);
    const auto sol = rrr_solve(moments, k);
    pd.distance = static_cast<double>((traj.products[best] - sol.w).norm() / sol.w.norm());
    out.push_back(pd);
  }
  return out;
}

}  // namespace lindyn

#endif  // LINDYN_ANALYSIS_HPP
