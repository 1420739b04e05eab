#ifndef LINDYN_TRAJECTORY_HPP
#define LINDYN_TRAJECTORY_HPP

#include "lindyn/layers.hpp"

#include <vector>

namespace lindyn {

/// Time-stamped snapshots of a run. `steps` is filled by discrete runs only and
/// `layers` only when requested; every other sequence has one entry per snapshot.
template <typename Scalar>
struct TrajectoryRecord {
  std::vector<Scalar> times;
  std::vector<long> steps;
  std::vector<Matrix<Scalar>> products;
  std::vector<Vector<Scalar>> mode_values;
  std::vector<Scalar> leakage;
  std::vector<Scalar> losses;
  std::vector<LayerStack<Scalar>> layers;

  bool halted = false;    ///< a non-finite value stopped the run
  Scalar last_valid_time = 0;
  long last_valid_step = 0;

  std::size_t size() const { return times.size(); }
  bool empty() const { return times.empty(); }

  void validate() const {
    if (times.empty()) throw Error("trajectory is empty");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1])) throw Error("trajectory times must be strictly increasing");
    const auto n = times.size();
    if (products.size() != n || losses.size() != n) throw Error("trajectory sequences have different lengths");
    if (!mode_values.empty() && mode_values.size() != n) throw Error("mode values do not align with times");
    if (!steps.empty() && steps.size() != n) throw Error("steps do not align with times");
    if (!layers.empty() && layers.size() != n) throw Error("layer snapshots do not align with times");
  }
};

namespace detail {

template <typename Scalar>
void record_snapshot(TrajectoryRecord<Scalar>& rec, const MomentPair<Scalar>& moments,
                     const LayerStack<Scalar>& stack, const JointSpectrum<Scalar>* spectrum, Scalar time,
                     long step, bool discrete, bool keep_layers) {
  Matrix<Scalar> w = stack.product();
  rec.times.push_back(time);
  if (discrete) rec.steps.push_back(step);
  rec.losses.push_back(loss_up_to_constant(moments, w));
  if (spectrum) {
    auto [modes, leak] = project_modes(*spectrum, w);
    rec.mode_values.push_back(std::move(modes));
    rec.leakage.push_back(leak);
  }
  if (keep_layers) rec.layers.push_back(stack);
  rec.products.push_back(std::move(w));
  rec.last_valid_time = time;
  rec.last_valid_step = step;
}

}  // namespace detail

}  // namespace lindyn

#endif  // LINDYN_TRAJECTORY_HPP
