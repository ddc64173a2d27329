#include "wrapsim/teaching/teacher.hpp"

#include <algorithm>
#include <cmath>

#include "wrapsim/error.hpp"

namespace wrapsim::teaching {

void MotionModel::validate() const {
  if (!(speed > 0.0) || speed > learner::kMaxTeacherSpeed) {
    throw InvalidParameter("teacher speed must be in (0, max teacher speed]");
  }
  if (!(position_noise >= 0.0) || !(theta_noise >= 0.0)) {
    throw InvalidParameter("motion noise must be non-negative");
  }
  if (!(noise_time > 0.0) || !(sample_dt > 0.0)) {
    throw InvalidParameter("motion time constants must be positive");
  }
}

Tracker::Tracker(const Path& path, PathRange range, const MotionModel& model, std::uint64_t seed,
                 Offset bias)
    : path_(path), range_(range), model_(model), rng_(seed), bias_(bias), fraction_(range.begin) {
  model_.validate();
  if (range.begin < 0.0 || range.end > 1.0 || range.end < range.begin) {
    throw InvalidParameter("tracking range must lie inside [0, 1]");
  }
  noise_ = {model_.position_noise * normal_(rng_), model_.position_noise * normal_(rng_),
            model_.theta_noise * normal_(rng_)};
}

ArmState Tracker::next() {
  if (done_) throw StateError("tracker has reached the end of its range");
  if (!started_) {
    started_ = true;
  } else {
    fraction_ += model_.speed * model_.sample_dt / path_.length();
    const double a = std::exp(-model_.sample_dt / model_.noise_time);
    const double b = std::sqrt(1.0 - a * a);
    noise_.lateral = a * noise_.lateral + b * model_.position_noise * normal_(rng_);
    noise_.vertical = a * noise_.vertical + b * model_.position_noise * normal_(rng_);
    noise_.theta = a * noise_.theta + b * model_.theta_noise * normal_(rng_);
  }
  if (fraction_ >= range_.end) {
    fraction_ = range_.end;
    done_ = true;
  }
  ArmState pose = path_.at(fraction_);
  const auto t = path_.tangent(fraction_);
  const double norm = std::hypot(t[0], t[1]);
  const double lateral = bias_.lateral + noise_.lateral;
  if (norm > 0.0) {
    pose.x += -t[1] / norm * lateral;
    pose.y += t[0] / norm * lateral;
  }
  pose.z = std::max(0.0, pose.z + bias_.vertical + noise_.vertical);
  pose.theta = learner::wrap_angle(pose.theta + bias_.theta + noise_.theta);
  return pose;
}

void Tracker::steer_bias(const Offset& target, double tau) {
  const double g = tau > 0.0 ? 1.0 - std::exp(-model_.sample_dt / tau) : 1.0;
  bias_.lateral += g * (target.lateral - bias_.lateral);
  bias_.vertical += g * (target.vertical - bias_.vertical);
  bias_.theta += g * (target.theta - bias_.theta);
}

learner::Demonstration traverse(const Path& path, PathRange range, learner::DemoLabel label,
                                double t0, const MotionModel& model, std::uint64_t seed,
                                Offset bias) {
  Tracker tracker(path, range, model, seed, bias);
  std::vector<double> times;
  std::vector<ArmState> poses;
  while (!tracker.done()) {
    times.push_back(t0 + static_cast<double>(poses.size()) * model.sample_dt);
    poses.push_back(tracker.next());
  }
  return learner::demonstration_from_poses(label, times, poses);
}

ThresholdReactiveTeacher::ThresholdReactiveTeacher(double threshold_psi, double merge_gap)
    : threshold_(threshold_psi), merge_gap_(merge_gap) {}

void ThresholdReactiveTeacher::observe(double fraction, double signal_psi) {
  observations_.emplace_back(fraction, signal_psi > threshold_);
}

std::vector<PathRange> ThresholdReactiveTeacher::plan(double budget) const {
  auto obs = observations_;
  std::stable_sort(obs.begin(), obs.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<PathRange> flagged;
  for (const auto& [fraction, hot] : obs) {
    if (!hot) continue;
    if (!flagged.empty() && fraction - flagged.back().end <= merge_gap_) {
      flagged.back().end = fraction;
    } else {
      flagged.push_back({fraction, fraction});
    }
  }
  std::erase_if(flagged, [](const PathRange& r) { return r.empty(); });
  std::stable_sort(flagged.begin(), flagged.end(),
                   [](const PathRange& a, const PathRange& b) { return a.length() > b.length(); });
  std::vector<PathRange> chosen;
  double left = budget;
  for (auto r : flagged) {
    if (left <= 0.0) break;
    r.end = std::min(r.end, r.begin + left);
    left -= r.length();
    chosen.push_back(r);
  }
  std::sort(chosen.begin(), chosen.end(),
            [](const PathRange& a, const PathRange& b) { return a.begin < b.begin; });
  return chosen;
}

FixedRegionTeacher::FixedRegionTeacher(double center) : center_(center) {}

std::vector<PathRange> FixedRegionTeacher::plan(double budget) const {
  const double len = std::clamp(budget, 0.0, 1.0);
  if (len <= 0.0) return {};
  const double begin = std::clamp(center_ - len / 2.0, 0.0, 1.0 - len);
  return {{begin, begin + len}};
}

std::unique_ptr<SegmentTeacher> make_segment_teacher(std::string_view name) {
  if (name == "threshold") return std::make_unique<ThresholdReactiveTeacher>();
  if (name == "fixed") return std::make_unique<FixedRegionTeacher>();
  throw NotFound("unknown teacher '" + std::string(name) + "'");
}

}  // namespace wrapsim::teaching
