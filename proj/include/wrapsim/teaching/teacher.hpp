#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wrapsim/learner/demonstration.hpp"
#include "wrapsim/learner/features.hpp"
#include "wrapsim/random.hpp"
#include "wrapsim/teaching/path.hpp"

namespace wrapsim::teaching {

/// Habitual offset of a teacher from the nominal path: `lateral` is to the
/// left of the direction of travel in the table plane.
struct Offset {
  double lateral = 0.0;   ///< m
  double vertical = 0.0;  ///< m
  double theta = 0.0;     ///< rad
};

/// Noisy path following at constant speed. Deviations are independent
/// Ornstein-Uhlenbeck processes per axis.
struct MotionModel {
  double speed = 0.2;             ///< m/s along the path
  double position_noise = 0.003;  ///< m, stationary SD
  double theta_noise = 0.02;      ///< rad, stationary SD
  double noise_time = 0.5;        ///< s, correlation time
  double sample_dt = learner::kActionDt;

  static MotionModel expert() { return {0.2, 0.0015, 0.01, 0.5, learner::kActionDt}; }
  void validate() const;
};

class Tracker {
 public:
  Tracker(const Path& path, PathRange range, const MotionModel& model, std::uint64_t seed,
          Offset bias = {});

  bool done() const { return done_; }
  /// Path fraction of the pose returned by the last next().
  double fraction() const { return fraction_; }

  /// Pose of the next sample; the first call returns the start pose.
  ArmState next();

  /// Moves the habitual offset toward `target` with time constant `tau`.
  void steer_bias(const Offset& target, double tau);
  const Offset& bias() const { return bias_; }

 private:
  Path path_;
  PathRange range_;
  MotionModel model_;
  Rng rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  Offset bias_;
  Offset noise_;
  double fraction_;
  bool started_ = false;
  bool done_ = false;
};

/// Full traversal of `range` as one demonstration starting at time t0.
learner::Demonstration traverse(const Path& path, PathRange range, learner::DemoLabel label,
                                double t0, const MotionModel& model, std::uint64_t seed,
                                Offset bias = {});

/// Scripted teacher for the segment tasks. During the first demonstration it
/// is shown the perceived signal (psi-equivalent; GUI percentages arrive as
/// 1 + 2 * percent / 100); it then picks the ranges to re-teach.
class SegmentTeacher {
 public:
  virtual ~SegmentTeacher() = default;
  virtual std::string name() const = 0;
  virtual void observe(double fraction, double signal_psi) = 0;
  /// Ranges for the second demonstration, at most `budget` of the path in total.
  virtual std::vector<PathRange> plan(double budget) const = 0;
};

/// Re-teaches where the perceived signal exceeded a threshold.
class ThresholdReactiveTeacher final : public SegmentTeacher {
 public:
  explicit ThresholdReactiveTeacher(double threshold_psi = 2.0, double merge_gap = 0.02);
  std::string name() const override { return "threshold"; }
  void observe(double fraction, double signal_psi) override;
  std::vector<PathRange> plan(double budget) const override;

 private:
  double threshold_;
  double merge_gap_;
  std::vector<std::pair<double, bool>> observations_;
};

/// Ignores feedback and re-teaches a fixed window.
class FixedRegionTeacher final : public SegmentTeacher {
 public:
  /// Window of the planned budget centred on `center`.
  explicit FixedRegionTeacher(double center = 0.5);
  std::string name() const override { return "fixed"; }
  void observe(double, double) override {}
  std::vector<PathRange> plan(double budget) const override;

 private:
  double center_;
};

std::unique_ptr<SegmentTeacher> make_segment_teacher(std::string_view name);

/// Welding teacher: carries a habitual offset in every feature and removes
/// it from a feature while that feature's channel is flagged.
struct WeldTeacher {
  Offset habit{0.03, 0.02, 0.25};
  double threshold_psi = 2.0;
  double correction_time = 0.3;  ///< s
};

}  // namespace wrapsim::teaching
