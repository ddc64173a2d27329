#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace wrapsim::learner {

/// End-effector pose. The learner sees the planar part (x, y, theta);
/// z is the height above the table, used only by the welding features.
struct ArmState {
  double x = 0.0;      ///< m
  double y = 0.0;      ///< m
  double theta = 0.0;  ///< rad, wrapped to (-pi, pi]
  double z = 0.0;      ///< m

  friend bool operator==(const ArmState&, const ArmState&) = default;
};

/// Wraps an angle to (-pi, pi].
double wrap_angle(double angle);

/// Pose delta to the next sample.
struct Action {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;
  double dz = 0.0;

  friend bool operator==(const Action&, const Action&) = default;
};

Action pose_delta(const ArmState& from, const ArmState& to);

struct DemoSample {
  double t = 0.0;
  ArmState state;
  Action action;

  friend bool operator==(const DemoSample&, const DemoSample&) = default;
};

enum class DemoLabel { Expert, UserFirst, UserSecond };

std::string_view to_string(DemoLabel label);
DemoLabel demo_label_from_string(std::string_view text);

struct Workspace {
  double x_min = -1.0, x_max = 1.0;
  double y_min = -1.0, y_max = 1.0;
  double z_min = 0.0, z_max = 1.0;

  bool contains(const ArmState& s) const {
    return s.x >= x_min && s.x <= x_max && s.y >= y_min && s.y <= y_max && s.z >= z_min &&
           s.z <= z_max;
  }
};

/// Resampling grid of the learner: actions are next-pose deltas over this step.
inline constexpr double kActionDt = 0.05;

/// Speed limit for human-like teachers (m/s); bounds action magnitudes.
inline constexpr double kMaxTeacherSpeed = 0.5;

struct Demonstration {
  DemoLabel label = DemoLabel::Expert;
  std::vector<DemoSample> samples;

  bool empty() const { return samples.empty(); }
  /// Time from the first to the last sample, idle intervals included.
  double duration() const;
  /// Path length of the (x, y, z) trace.
  double arc_length() const;

  /// Checks strictly increasing timestamps, wrapped angles, and that no
  /// action moves faster than `max_speed`.
  void validate(double max_speed = kMaxTeacherSpeed) const;
};

/// Builds a demonstration whose actions are the deltas to the next pose; the
/// final sample gets a zero action.
Demonstration demonstration_from_poses(DemoLabel label, std::span<const double> times,
                                       std::span<const ArmState> poses);

/// Linearly interpolates the pose trace onto a uniform `dt` grid starting at
/// the first timestamp and recomputes the actions.
Demonstration resample(const Demonstration& demo, double dt = kActionDt);

void to_json(nlohmann::json& j, const DemoSample& sample);
void from_json(const nlohmann::json& j, DemoSample& sample);

/// One JSON object per line: {t, x, y, theta, ax, ay, atheta}, plus z/az for
/// demonstrations that leave the table plane.
void write_jsonl(std::ostream& out, const Demonstration& demo);
Demonstration read_jsonl(std::istream& in, DemoLabel label);

}  // namespace wrapsim::learner
