#pragma once

#include <array>
#include <vector>

#include "wrapsim/learner/demonstration.hpp"

namespace wrapsim::teaching {

using learner::ArmState;

/// Interval of a path in arc-length fraction, 0 = start, 1 = end.
struct PathRange {
  double begin = 0.0;
  double end = 1.0;

  double length() const { return end - begin; }
  bool contains(double fraction) const { return fraction >= begin && fraction <= end; }
  bool empty() const { return !(end > begin); }

  friend bool operator==(const PathRange&, const PathRange&) = default;
};

/// Polyline through waypoints, parametrized by arc-length fraction. Length is
/// measured in (x, y, z); theta is interpolated along with the position.
class Path {
 public:
  explicit Path(std::vector<ArmState> waypoints);

  double length() const { return cumulative_.back(); }
  const std::vector<ArmState>& waypoints() const { return waypoints_; }

  ArmState at(double fraction) const;
  /// Unit tangent (dx, dy, dz) at a fraction.
  std::array<double, 3> tangent(double fraction) const;

  /// Fraction of the closest path point.
  double project(const ArmState& state) const;
  double distance(const ArmState& state) const;

 private:
  std::vector<ArmState> waypoints_;
  std::vector<double> cumulative_;
};

}  // namespace wrapsim::teaching
