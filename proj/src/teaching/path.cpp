#include "wrapsim/teaching/path.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "wrapsim/error.hpp"

namespace wrapsim::teaching {

namespace {

double span(const ArmState& a, const ArmState& b) {
  return std::sqrt((b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y) +
                   (b.z - a.z) * (b.z - a.z));
}

}  // namespace

Path::Path(std::vector<ArmState> waypoints) : waypoints_(std::move(waypoints)) {
  if (waypoints_.size() < 2) throw InvalidParameter("a path needs at least two waypoints");
  cumulative_.push_back(0.0);
  for (std::size_t i = 1; i < waypoints_.size(); ++i) {
    const double d = span(waypoints_[i - 1], waypoints_[i]);
    if (!(d > 0.0)) throw InvalidParameter("path has coincident waypoints");
    cumulative_.push_back(cumulative_.back() + d);
  }
}

ArmState Path::at(double fraction) const {
  const double s = std::clamp(fraction, 0.0, 1.0) * length();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  const std::size_t i =
      std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), waypoints_.size() - 1) - 1;
  const auto& a = waypoints_[i];
  const auto& b = waypoints_[i + 1];
  const double w = (s - cumulative_[i]) / (cumulative_[i + 1] - cumulative_[i]);
  return {a.x + w * (b.x - a.x), a.y + w * (b.y - a.y),
          learner::wrap_angle(a.theta + w * learner::wrap_angle(b.theta - a.theta)),
          a.z + w * (b.z - a.z)};
}

std::array<double, 3> Path::tangent(double fraction) const {
  const double s = std::clamp(fraction, 0.0, 1.0) * length();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  const std::size_t i =
      std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), waypoints_.size() - 1) - 1;
  const auto& a = waypoints_[i];
  const auto& b = waypoints_[i + 1];
  const double d = cumulative_[i + 1] - cumulative_[i];
  return {(b.x - a.x) / d, (b.y - a.y) / d, (b.z - a.z) / d};
}

double Path::project(const ArmState& p) const {
  double best = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  for (std::size_t i = 0; i + 1 < waypoints_.size(); ++i) {
    const auto& a = waypoints_[i];
    const auto& b = waypoints_[i + 1];
    const double len = cumulative_[i + 1] - cumulative_[i];
    const double w = std::clamp(((p.x - a.x) * (b.x - a.x) + (p.y - a.y) * (b.y - a.y) +
                                 (p.z - a.z) * (b.z - a.z)) /
                                    (len * len),
                                0.0, 1.0);
    const ArmState q{a.x + w * (b.x - a.x), a.y + w * (b.y - a.y), 0.0, a.z + w * (b.z - a.z)};
    const double d = span(p, q);
    if (d < best) {
      best = d;
      best_s = cumulative_[i] + w * len;
    }
  }
  return best_s / length();
}

double Path::distance(const ArmState& state) const {
  const ArmState q = at(project(state));
  return span(state, q);
}

}  // namespace wrapsim::teaching
