#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wrapsim/learner/demonstration.hpp"
#include "wrapsim/learner/features.hpp"
#include "wrapsim/teaching/path.hpp"

namespace wrapsim::teaching {

struct Segment {
  PathRange range;
  bool known = true;  ///< false: withheld from the expert data
};

/// Target feature values of the welding task.
struct WeldTargets {
  double edge_distance = 0.05;  ///< m
  double height = 0.02;         ///< m
  double orientation = 0.0;     ///< rad

  learner::FeatureVector values() const { return {edge_distance, height, orientation}; }
};

struct TaskSpec {
  std::string name;
  std::vector<ArmState> nominal_path;
  std::vector<Segment> segments;
  learner::Workspace workspace;
  std::optional<WeldTargets> weld;
  /// Default per-segment emphasis of a welding task (sessions draw their own).
  std::optional<learner::UncertaintySchedule> emphasis;
  double e_max = 1.0;

  Path path() const { return Path(nominal_path); }
  bool is_welding() const { return weld.has_value(); }

  /// Hull of the segments that are not known. Throws StateError when every
  /// segment is known.
  PathRange uncertain_region() const;

  /// Segments must tile [0, 1] in order; e_max > 0; welding tasks need one
  /// emphasized feature per segment.
  void validate() const;
};

void to_json(nlohmann::json& j, const TaskSpec& task);
void from_json(const nlohmann::json& j, TaskSpec& task);

/// Synthetic three-segment tasks ("reach_start", "reach_middle",
/// "reach_end", named for the withheld segment) and "welding".
std::vector<std::string> task_names();
/// Throws NotFound for an unknown name.
TaskSpec make_task(std::string_view name);

/// Largest feature error the workspace allows, summed over the features.
double weld_e_max(const learner::Workspace& workspace, const WeldTargets& targets);

/// Seeded assignment of the three features to the path thirds.
learner::UncertaintySchedule uncertainty_schedule(const TaskSpec& task, std::uint64_t seed);

inline constexpr std::size_t kExpertDemoCount = 5;

/// Scripted expert demonstrations of the known segments only. Each
/// contiguous known stretch becomes its own demonstration.
std::vector<learner::Demonstration> expert_demos(const TaskSpec& task, std::uint64_t seed);

}  // namespace wrapsim::teaching
