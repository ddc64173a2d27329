#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wrapsim/learner/demonstration.hpp"
#include "wrapsim/learner/ensemble.hpp"

namespace wrapsim::learner {

/// Welding features, in channel order.
enum class Feature { EdgeDistance, Height, Orientation };

inline constexpr std::array<Feature, 3> kFeatures{Feature::EdgeDistance, Feature::Height,
                                                  Feature::Orientation};

std::string_view to_string(Feature feature);
Feature feature_from_string(std::string_view text);

using FeatureVector = std::array<double, 3>;

/// (distance to the table edge, height above the table, orientation). The
/// table edge runs along the x axis, so the edge distance is y.
FeatureVector feature_values(const ArmState& state);

/// Progress along a weld running in +x from x_start to x_end.
struct ProgressAxis {
  double x_start = 0.0;
  double x_end = 1.0;

  double operator()(const ArmState& state) const;
};

struct ScheduleSegment {
  double begin = 0.0;  ///< progress fraction, inclusive
  double end = 1.0;    ///< exclusive, except for the last segment
  std::optional<Feature> active;
};

/// Scripted per-segment prompts: the active feature reads 1, the others 0.
struct UncertaintySchedule {
  std::vector<ScheduleSegment> segments;

  /// One segment per path third, the i-th third emphasizing order[i].
  static UncertaintySchedule thirds(const std::array<Feature, 3>& order);

  FeatureVector at(double progress) const;

  void validate() const;
};

void to_json(nlohmann::json& j, const UncertaintySchedule& schedule);
void from_json(const nlohmann::json& j, UncertaintySchedule& schedule);

/// One ensemble per feature. Head f maps (progress, phi_f) to the change of
/// phi_f over one action step.
class FeatureEnsemble {
 public:
  static FeatureEnsemble train(std::span<const Demonstration> demos, const ProgressAxis& axis,
                               const TrainConfig& config);

  FeatureVector uncertainty(const ArmState& state) const;
  const EnsembleModel& head(Feature feature) const;
  const ProgressAxis& axis() const { return axis_; }

 private:
  std::array<EnsembleModel, 3> heads_;
  ProgressAxis axis_;
};

/// Exactly one of `learned` and `scripted` must be set.
struct FeatureSource {
  const FeatureEnsemble* learned = nullptr;
  const UncertaintySchedule* scripted = nullptr;
  ProgressAxis axis;
};

/// Per-feature uncertainty (edge distance, height, orientation), each in
/// [0, 1]. Throws ConfigurationError unless exactly one source is set.
FeatureVector feature_uncertainty(const FeatureSource& source, const ArmState& state);

}  // namespace wrapsim::learner
