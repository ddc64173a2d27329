#pragma once

#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "wrapsim/learner/demonstration.hpp"
#include "wrapsim/learner/ensemble.hpp"
#include "wrapsim/teaching/path.hpp"
#include "wrapsim/teaching/session.hpp"
#include "wrapsim/teaching/task.hpp"

namespace wrapsim::teaching {

/// Fields that do not apply to a task are empty: uncertainty metrics for the
/// welding task, weld error for the segment tasks.
struct Metrics {
  double teaching_time = 0.0;  ///< s, first to last sample of the evaluated demonstration
  double idle_time = 0.0;      ///< s spent below kIdleSpeed within teaching_time
  std::optional<double> correct_segment;   ///< percent
  std::optional<double> improvement_u;     ///< percent
  std::optional<double> improvement_weld;  ///< percent
  std::optional<double> u1;
  std::optional<double> u2;
  std::optional<double> e_init;
  std::optional<double> e;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

void to_json(nlohmann::json& j, const Metrics& m);
void from_json(const nlohmann::json& j, Metrics& m);

inline constexpr double kIdleSpeed = 1e-3;  ///< m/s

/// Percent of the demonstration's arc length inside `region`. Each sample
/// interval is attributed by the path fraction of its midpoint. An empty
/// or motionless demonstration scores 0.
double correct_segment(std::span<const learner::Demonstration> demo2, const Path& path,
                       PathRange region);

double improvement_uncertainty(double u1, double u2);

/// Mean normalized uncertainty at `points` evenly spaced nominal-path poses.
double mean_path_uncertainty(const learner::EnsembleModel& model, const Path& path,
                             std::size_t points = 200);

/// Arc-length-weighted mean over the trajectory of the summed absolute
/// feature errors; the orientation difference is wrapped.
double weld_error(const learner::Demonstration& trajectory, const WeldTargets& targets);

double improvement_weld(double e_init, double e, double e_max);

/// Time spent moving slower than kIdleSpeed, gaps between pieces included.
double idle_time(std::span<const learner::Demonstration> demos);

/// First-to-last sample time over all pieces.
double teaching_time(std::span<const learner::Demonstration> demos);

/// Recomputes every metric from a record. The segment tasks retrain the
/// ensemble on the expert data plus the second demonstration; `initial`
/// skips retraining the expert-only model when the caller has it.
Metrics compute_metrics(const TaskSpec& task, const SessionRecord& record,
                        const learner::TrainConfig& train = {},
                        const learner::EnsembleModel* initial = nullptr);

std::string metrics_csv_header();
std::string metrics_csv_row(std::string_view session_id, const SessionRecord& record,
                            const Metrics& metrics);

}  // namespace wrapsim::teaching
