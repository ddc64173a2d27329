#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wrapsim/display.hpp"
#include "wrapsim/learner/demonstration.hpp"
#include "wrapsim/learner/ensemble.hpp"
#include "wrapsim/learner/features.hpp"
#include "wrapsim/teaching/task.hpp"
#include "wrapsim/teaching/teacher.hpp"

namespace wrapsim::teaching {

enum class FeedbackMode { None, GUI, Local, Global };

std::string_view to_string(FeedbackMode mode);
FeedbackMode feedback_mode_from_string(std::string_view text);

enum class SessionPhase { Idle, Demo1, Demo2, Complete };

std::string_view to_string(SessionPhase phase);
SessionPhase session_phase_from_string(std::string_view text);

/// One line of a session log.
struct Event {
  std::uint64_t seq = 0;
  double t = 0.0;
  std::string type;
  nlohmann::json payload;
};

void to_json(nlohmann::json& j, const Event& event);
void from_json(const nlohmann::json& j, Event& event);

/// Everything needed to recompute a session's metrics.
struct SessionRecord {
  std::string task;
  FeedbackMode feedback = FeedbackMode::None;
  std::string teacher;
  std::uint64_t seed = 0;
  /// First demonstration, then the pieces of the second, in time order.
  std::vector<learner::Demonstration> demos;
  std::vector<display::RenderFrame> frames;
  /// Feature emphasis the session rendered (welding only).
  std::optional<learner::UncertaintySchedule> schedule;
  /// The first demonstration stopped before the end of the path.
  bool truncated = false;

  std::vector<learner::Demonstration> demos_labelled(learner::DemoLabel label) const;
  /// First-to-last sample time of each demonstration, idle included.
  std::vector<double> wall_times() const;

  /// session_created, phase_change, demo_sample and frame events in time order.
  std::vector<Event> to_events() const;
  /// Inverse of to_events; unknown event types are skipped.
  static SessionRecord from_events(std::span<const Event> events);
};

struct SessionOptions {
  double budget = 1.0 / 3.0;  ///< path fraction a segment teacher may re-teach
  MotionModel motion;
  std::optional<double> time_limit;  ///< s; stops the first demonstration early
  double frame_interval = 0.05;      ///< s between rendered frames
  double transit_time = 1.0;         ///< s between demonstrations
  learner::TrainConfig train;
};

/// Seeds of the parts of a session, derived from the session seed.
std::uint64_t expert_seed(std::uint64_t seed);
std::uint64_t model_seed(std::uint64_t seed);
std::uint64_t teacher_seed(std::uint64_t seed, std::uint64_t piece);
std::uint64_t plant_seed(std::uint64_t seed);

/// Ensemble trained on the expert demonstrations of the known segments.
learner::EnsembleModel initial_model(const TaskSpec& task, std::uint64_t seed,
                                     const learner::TrainConfig& train = {});

/// Display layout of a feedback mode (nullopt for None and GUI).
std::optional<display::Layout> feedback_layout(FeedbackMode mode, std::size_t channels);

/// Segment task: the first demonstration covers the whole path while the
/// initial model's uncertainty is rendered live; the teacher then re-teaches
/// the ranges it picked. `initial` may be passed to skip retraining.
SessionRecord run_session(const TaskSpec& task, SegmentTeacher& teacher, FeedbackMode feedback,
                          std::uint64_t seed, const SessionOptions& options = {},
                          const learner::EnsembleModel* initial = nullptr);

/// Welding task: a feedback-free baseline demonstration, then a full
/// demonstration with the seeded feature emphasis rendered live.
SessionRecord run_welding_session(const TaskSpec& task, const WeldTeacher& teacher,
                                  FeedbackMode feedback, std::uint64_t seed,
                                  const SessionOptions& options = {});

}  // namespace wrapsim::teaching
