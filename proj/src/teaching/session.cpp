#include "wrapsim/teaching/session.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "wrapsim/error.hpp"
#include "wrapsim/learner/learner.hpp"
#include "wrapsim/random.hpp"

namespace wrapsim::teaching {

std::string_view to_string(FeedbackMode mode) {
  switch (mode) {
    case FeedbackMode::None:
      return "none";
    case FeedbackMode::GUI:
      return "gui";
    case FeedbackMode::Local:
      return "local";
    case FeedbackMode::Global:
      return "global";
  }
  return "?";
}

FeedbackMode feedback_mode_from_string(std::string_view text) {
  for (auto m : {FeedbackMode::None, FeedbackMode::GUI, FeedbackMode::Local, FeedbackMode::Global}) {
    if (to_string(m) == text) return m;
  }
  throw InvalidInput("unknown feedback mode '" + std::string(text) + "'");
}

std::string_view to_string(SessionPhase phase) {
  switch (phase) {
    case SessionPhase::Idle:
      return "idle";
    case SessionPhase::Demo1:
      return "demo1";
    case SessionPhase::Demo2:
      return "demo2";
    case SessionPhase::Complete:
      return "complete";
  }
  return "?";
}

SessionPhase session_phase_from_string(std::string_view text) {
  for (auto p : {SessionPhase::Idle, SessionPhase::Demo1, SessionPhase::Demo2,
                 SessionPhase::Complete}) {
    if (to_string(p) == text) return p;
  }
  throw InvalidInput("unknown session phase '" + std::string(text) + "'");
}

void to_json(nlohmann::json& j, const Event& event) {
  j = {{"seq", event.seq}, {"time", event.t}, {"type", event.type}, {"payload", event.payload}};
}

void from_json(const nlohmann::json& j, Event& event) {
  event.seq = j.at("seq").get<std::uint64_t>();
  event.t = j.at("time").get<double>();
  event.type = j.at("type").get<std::string>();
  event.payload = j.value("payload", nlohmann::json::object());
}

std::vector<learner::Demonstration> SessionRecord::demos_labelled(learner::DemoLabel label) const {
  std::vector<learner::Demonstration> out;
  for (const auto& d : demos) {
    if (d.label == label) out.push_back(d);
  }
  return out;
}

std::vector<double> SessionRecord::wall_times() const {
  std::vector<double> out;
  for (const auto& d : demos) out.push_back(d.duration());
  return out;
}

std::vector<Event> SessionRecord::to_events() const {
  struct Pending {
    double t;
    int order;
    Event event;
  };
  std::vector<Pending> items;
  nlohmann::json created = {{"task", task},
                            {"feedback", to_string(feedback)},
                            {"teacher", teacher},
                            {"seed", seed}};
  if (schedule) created["schedule"] = *schedule;
  const double start = demos.empty() || demos.front().empty() ? 0.0 : demos.front().samples.front().t;
  items.push_back({start, 0, {0, start, "session_created", created}});

  SessionPhase phase = SessionPhase::Idle;
  double end = start;
  for (std::size_t d = 0; d < demos.size(); ++d) {
    const auto& demo = demos[d];
    if (demo.empty()) continue;
    const SessionPhase wanted =
        demo.label == learner::DemoLabel::UserSecond ? SessionPhase::Demo2 : SessionPhase::Demo1;
    const double t0 = demo.samples.front().t;
    if (wanted != phase) {
      phase = wanted;
      items.push_back({t0, 1, {0, t0, "phase_change", {{"phase", to_string(phase)}}}});
    }
    for (const auto& s : demo.samples) {
      items.push_back({s.t, 2,
                       {0, s.t, "demo_sample",
                        {{"demo", d}, {"label", learner::to_string(demo.label)}, {"sample", s}}}});
      end = std::max(end, s.t);
    }
  }
  for (const auto& f : frames) {
    items.push_back({f.time, 3, {0, f.time, "frame", nlohmann::json(f)}});
    end = std::max(end, f.time);
  }
  items.push_back({end, 4,
                   {0, end, "phase_change",
                    {{"phase", to_string(SessionPhase::Complete)}, {"truncated", truncated}}}});
  std::stable_sort(items.begin(), items.end(), [](const Pending& a, const Pending& b) {
    return a.t < b.t || (a.t == b.t && a.order < b.order);
  });
  std::vector<Event> events;
  for (auto& item : items) {
    item.event.seq = events.size();
    events.push_back(std::move(item.event));
  }
  return events;
}

SessionRecord SessionRecord::from_events(std::span<const Event> events) {
  SessionRecord record;
  std::map<std::size_t, learner::Demonstration> demos;
  for (const auto& e : events) {
    if (e.type == "session_created") {
      record.task = e.payload.at("task").get<std::string>();
      record.feedback = feedback_mode_from_string(e.payload.at("feedback").get<std::string>());
      record.teacher = e.payload.value("teacher", "");
      record.seed = e.payload.value("seed", std::uint64_t{0});
      if (e.payload.contains("schedule")) {
        record.schedule = e.payload["schedule"].get<learner::UncertaintySchedule>();
      }
    } else if (e.type == "demo_sample") {
      const auto index = e.payload.at("demo").get<std::size_t>();
      auto& demo = demos[index];
      demo.label = learner::demo_label_from_string(e.payload.at("label").get<std::string>());
      demo.samples.push_back(e.payload.at("sample").get<learner::DemoSample>());
    } else if (e.type == "frame") {
      record.frames.push_back(e.payload.get<display::RenderFrame>());
    } else if (e.type == "phase_change") {
      if (e.payload.value("truncated", false)) record.truncated = true;
    }
  }
  // Actions are deltas to the next pose, so they are rebuilt from the poses.
  for (auto& [index, demo] : demos) {
    std::vector<double> times;
    std::vector<ArmState> poses;
    for (const auto& s : demo.samples) {
      times.push_back(s.t);
      poses.push_back(s.state);
    }
    record.demos.push_back(learner::demonstration_from_poses(demo.label, times, poses));
  }
  return record;
}

std::uint64_t expert_seed(std::uint64_t seed) { return derive_seed(seed, 0xe1); }
std::uint64_t model_seed(std::uint64_t seed) { return derive_seed(seed, 0xe2); }
std::uint64_t teacher_seed(std::uint64_t seed, std::uint64_t piece) {
  return derive_seed(derive_seed(seed, 0xe3), piece);
}
std::uint64_t plant_seed(std::uint64_t seed) { return derive_seed(seed, 0xe4); }

learner::EnsembleModel initial_model(const TaskSpec& task, std::uint64_t seed,
                                     const learner::TrainConfig& train) {
  learner::TrainConfig config = train;
  config.seed = model_seed(seed);
  const auto demos = expert_demos(task, expert_seed(seed));
  return learner::train(demos, config);
}

std::optional<display::Layout> feedback_layout(FeedbackMode mode, std::size_t channels) {
  switch (mode) {
    case FeedbackMode::Local:
      return display::Layout::local(channels, 3);
    case FeedbackMode::Global:
      return display::Layout::global(channels, 3);
    default:
      return std::nullopt;
  }
}

namespace {

/// Live rendering of channel uncertainties onto the display (or GUI).
class FeedbackLoop {
 public:
  FeedbackLoop(FeedbackMode mode, std::size_t channels, pneumatics::ChannelSpec spec,
               std::uint64_t seed, double interval)
      : mode_(mode), layout_(feedback_layout(mode, channels)), channels_(channels),
        interval_(interval), last_(channels, display::kMinRenderPressure) {
    if (layout_) {
      pneumatics::PlantConfig config;
      config.seed = seed;
      plant_.emplace(*layout_, spec, config, display::kMinRenderPressure);
    }
  }

  bool active() const { return mode_ != FeedbackMode::None; }

  /// What the teacher perceives now, per channel, in psi-equivalent.
  std::vector<double> perceive() const {
    if (plant_) return display::channel_pressures(*layout_, plant_->snapshot(*layout_));
    return last_;
  }

  /// Renders uncertainties at time t and lets the plant run until t + dt.
  void render(std::span<const double> u, double t, double dt,
              std::vector<display::RenderFrame>& log) {
    if (!active()) return;
    if (t + 1e-9 >= next_frame_) {
      next_frame_ = t + interval_;
      display::RenderFrame frame;
      if (layout_) {
        frame = display::render(*layout_, u, t);
        plant_->apply_frame(frame);
      } else {
        frame = display::render_percent(u, t);
        for (std::size_t c = 0; c < channels_; ++c) last_[c] = display::map_uncertainty(u[c]);
      }
      log.push_back(std::move(frame));
    }
    if (plant_) plant_->advance(dt);
  }

 private:
  FeedbackMode mode_;
  std::optional<display::Layout> layout_;
  std::optional<display::DisplayPlant> plant_;
  std::size_t channels_;
  double interval_;
  double next_frame_ = -1e300;
  std::vector<double> last_;
};

}  // namespace

SessionRecord run_session(const TaskSpec& task, SegmentTeacher& teacher, FeedbackMode feedback,
                          std::uint64_t seed, const SessionOptions& options,
                          const learner::EnsembleModel* initial) {
  if (task.is_welding()) throw InvalidParameter("use run_welding_session for the welding task");
  std::optional<learner::EnsembleModel> owned;
  if (!initial) {
    owned = initial_model(task, seed, options.train);
    initial = &*owned;
  }

  SessionRecord record;
  record.task = task.name;
  record.feedback = feedback;
  record.teacher = teacher.name();
  record.seed = seed;

  const Path path = task.path();
  const double dt = options.motion.sample_dt;
  FeedbackLoop loop(feedback, 1, pneumatics::ChannelSpec::sleeve(), plant_seed(seed),
                    options.frame_interval);

  auto live = [&](const ArmState& pose, double t) {
    const double u = learner::uncertainty(*initial, pose);
    loop.render(std::span(&u, 1), t, dt, record.frames);
  };

  // First demonstration: the whole path, feedback on.
  {
    Tracker tracker(path, {0.0, 1.0}, options.motion, teacher_seed(seed, 0));
    std::vector<double> times;
    std::vector<ArmState> poses;
    double t = 0.0;
    while (!tracker.done()) {
      if (options.time_limit && t > *options.time_limit) {
        record.truncated = true;
        break;
      }
      const ArmState pose = tracker.next();
      if (loop.active()) {
        const auto felt = loop.perceive();
        teacher.observe(tracker.fraction(), *std::max_element(felt.begin(), felt.end()));
      }
      live(pose, t);
      times.push_back(t);
      poses.push_back(pose);
      t += dt;
    }
    record.demos.push_back(
        learner::demonstration_from_poses(learner::DemoLabel::UserFirst, times, poses));
  }

  // Second demonstration: only the planned ranges.
  double t = record.demos.front().samples.back().t + options.transit_time;
  std::size_t piece = 1;
  for (const auto& range : teacher.plan(options.budget)) {
    Tracker tracker(path, range, options.motion, teacher_seed(seed, piece++));
    std::vector<double> times;
    std::vector<ArmState> poses;
    while (!tracker.done()) {
      const ArmState pose = tracker.next();
      live(pose, t);
      times.push_back(t);
      poses.push_back(pose);
      t += dt;
    }
    record.demos.push_back(
        learner::demonstration_from_poses(learner::DemoLabel::UserSecond, times, poses));
    t += options.transit_time;
  }
  return record;
}

SessionRecord run_welding_session(const TaskSpec& task, const WeldTeacher& teacher,
                                  FeedbackMode feedback, std::uint64_t seed,
                                  const SessionOptions& options) {
  if (!task.is_welding()) throw InvalidParameter("task '" + task.name + "' is not a welding task");
  SessionRecord record;
  record.task = task.name;
  record.feedback = feedback;
  record.teacher = "weld";
  record.seed = seed;
  record.schedule = uncertainty_schedule(task, seed);

  const Path path = task.path();
  const double dt = options.motion.sample_dt;
  const learner::FeatureSource source{
      nullptr, &*record.schedule,
      {task.nominal_path.front().x, task.nominal_path.back().x}};

  // Baseline without feedback.
  record.demos.push_back(traverse(path, {0.0, 1.0}, learner::DemoLabel::UserFirst, 0.0,
                                  options.motion, teacher_seed(seed, 0), teacher.habit));

  FeedbackLoop loop(feedback, 3, pneumatics::ChannelSpec::ring(), plant_seed(seed),
                    options.frame_interval);
  Tracker tracker(path, {0.0, 1.0}, options.motion, teacher_seed(seed, 1), teacher.habit);
  std::vector<double> times;
  std::vector<ArmState> poses;
  double t = record.demos.front().samples.back().t + options.transit_time;
  while (!tracker.done()) {
    if (loop.active()) {
      const auto felt = loop.perceive();
      Offset target = teacher.habit;
      if (felt[0] > teacher.threshold_psi) target.lateral = 0.0;
      if (felt[1] > teacher.threshold_psi) target.vertical = 0.0;
      if (felt[2] > teacher.threshold_psi) target.theta = 0.0;
      tracker.steer_bias(target, teacher.correction_time);
    }
    const ArmState pose = tracker.next();
    const auto u = learner::feature_uncertainty(source, pose);
    loop.render(u, t, dt, record.frames);
    times.push_back(t);
    poses.push_back(pose);
    t += dt;
  }
  record.demos.push_back(
      learner::demonstration_from_poses(learner::DemoLabel::UserSecond, times, poses));
  return record;
}

}  // namespace wrapsim::teaching
