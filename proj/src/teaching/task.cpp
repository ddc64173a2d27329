#include "wrapsim/teaching/task.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "wrapsim/error.hpp"
#include "wrapsim/random.hpp"
#include "wrapsim/teaching/teacher.hpp"

namespace wrapsim::teaching {

PathRange TaskSpec::uncertain_region() const {
  std::optional<PathRange> hull;
  for (const auto& s : segments) {
    if (s.known) continue;
    if (!hull) {
      hull = s.range;
    } else {
      hull->begin = std::min(hull->begin, s.range.begin);
      hull->end = std::max(hull->end, s.range.end);
    }
  }
  if (!hull) throw StateError("task '" + name + "' has no withheld segment");
  return *hull;
}

void TaskSpec::validate() const {
  if (name.empty()) throw InvalidParameter("task needs a name");
  Path p(nominal_path);
  if (segments.empty()) throw InvalidParameter("task needs at least one segment");
  double cursor = 0.0;
  for (const auto& s : segments) {
    if (std::abs(s.range.begin - cursor) > 1e-9 || s.range.empty()) {
      throw InvalidParameter("segments of task '" + name + "' do not partition the path");
    }
    cursor = s.range.end;
  }
  if (std::abs(cursor - 1.0) > 1e-9) {
    throw InvalidParameter("segments of task '" + name + "' do not reach the path end");
  }
  if (!(e_max > 0.0)) throw InvalidParameter("e_max must be positive");
  for (const auto& w : nominal_path) {
    if (!workspace.contains(w)) throw InvalidParameter("nominal path leaves the workspace");
  }
  if (weld) {
    if (!emphasis || emphasis->segments.size() != segments.size()) {
      throw InvalidParameter("welding task needs one emphasis per segment");
    }
    for (const auto& s : emphasis->segments) {
      if (!s.active) throw InvalidParameter("welding segment without an emphasized feature");
    }
  }
}

namespace {

nlohmann::json pose_json(const ArmState& s) {
  return {{"x", s.x}, {"y", s.y}, {"theta", s.theta}, {"z", s.z}};
}

}  // namespace

void to_json(nlohmann::json& j, const TaskSpec& task) {
  auto path = nlohmann::json::array();
  for (const auto& w : task.nominal_path) path.push_back(pose_json(w));
  auto segments = nlohmann::json::array();
  for (const auto& s : task.segments) {
    segments.push_back({{"begin", s.range.begin}, {"end", s.range.end}, {"known", s.known}});
  }
  const auto& ws = task.workspace;
  j = {{"name", task.name},
       {"nominal_path", path},
       {"segments", segments},
       {"workspace",
        {{"x", {ws.x_min, ws.x_max}}, {"y", {ws.y_min, ws.y_max}}, {"z", {ws.z_min, ws.z_max}}}},
       {"e_max", task.e_max}};
  if (task.weld) {
    j["weld"] = {{"edge_distance", task.weld->edge_distance},
                 {"height", task.weld->height},
                 {"orientation", task.weld->orientation}};
  }
  if (task.emphasis) j["emphasis"] = *task.emphasis;
}

void from_json(const nlohmann::json& j, TaskSpec& task) {
  task = TaskSpec{};
  task.name = j.at("name").get<std::string>();
  for (const auto& w : j.at("nominal_path")) {
    task.nominal_path.push_back({w.at("x").get<double>(), w.at("y").get<double>(),
                                 w.at("theta").get<double>(), w.value("z", 0.0)});
  }
  for (const auto& s : j.at("segments")) {
    task.segments.push_back(
        {{s.at("begin").get<double>(), s.at("end").get<double>()}, s.value("known", true)});
  }
  if (j.contains("workspace")) {
    const auto& ws = j["workspace"];
    task.workspace = {ws.at("x")[0], ws.at("x")[1], ws.at("y")[0],
                      ws.at("y")[1], ws.at("z")[0], ws.at("z")[1]};
  }
  task.e_max = j.at("e_max").get<double>();
  if (j.contains("weld")) {
    const auto& w = j["weld"];
    task.weld = WeldTargets{w.at("edge_distance").get<double>(), w.at("height").get<double>(),
                            w.at("orientation").get<double>()};
  }
  if (j.contains("emphasis")) task.emphasis = j["emphasis"].get<learner::UncertaintySchedule>();
  task.validate();
}

std::vector<std::string> task_names() {
  return {"reach_start", "reach_middle", "reach_end", "welding"};
}

double weld_e_max(const learner::Workspace& ws, const WeldTargets& t) {
  const double edge = std::max(std::abs(ws.y_min - t.edge_distance), std::abs(ws.y_max - t.edge_distance));
  const double height = std::max(std::abs(ws.z_min - t.height), std::abs(ws.z_max - t.height));
  return edge + height + std::numbers::pi;
}

namespace {

TaskSpec reach_task(std::string name, std::size_t withheld) {
  TaskSpec task;
  task.name = std::move(name);
  task.nominal_path = {{-0.4, -0.4, -0.6, 0.0},
                       {-0.4, 0.4, 0.0, 0.0},
                       {0.4, 0.4, 0.0, 0.0},
                       {0.4, -0.4, 0.6, 0.0}};
  for (std::size_t i = 0; i < 3; ++i) {
    task.segments.push_back({{static_cast<double>(i) / 3.0, i == 2 ? 1.0 : static_cast<double>(i + 1) / 3.0},
                             i != withheld});
  }
  task.workspace = {-1.0, 1.0, -1.0, 1.0, 0.0, 1.0};
  task.e_max = 1.0;
  return task;
}

TaskSpec welding_task() {
  TaskSpec task;
  task.name = "welding";
  const WeldTargets targets;
  task.weld = targets;
  task.nominal_path = {{-0.4, targets.edge_distance, targets.orientation, targets.height},
                       {0.4, targets.edge_distance, targets.orientation, targets.height}};
  task.emphasis = learner::UncertaintySchedule::thirds(
      {learner::Feature::Height, learner::Feature::EdgeDistance, learner::Feature::Orientation});
  for (const auto& s : task.emphasis->segments) task.segments.push_back({{s.begin, s.end}, true});
  task.workspace = {-0.5, 0.5, 0.0, 0.3, 0.0, 0.3};
  task.e_max = weld_e_max(task.workspace, targets);
  return task;
}

}  // namespace

TaskSpec make_task(std::string_view name) {
  TaskSpec task;
  if (name == "reach_start") {
    task = reach_task("reach_start", 0);
  } else if (name == "reach_middle") {
    task = reach_task("reach_middle", 1);
  } else if (name == "reach_end") {
    task = reach_task("reach_end", 2);
  } else if (name == "welding") {
    task = welding_task();
  } else {
    throw NotFound("unknown task '" + std::string(name) + "'");
  }
  task.validate();
  return task;
}

learner::UncertaintySchedule uncertainty_schedule(const TaskSpec& task, std::uint64_t seed) {
  if (!task.is_welding()) {
    throw InvalidParameter("task '" + task.name + "' has no feature emphasis");
  }
  std::array<learner::Feature, 3> order = learner::kFeatures;
  Rng rng(derive_seed(seed, 0x5c4ed));
  shuffle(std::span<learner::Feature>(order), rng);
  return learner::UncertaintySchedule::thirds(order);
}

std::vector<learner::Demonstration> expert_demos(const TaskSpec& task, std::uint64_t seed) {
  std::vector<PathRange> stretches;
  for (const auto& s : task.segments) {
    if (!s.known) continue;
    if (!stretches.empty() && std::abs(stretches.back().end - s.range.begin) < 1e-12) {
      stretches.back().end = s.range.end;
    } else {
      stretches.push_back(s.range);
    }
  }
  const Path path = task.path();
  std::vector<learner::Demonstration> demos;
  for (std::size_t d = 0; d < kExpertDemoCount; ++d) {
    for (std::size_t k = 0; k < stretches.size(); ++k) {
      demos.push_back(traverse(path, stretches[k], learner::DemoLabel::Expert, 0.0,
                               MotionModel::expert(), derive_seed(seed, 64 * d + k)));
    }
  }
  return demos;
}

}  // namespace wrapsim::teaching
