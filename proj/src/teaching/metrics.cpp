#include "wrapsim/teaching/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "wrapsim/error.hpp"
#include "wrapsim/learner/learner.hpp"

namespace wrapsim::teaching {

namespace {

double span3(const learner::ArmState& a, const learner::ArmState& b) {
  return std::sqrt((b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y) +
                   (b.z - a.z) * (b.z - a.z));
}

void put_optional(nlohmann::json& j, const char* key, const std::optional<double>& v) {
  j[key] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> get_optional(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<double>();
}

std::string number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string number(const std::optional<double>& v) { return v ? number(*v) : std::string(); }

}  // namespace

void to_json(nlohmann::json& j, const Metrics& m) {
  j = {{"teaching_time", m.teaching_time}, {"idle_time", m.idle_time}};
  put_optional(j, "correct_segment", m.correct_segment);
  put_optional(j, "improvement_u", m.improvement_u);
  put_optional(j, "improvement_weld", m.improvement_weld);
  put_optional(j, "u1", m.u1);
  put_optional(j, "u2", m.u2);
  put_optional(j, "e_init", m.e_init);
  put_optional(j, "e", m.e);
}

void from_json(const nlohmann::json& j, Metrics& m) {
  m.teaching_time = j.at("teaching_time").get<double>();
  m.idle_time = j.at("idle_time").get<double>();
  m.correct_segment = get_optional(j, "correct_segment");
  m.improvement_u = get_optional(j, "improvement_u");
  m.improvement_weld = get_optional(j, "improvement_weld");
  m.u1 = get_optional(j, "u1");
  m.u2 = get_optional(j, "u2");
  m.e_init = get_optional(j, "e_init");
  m.e = get_optional(j, "e");
}

double correct_segment(std::span<const learner::Demonstration> demo2, const Path& path,
                       PathRange region) {
  if (region.empty()) throw InvalidParameter("uncertain region is empty");
  double inside = 0.0;
  double total = 0.0;
  for (const auto& demo : demo2) {
    for (std::size_t i = 1; i < demo.samples.size(); ++i) {
      const auto& a = demo.samples[i - 1].state;
      const auto& b = demo.samples[i].state;
      const double len = span3(a, b);
      if (len == 0.0) continue;
      const learner::ArmState mid{(a.x + b.x) / 2, (a.y + b.y) / 2, a.theta, (a.z + b.z) / 2};
      total += len;
      if (region.contains(path.project(mid))) inside += len;
    }
  }
  return total > 0.0 ? 100.0 * inside / total : 0.0;
}

double improvement_uncertainty(double u1, double u2) {
  if (!(u1 > 0.0)) throw InvalidParameter("U_1 must be positive");
  return (u1 - u2) / u1 * 100.0;
}

double mean_path_uncertainty(const learner::EnsembleModel& model, const Path& path,
                             std::size_t points) {
  if (points == 0) throw InvalidParameter("need at least one path point");
  double sum = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double f = (static_cast<double>(i) + 0.5) / static_cast<double>(points);
    sum += learner::uncertainty(model, path.at(f));
  }
  return sum / static_cast<double>(points);
}

double weld_error(const learner::Demonstration& trajectory, const WeldTargets& targets) {
  auto gap = [&](const learner::ArmState& s) {
    return std::abs(s.y - targets.edge_distance) + std::abs(s.z - targets.height) +
           std::abs(learner::wrap_angle(s.theta - targets.orientation));
  };
  double integral = 0.0;
  double length = 0.0;
  for (std::size_t i = 1; i < trajectory.samples.size(); ++i) {
    const auto& a = trajectory.samples[i - 1].state;
    const auto& b = trajectory.samples[i].state;
    const double ds = span3(a, b);
    integral += 0.5 * (gap(a) + gap(b)) * ds;
    length += ds;
  }
  if (!(length > 0.0)) throw InvalidInput("trajectory has no arc length");
  return integral / length;
}

double improvement_weld(double e_init, double e, double e_max) {
  if (!(e_max > 0.0)) throw InvalidParameter("e_max must be positive");
  return (e_init - e) / e_max * 100.0;
}

double idle_time(std::span<const learner::Demonstration> demos) {
  double idle = 0.0;
  const learner::DemoSample* previous = nullptr;
  for (const auto& demo : demos) {
    for (const auto& s : demo.samples) {
      if (previous) {
        const double dt = s.t - previous->t;
        if (dt > 0.0 && span3(previous->state, s.state) / dt < kIdleSpeed) idle += dt;
      }
      previous = &s;
    }
  }
  return idle;
}

double teaching_time(std::span<const learner::Demonstration> demos) {
  double first = INFINITY;
  double last = -INFINITY;
  for (const auto& d : demos) {
    if (d.empty()) continue;
    first = std::min(first, d.samples.front().t);
    last = std::max(last, d.samples.back().t);
  }
  return last > first ? last - first : 0.0;
}

Metrics compute_metrics(const TaskSpec& task, const SessionRecord& record,
                        const learner::TrainConfig& train,
                        const learner::EnsembleModel* initial) {
  const auto second = record.demos_labelled(learner::DemoLabel::UserSecond);
  Metrics m;
  m.teaching_time = teaching_time(second);
  m.idle_time = idle_time(second);

  if (task.is_welding()) {
    const auto first = record.demos_labelled(learner::DemoLabel::UserFirst);
    if (first.empty() || second.empty()) return m;
    m.e_init = weld_error(first.front(), *task.weld);
    m.e = weld_error(second.front(), *task.weld);
    m.improvement_weld = improvement_weld(*m.e_init, *m.e, task.e_max);
    return m;
  }

  const Path path = task.path();
  m.correct_segment = correct_segment(second, path, task.uncertain_region());

  std::optional<learner::EnsembleModel> owned;
  if (!initial) {
    owned = initial_model(task, record.seed, train);
    initial = &*owned;
  }
  m.u1 = mean_path_uncertainty(*initial, path);
  if (second.empty()) {
    m.u2 = m.u1;
  } else {
    auto demos = expert_demos(task, expert_seed(record.seed));
    demos.insert(demos.end(), second.begin(), second.end());
    learner::TrainConfig config = train;
    config.seed = model_seed(record.seed);
    m.u2 = mean_path_uncertainty(learner::train(demos, config), path);
  }
  m.improvement_u = improvement_uncertainty(*m.u1, *m.u2);
  return m;
}

std::string metrics_csv_header() {
  return "session_id,task,feedback,teacher,seed,teaching_time,idle_time,correct_segment,"
         "improvement_u,improvement_weld,u1,u2,e_init,e";
}

std::string metrics_csv_row(std::string_view session_id, const SessionRecord& record,
                            const Metrics& m) {
  std::string row(session_id);
  for (const std::string& field :
       {record.task, std::string(to_string(record.feedback)), record.teacher,
        std::to_string(record.seed), number(m.teaching_time), number(m.idle_time),
        number(m.correct_segment), number(m.improvement_u), number(m.improvement_weld),
        number(m.u1), number(m.u2), number(m.e_init), number(m.e)}) {
    row += ',';
    row += field;
  }
  return row;
}

}  // namespace wrapsim::teaching
