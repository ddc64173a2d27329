#include "wrapsim/learner/demonstration.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>

#include "wrapsim/error.hpp"

namespace wrapsim::learner {

double wrap_angle(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double a = std::fmod(angle, two_pi);
  if (a <= -std::numbers::pi) a += two_pi;
  if (a > std::numbers::pi) a -= two_pi;
  return a;
}

Action pose_delta(const ArmState& from, const ArmState& to) {
  return {to.x - from.x, to.y - from.y, wrap_angle(to.theta - from.theta), to.z - from.z};
}

std::string_view to_string(DemoLabel label) {
  switch (label) {
    case DemoLabel::Expert:
      return "expert";
    case DemoLabel::UserFirst:
      return "user_first";
    case DemoLabel::UserSecond:
      return "user_second";
  }
  return "?";
}

DemoLabel demo_label_from_string(std::string_view text) {
  for (DemoLabel l : {DemoLabel::Expert, DemoLabel::UserFirst, DemoLabel::UserSecond}) {
    if (to_string(l) == text) return l;
  }
  throw InvalidInput("unknown demonstration label '" + std::string(text) + "'");
}

double Demonstration::duration() const {
  return samples.size() < 2 ? 0.0 : samples.back().t - samples.front().t;
}

double Demonstration::arc_length() const {
  double length = 0.0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const auto& a = samples[i - 1].state;
    const auto& b = samples[i].state;
    length += std::sqrt((b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y) +
                        (b.z - a.z) * (b.z - a.z));
  }
  return length;
}

void Demonstration::validate(double max_speed) const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!std::isfinite(s.t) || !std::isfinite(s.state.x) || !std::isfinite(s.state.y) ||
        !std::isfinite(s.state.theta) || !std::isfinite(s.state.z)) {
      throw InvalidInput("demonstration sample " + std::to_string(i) + " is not finite");
    }
    if (s.state.theta <= -std::numbers::pi || s.state.theta > std::numbers::pi) {
      throw InvalidInput("theta not wrapped at sample " + std::to_string(i));
    }
    if (i + 1 == samples.size()) break;
    const double dt = samples[i + 1].t - s.t;
    if (!(dt > 0.0)) {
      throw InvalidInput("timestamps must strictly increase (sample " + std::to_string(i) + ")");
    }
    const auto& a = s.action;
    const double step = std::sqrt(a.dx * a.dx + a.dy * a.dy + a.dz * a.dz);
    if (step > max_speed * dt * (1.0 + 1e-9) + 1e-12) {
      throw InvalidInput("action at sample " + std::to_string(i) + " exceeds teacher speed");
    }
  }
}

Demonstration demonstration_from_poses(DemoLabel label, std::span<const double> times,
                                       std::span<const ArmState> poses) {
  if (times.size() != poses.size()) throw InvalidInput("times and poses differ in length");
  Demonstration demo;
  demo.label = label;
  demo.samples.reserve(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) {
    ArmState state = poses[i];
    state.theta = wrap_angle(state.theta);
    Action action;
    if (i + 1 < poses.size()) action = pose_delta(state, poses[i + 1]);
    demo.samples.push_back({times[i], state, action});
  }
  return demo;
}

Demonstration resample(const Demonstration& demo, double dt) {
  if (!(dt > 0.0)) throw InvalidParameter("resample dt must be positive");
  if (demo.samples.size() < 2) return demo;

  std::vector<double> times;
  std::vector<ArmState> poses;
  const double t0 = demo.samples.front().t;
  const double t_end = demo.samples.back().t;
  std::size_t seg = 0;
  for (long k = 0;; ++k) {
    const double t = t0 + static_cast<double>(k) * dt;
    if (t > t_end + 1e-9 * dt) break;
    while (seg + 2 < demo.samples.size() && demo.samples[seg + 1].t <= t) ++seg;
    const auto& a = demo.samples[seg];
    const auto& b = demo.samples[seg + 1];
    const double w = std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0);
    ArmState s;
    s.x = a.state.x + w * (b.state.x - a.state.x);
    s.y = a.state.y + w * (b.state.y - a.state.y);
    s.z = a.state.z + w * (b.state.z - a.state.z);
    s.theta = wrap_angle(a.state.theta + w * wrap_angle(b.state.theta - a.state.theta));
    times.push_back(t);
    poses.push_back(s);
  }
  return demonstration_from_poses(demo.label, times, poses);
}

void to_json(nlohmann::json& j, const DemoSample& sample) {
  j = nlohmann::json{{"t", sample.t},
                     {"x", sample.state.x},
                     {"y", sample.state.y},
                     {"theta", sample.state.theta},
                     {"ax", sample.action.dx},
                     {"ay", sample.action.dy},
                     {"atheta", sample.action.dtheta}};
  if (sample.state.z != 0.0 || sample.action.dz != 0.0) {
    j["z"] = sample.state.z;
    j["az"] = sample.action.dz;
  }
}

void from_json(const nlohmann::json& j, DemoSample& sample) {
  sample.t = j.at("t").get<double>();
  sample.state.x = j.at("x").get<double>();
  sample.state.y = j.at("y").get<double>();
  sample.state.theta = j.at("theta").get<double>();
  sample.state.z = j.value("z", 0.0);
  sample.action.dx = j.at("ax").get<double>();
  sample.action.dy = j.at("ay").get<double>();
  sample.action.dtheta = j.at("atheta").get<double>();
  sample.action.dz = j.value("az", 0.0);
}

void write_jsonl(std::ostream& out, const Demonstration& demo) {
  for (const auto& s : demo.samples) out << nlohmann::json(s).dump() << '\n';
}

Demonstration read_jsonl(std::istream& in, DemoLabel label) {
  Demonstration demo;
  demo.label = label;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      demo.samples.push_back(nlohmann::json::parse(line).get<DemoSample>());
    } catch (const nlohmann::json::exception& e) {
      throw InvalidInput("demonstration line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return demo;
}

}  // namespace wrapsim::learner
