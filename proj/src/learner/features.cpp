#include "wrapsim/learner/features.hpp"

#include <cmath>
#include <string>

#include "wrapsim/error.hpp"

namespace wrapsim::learner {

std::string_view to_string(Feature feature) {
  switch (feature) {
    case Feature::EdgeDistance:
      return "edge_distance";
    case Feature::Height:
      return "height";
    case Feature::Orientation:
      return "orientation";
  }
  return "?";
}

Feature feature_from_string(std::string_view text) {
  for (Feature f : kFeatures) {
    if (to_string(f) == text) return f;
  }
  throw InvalidInput("unknown feature '" + std::string(text) + "'");
}

FeatureVector feature_values(const ArmState& state) { return {state.y, state.z, state.theta}; }

double ProgressAxis::operator()(const ArmState& state) const {
  return (state.x - x_start) / (x_end - x_start);
}

UncertaintySchedule UncertaintySchedule::thirds(const std::array<Feature, 3>& order) {
  UncertaintySchedule s;
  for (std::size_t i = 0; i < 3; ++i) {
    s.segments.push_back({static_cast<double>(i) / 3.0, static_cast<double>(i + 1) / 3.0,
                          order[i]});
  }
  s.segments.back().end = 1.0;
  return s;
}

FeatureVector UncertaintySchedule::at(double progress) const {
  FeatureVector out{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    const bool last = i + 1 == segments.size();
    if (progress >= seg.begin && (progress < seg.end || (last && progress <= seg.end))) {
      if (seg.active) out[static_cast<std::size_t>(*seg.active)] = 1.0;
      break;
    }
  }
  return out;
}

void UncertaintySchedule::validate() const {
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!(segments[i].end > segments[i].begin)) {
      throw InvalidParameter("schedule segment " + std::to_string(i) + " is empty");
    }
    if (i > 0 && segments[i].begin < segments[i - 1].end) {
      throw InvalidParameter("schedule segments overlap");
    }
  }
}

void to_json(nlohmann::json& j, const UncertaintySchedule& schedule) {
  j = nlohmann::json::array();
  for (const auto& seg : schedule.segments) {
    j.push_back({{"begin", seg.begin},
                 {"end", seg.end},
                 {"active", seg.active ? nlohmann::json(to_string(*seg.active))
                                       : nlohmann::json(nullptr)}});
  }
}

void from_json(const nlohmann::json& j, UncertaintySchedule& schedule) {
  schedule.segments.clear();
  for (const auto& js : j) {
    ScheduleSegment seg{js.at("begin").get<double>(), js.at("end").get<double>(), std::nullopt};
    if (js.contains("active") && !js["active"].is_null()) {
      seg.active = feature_from_string(js["active"].get<std::string>());
    }
    schedule.segments.push_back(seg);
  }
  schedule.validate();
}

FeatureEnsemble FeatureEnsemble::train(std::span<const Demonstration> demos,
                                       const ProgressAxis& axis, const TrainConfig& config) {
  if (demos.empty()) throw InvalidInput("no demonstrations to train on");
  std::vector<Demonstration> grids;
  Eigen::Index count = 0;
  for (const auto& d : demos) {
    grids.push_back(resample(d));
    if (grids.back().samples.size() > 1) {
      count += static_cast<Eigen::Index>(grids.back().samples.size()) - 1;
    }
  }
  if (count == 0) throw InvalidInput("demonstrations contain no transitions");

  FeatureEnsemble model;
  model.axis_ = axis;
  for (std::size_t f = 0; f < 3; ++f) {
    Dataset data{Eigen::MatrixXd(2, count), Eigen::MatrixXd(1, count)};
    Eigen::Index col = 0;
    for (const auto& demo : grids) {
      for (std::size_t i = 0; i + 1 < demo.samples.size(); ++i) {
        const auto now = feature_values(demo.samples[i].state);
        const auto next = feature_values(demo.samples[i + 1].state);
        double delta = next[f] - now[f];
        if (kFeatures[f] == Feature::Orientation) delta = wrap_angle(delta);
        data.inputs(0, col) = axis(demo.samples[i].state);
        data.inputs(1, col) = now[f];
        data.targets(0, col) = delta;
        ++col;
      }
    }
    TrainConfig head_config = config;
    head_config.seed = derive_seed(config.seed, 1000 + f);
    model.heads_[f] = EnsembleModel::train(data, head_config);
  }
  return model;
}

FeatureVector FeatureEnsemble::uncertainty(const ArmState& state) const {
  const auto phi = feature_values(state);
  const double progress = axis_(state);
  FeatureVector out{};
  for (std::size_t f = 0; f < 3; ++f) {
    out[f] = heads_[f].uncertainty(Eigen::Vector2d(progress, phi[f]));
  }
  return out;
}

const EnsembleModel& FeatureEnsemble::head(Feature feature) const {
  return heads_[static_cast<std::size_t>(feature)];
}

FeatureVector feature_uncertainty(const FeatureSource& source, const ArmState& state) {
  if ((source.learned == nullptr) == (source.scripted == nullptr)) {
    throw ConfigurationError(
        "feature uncertainty needs exactly one of a learned ensemble or a scripted schedule");
  }
  if (source.learned) return source.learned->uncertainty(state);
  return source.scripted->at(source.axis(state));
}

}  // namespace wrapsim::learner
