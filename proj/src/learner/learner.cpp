#include "wrapsim/learner/learner.hpp"

#include "wrapsim/error.hpp"

namespace wrapsim::learner {

Eigen::VectorXd planar_input(const ArmState& state) {
  return Eigen::Vector3d(state.x, state.y, state.theta);
}

Dataset planar_dataset(std::span<const Demonstration> demos, double dt) {
  std::vector<Demonstration> grids;
  Eigen::Index count = 0;
  for (const auto& demo : demos) {
    grids.push_back(resample(demo, dt));
    if (grids.back().samples.size() > 1) {
      count += static_cast<Eigen::Index>(grids.back().samples.size()) - 1;
    }
  }
  Dataset data{Eigen::MatrixXd(3, count), Eigen::MatrixXd(3, count)};
  Eigen::Index col = 0;
  for (const auto& demo : grids) {
    for (std::size_t i = 0; i + 1 < demo.samples.size(); ++i) {
      const auto& s = demo.samples[i];
      data.inputs.col(col) = planar_input(s.state);
      data.targets.col(col) = Eigen::Vector3d(s.action.dx, s.action.dy, s.action.dtheta);
      ++col;
    }
  }
  return data;
}

EnsembleModel train(std::span<const Demonstration> demos, const TrainConfig& config) {
  if (demos.empty()) throw InvalidInput("no demonstrations to train on");
  const Dataset data = planar_dataset(demos);
  if (data.size() == 0) throw InvalidInput("demonstrations contain no transitions");
  return EnsembleModel::train(data, config);
}

double uncertainty(const EnsembleModel& model, const ArmState& state) {
  if (!model.trained()) throw StateError("uncertainty queried before training");
  return model.uncertainty(planar_input(state));
}

}  // namespace wrapsim::learner
