#pragma once

#include <span>

#include <Eigen/Dense>

#include "wrapsim/learner/demonstration.hpp"
#include "wrapsim/learner/ensemble.hpp"

namespace wrapsim::learner {

/// Learner input for a pose: (x, y, theta).
Eigen::VectorXd planar_input(const ArmState& state);

/// Transition pairs (state -> next-pose delta) of every demonstration after
/// resampling onto the `dt` grid. The final sample of each demonstration has
/// no successor and is left out.
Dataset planar_dataset(std::span<const Demonstration> demos, double dt = kActionDt);

/// Behavior cloning ensemble over planar poses. Throws InvalidInput when no
/// demonstration contributes a transition.
EnsembleModel train(std::span<const Demonstration> demos, const TrainConfig& config);

/// Normalized uncertainty in [0, 1]. Throws StateError for an untrained model.
double uncertainty(const EnsembleModel& model, const ArmState& state);

}  // namespace wrapsim::learner
