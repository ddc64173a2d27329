#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "wrapsim/random.hpp"

namespace wrapsim::learner {

/// Fully connected regressor with tanh hidden layers and a linear head.
/// Batches are column-major: one sample per column.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t inputs, std::size_t outputs, std::size_t hidden = 32,
      std::size_t hidden_layers = 2);

  /// Glorot-uniform weights, zero biases.
  void initialize(Rng& rng);

  std::size_t input_size() const;
  std::size_t output_size() const;
  std::size_t parameter_count() const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;

  /// Mean squared error over every output of every sample.
  double loss(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) const;

  /// Loss plus its gradient with respect to parameters() (same layout).
  double loss_and_gradient(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                           Eigen::VectorXd& gradient) const;

  /// Flattened parameters: per layer, weights (column-major) then bias.
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  struct Layer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd bias;
  };
  std::vector<Layer> layers_;
};

}  // namespace wrapsim::learner
