#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "wrapsim/learner/mlp.hpp"

namespace wrapsim::learner {

/// Supervised pairs, one sample per column.
struct Dataset {
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;

  std::size_t size() const { return static_cast<std::size_t>(inputs.cols()); }
};

/// Affine map x -> (x - mean) / scale applied per row.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  /// Per-dimension mean and standard deviation (constant dimensions get scale 1).
  static Standardizer per_dimension(const Eigen::MatrixXd& data);
  /// Per-dimension mean, one shared scale: the largest per-dimension deviation.
  static Standardizer shared_scale(const Eigen::MatrixXd& data);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& data) const;
  Eigen::MatrixXd invert(const Eigen::MatrixXd& data) const;
};

struct TrainConfig {
  std::size_t members = 5;
  std::size_t epochs = 300;
  std::size_t batch_size = 32;
  double learning_rate = 3e-3;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::size_t hidden = 32;
  std::size_t hidden_layers = 2;

  void validate() const;
};

/// Disagreement of the members (population variance, then averaged over the
/// outputs) is the raw epistemic uncertainty. It is reported relative to the
/// largest raw variance seen on the training states.
class EnsembleModel {
 public:
  EnsembleModel() = default;

  /// Trains each member on its own bootstrap resample with Adam on MSE.
  /// Throws TrainingError if the loss becomes non-finite.
  static EnsembleModel train(const Dataset& data, const TrainConfig& config);

  /// Wraps already-trained members; the normalizers are measured on
  /// `calibration` inputs.
  static EnsembleModel from_members(std::vector<Mlp> members, Standardizer input,
                                    Standardizer output, const Eigen::MatrixXd& calibration);

  bool trained() const { return !members_.empty(); }
  std::size_t size() const { return members_.size(); }
  const Mlp& member(std::size_t i) const { return members_.at(i); }
  std::size_t input_size() const;
  std::size_t output_size() const;

  /// Predictions of every member in target units (outputs x members).
  Eigen::MatrixXd predict_members(const Eigen::VectorXd& input) const;
  Eigen::VectorXd predict(const Eigen::VectorXd& input) const;

  Eigen::VectorXd raw_variance_per_output(const Eigen::VectorXd& input) const;
  double raw_variance(const Eigen::VectorXd& input) const;

  /// clamp(raw / normalizer, 0, 1)
  double uncertainty(const Eigen::VectorXd& input) const;
  Eigen::VectorXd uncertainty_per_output(const Eigen::VectorXd& input) const;

  double normalizer() const { return normalizer_; }
  const Eigen::VectorXd& output_normalizers() const { return output_normalizers_; }

  nlohmann::json to_json() const;
  static EnsembleModel from_json(const nlohmann::json& j);

 private:
  void require_trained() const;
  void calibrate(const Eigen::MatrixXd& inputs);
  Eigen::MatrixXd member_predictions(const Eigen::MatrixXd& inputs, std::size_t member) const;

  std::vector<Mlp> members_;
  Standardizer input_;
  Standardizer output_;
  double normalizer_ = 0.0;
  Eigen::VectorXd output_normalizers_;
};

/// Relative variance floor: member spread below 1% of the target scale
/// counts as agreement, so a degenerate dataset is not "maximally uncertain".
inline constexpr double kVarianceFloorFraction = 0.01;

}  // namespace wrapsim::learner
