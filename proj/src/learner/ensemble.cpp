#include "wrapsim/learner/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <string>

#include "wrapsim/error.hpp"
#include "wrapsim/random.hpp"

namespace wrapsim::learner {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

// Population variance across columns for every row, computed on deviations
// from the first column so identical columns give exactly zero.
Eigen::VectorXd spread(const Eigen::MatrixXd& predictions) {
  const Eigen::MatrixXd shifted = predictions.colwise() - predictions.col(0);
  const double n = static_cast<double>(predictions.cols());
  const Eigen::VectorXd mean = shifted.rowwise().sum() / n;
  const Eigen::VectorXd mean_sq = shifted.array().square().rowwise().sum() / n;
  return (mean_sq.array() - mean.array().square()).max(0.0);
}

Mlp train_member(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                 const TrainConfig& config, std::size_t index) {
  Rng rng(derive_seed(config.seed, index));
  Mlp net(static_cast<std::size_t>(inputs.rows()), static_cast<std::size_t>(targets.rows()),
          config.hidden, config.hidden_layers);
  net.initialize(rng);

  const auto n = static_cast<std::size_t>(inputs.cols());
  std::vector<Eigen::Index> sample(n);
  if (config.bootstrap) {
    for (auto& s : sample) s = static_cast<Eigen::Index>(uniform_index(rng, n));
  } else {
    std::iota(sample.begin(), sample.end(), Eigen::Index{0});
  }

  Eigen::VectorXd params = net.parameters();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(params.size());
  Eigen::VectorXd grad;
  double beta1_t = 1.0;
  double beta2_t = 1.0;

  const std::size_t batch = std::min(config.batch_size, n);
  Eigen::MatrixXd xb(inputs.rows(), static_cast<Eigen::Index>(batch));
  Eigen::MatrixXd yb(targets.rows(), static_cast<Eigen::Index>(batch));
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(std::span(sample), rng);
    for (std::size_t start = 0; start + batch <= n; start += batch) {
      for (std::size_t k = 0; k < batch; ++k) {
        xb.col(static_cast<Eigen::Index>(k)) = inputs.col(sample[start + k]);
        yb.col(static_cast<Eigen::Index>(k)) = targets.col(sample[start + k]);
      }
      const double loss = net.loss_and_gradient(xb, yb, grad);
      if (!std::isfinite(loss) || !grad.allFinite()) {
        throw TrainingError("member " + std::to_string(index) + " diverged at epoch " +
                            std::to_string(epoch));
      }
      beta1_t *= kAdamBeta1;
      beta2_t *= kAdamBeta2;
      m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * grad;
      v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * grad.cwiseProduct(grad);
      const double lr = config.learning_rate * std::sqrt(1.0 - beta2_t) / (1.0 - beta1_t);
      params.array() -= lr * m.array() / (v.array().sqrt() + kAdamEpsilon);
      net.set_parameters(params);
    }
  }
  return net;
}

}  // namespace

Standardizer Standardizer::per_dimension(const Eigen::MatrixXd& data) {
  Standardizer s;
  const double n = static_cast<double>(std::max<Eigen::Index>(data.cols(), 1));
  s.mean = data.rowwise().sum() / n;
  s.scale = ((data.colwise() - s.mean).array().square().rowwise().sum() / n).sqrt();
  for (Eigen::Index i = 0; i < s.scale.size(); ++i) {
    if (!(s.scale[i] > 1e-12)) s.scale[i] = 1.0;
  }
  return s;
}

Standardizer Standardizer::shared_scale(const Eigen::MatrixXd& data) {
  Standardizer s = per_dimension(data);
  const Eigen::VectorXd raw =
      ((data.colwise() - s.mean).array().square().rowwise().sum() /
       static_cast<double>(std::max<Eigen::Index>(data.cols(), 1)))
          .sqrt();
  double shared = raw.size() ? raw.maxCoeff() : 0.0;
  if (!(shared > 1e-12)) shared = 1.0;
  s.scale = Eigen::VectorXd::Constant(s.mean.size(), shared);
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& data) const {
  return (data.colwise() - mean).array().colwise() / scale.array();
}

Eigen::MatrixXd Standardizer::invert(const Eigen::MatrixXd& data) const {
  return (data.array().colwise() * scale.array()).matrix().colwise() + mean;
}

void TrainConfig::validate() const {
  if (members < 2) throw InvalidParameter("an ensemble needs at least two members");
  if (epochs == 0) throw InvalidParameter("epochs must be positive");
  if (batch_size == 0) throw InvalidParameter("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw InvalidParameter("learning_rate must be positive");
  if (hidden == 0) throw InvalidParameter("hidden width must be positive");
}

EnsembleModel EnsembleModel::train(const Dataset& data, const TrainConfig& config) {
  config.validate();
  if (data.size() == 0) throw InvalidInput("cannot train on an empty dataset");
  if (data.targets.cols() != data.inputs.cols()) {
    throw InvalidInput("inputs and targets differ in sample count");
  }

  const Standardizer input = Standardizer::per_dimension(data.inputs);
  const Standardizer output = Standardizer::shared_scale(data.targets);
  const Eigen::MatrixXd x = input.apply(data.inputs);
  const Eigen::MatrixXd y = output.apply(data.targets);

  // Members are independent; each gets its own derived seed.
  std::vector<std::future<Mlp>> jobs;
  for (std::size_t i = 0; i < config.members; ++i) {
    jobs.push_back(std::async(std::launch::async, train_member, std::cref(x), std::cref(y),
                              std::cref(config), i));
  }
  std::vector<Mlp> members;
  for (auto& job : jobs) members.push_back(job.get());

  return from_members(std::move(members), input, output, data.inputs);
}

EnsembleModel EnsembleModel::from_members(std::vector<Mlp> members, Standardizer input,
                                          Standardizer output,
                                          const Eigen::MatrixXd& calibration) {
  if (members.size() < 2) throw InvalidParameter("an ensemble needs at least two members");
  for (const auto& m : members) {
    if (m.input_size() != members.front().input_size() ||
        m.output_size() != members.front().output_size()) {
      throw InvalidParameter("ensemble members must share an architecture");
    }
  }
  EnsembleModel model;
  model.members_ = std::move(members);
  model.input_ = std::move(input);
  model.output_ = std::move(output);
  model.calibrate(calibration);
  return model;
}

void EnsembleModel::calibrate(const Eigen::MatrixXd& inputs) {
  const auto outputs = static_cast<Eigen::Index>(output_size());
  const double floor = std::pow(kVarianceFloorFraction * output_.scale.maxCoeff(), 2);
  output_normalizers_ = Eigen::VectorXd::Constant(outputs, floor);
  normalizer_ = floor;
  if (inputs.cols() == 0) return;

  std::vector<Eigen::MatrixXd> predictions;
  for (std::size_t m = 0; m < members_.size(); ++m) {
    predictions.push_back(member_predictions(inputs, m));
  }
  Eigen::MatrixXd stacked(outputs, static_cast<Eigen::Index>(members_.size()));
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    for (std::size_t m = 0; m < members_.size(); ++m) {
      stacked.col(static_cast<Eigen::Index>(m)) = predictions[m].col(c);
    }
    const Eigen::VectorXd var = spread(stacked);
    output_normalizers_ = output_normalizers_.cwiseMax(var);
    normalizer_ = std::max(normalizer_, var.mean());
  }
}

std::size_t EnsembleModel::input_size() const {
  return members_.empty() ? 0 : members_.front().input_size();
}

std::size_t EnsembleModel::output_size() const {
  return members_.empty() ? 0 : members_.front().output_size();
}

void EnsembleModel::require_trained() const {
  if (!trained()) throw StateError("ensemble model has not been trained");
}

Eigen::MatrixXd EnsembleModel::member_predictions(const Eigen::MatrixXd& inputs,
                                                  std::size_t member) const {
  return output_.invert(members_[member].forward(input_.apply(inputs)));
}

Eigen::MatrixXd EnsembleModel::predict_members(const Eigen::VectorXd& input) const {
  require_trained();
  if (input.size() != static_cast<Eigen::Index>(input_size())) {
    throw InvalidParameter("query has " + std::to_string(input.size()) + " dims, model expects " +
                           std::to_string(input_size()));
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(output_size()),
                      static_cast<Eigen::Index>(members_.size()));
  for (std::size_t m = 0; m < members_.size(); ++m) {
    out.col(static_cast<Eigen::Index>(m)) = member_predictions(input, m).col(0);
  }
  return out;
}

Eigen::VectorXd EnsembleModel::predict(const Eigen::VectorXd& input) const {
  const Eigen::MatrixXd all = predict_members(input);
  return all.rowwise().sum() / static_cast<double>(all.cols());
}

Eigen::VectorXd EnsembleModel::raw_variance_per_output(const Eigen::VectorXd& input) const {
  return spread(predict_members(input));
}

double EnsembleModel::raw_variance(const Eigen::VectorXd& input) const {
  return raw_variance_per_output(input).mean();
}

double EnsembleModel::uncertainty(const Eigen::VectorXd& input) const {
  return std::clamp(raw_variance(input) / normalizer_, 0.0, 1.0);
}

Eigen::VectorXd EnsembleModel::uncertainty_per_output(const Eigen::VectorXd& input) const {
  return (raw_variance_per_output(input).array() / output_normalizers_.array()).min(1.0).max(0.0);
}

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json EnsembleModel::to_json() const {
  require_trained();
  auto members = nlohmann::json::array();
  for (const auto& m : members_) members.push_back(m.to_json());
  return {{"format", "wrapsim-ensemble"},
          {"version", 1},
          {"members", members},
          {"input_mean", to_vector(input_.mean)},
          {"input_scale", to_vector(input_.scale)},
          {"output_mean", to_vector(output_.mean)},
          {"output_scale", to_vector(output_.scale)},
          {"normalizer", normalizer_},
          {"output_normalizers", to_vector(output_normalizers_)}};
}

EnsembleModel EnsembleModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "wrapsim-ensemble" || j.value("version", 0) != 1) {
    throw InvalidInput("not a version-1 ensemble checkpoint");
  }
  EnsembleModel model;
  for (const auto& m : j.at("members")) model.members_.push_back(Mlp::from_json(m));
  model.input_.mean = to_eigen(j.at("input_mean").get<std::vector<double>>());
  model.input_.scale = to_eigen(j.at("input_scale").get<std::vector<double>>());
  model.output_.mean = to_eigen(j.at("output_mean").get<std::vector<double>>());
  model.output_.scale = to_eigen(j.at("output_scale").get<std::vector<double>>());
  model.normalizer_ = j.at("normalizer").get<double>();
  model.output_normalizers_ = to_eigen(j.at("output_normalizers").get<std::vector<double>>());
  if (model.members_.size() < 2 || !(model.normalizer_ > 0.0)) {
    throw InvalidInput("checkpoint is not a trained ensemble");
  }
  return model;
}

}  // namespace wrapsim::learner
