#include "wrapsim/learner/mlp.hpp"

#include <cmath>

#include "wrapsim/error.hpp"

namespace wrapsim::learner {

Mlp::Mlp(std::size_t inputs, std::size_t outputs, std::size_t hidden, std::size_t hidden_layers) {
  if (inputs == 0 || outputs == 0 || hidden == 0) {
    throw InvalidParameter("network dimensions must be positive");
  }
  std::size_t fan_in = inputs;
  for (std::size_t l = 0; l < hidden_layers; ++l) {
    layers_.push_back({Eigen::MatrixXd::Zero(hidden, fan_in), Eigen::VectorXd::Zero(hidden)});
    fan_in = hidden;
  }
  layers_.push_back({Eigen::MatrixXd::Zero(outputs, fan_in), Eigen::VectorXd::Zero(outputs)});
}

void Mlp::initialize(Rng& rng) {
  for (auto& layer : layers_) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.weights.rows() + layer.weights.cols()));
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
        layer.weights(r, c) = limit * (2.0 * uniform_unit(rng) - 1.0);
      }
    }
    layer.bias.setZero();
  }
}

std::size_t Mlp::input_size() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weights.cols());
}

std::size_t Mlp::output_size() const {
  return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weights.rows());
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    n += static_cast<std::size_t>(layer.weights.size() + layer.bias.size());
  }
  return n;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& inputs) const {
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weights * a;
    z.colwise() += layers_[l].bias;
    a = (l + 1 < layers_.size()) ? Eigen::MatrixXd(z.array().tanh()) : z;
  }
  return a;
}

double Mlp::loss(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets) const {
  return (forward(inputs) - targets).squaredNorm() / static_cast<double>(targets.size());
}

double Mlp::loss_and_gradient(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                              Eigen::VectorXd& gradient) const {
  std::vector<Eigen::MatrixXd> activations;
  activations.reserve(layers_.size() + 1);
  activations.push_back(inputs);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weights * activations.back();
    z.colwise() += layers_[l].bias;
    activations.push_back((l + 1 < layers_.size()) ? Eigen::MatrixXd(z.array().tanh()) : z);
  }

  const Eigen::MatrixXd residual = activations.back() - targets;
  const double scale = 1.0 / static_cast<double>(targets.size());
  const double value = residual.squaredNorm() * scale;

  gradient.resize(static_cast<Eigen::Index>(parameter_count()));
  std::vector<Eigen::Index> offsets(layers_.size());
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    offsets[l] = offset;
    offset += layers_[l].weights.size() + layers_[l].bias.size();
  }

  Eigen::MatrixXd delta = 2.0 * scale * residual;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Eigen::MatrixXd grad_w = delta * activations[l].transpose();
    const Eigen::VectorXd grad_b = delta.rowwise().sum();
    gradient.segment(offsets[l], grad_w.size()) =
        Eigen::Map<const Eigen::VectorXd>(grad_w.data(), grad_w.size());
    gradient.segment(offsets[l] + grad_w.size(), grad_b.size()) = grad_b;
    if (l > 0) {
      const Eigen::MatrixXd back = layers_[l].weights.transpose() * delta;
      delta = back.array() * (1.0 - activations[l].array().square());
    }
  }
  return value;
}

Eigen::VectorXd Mlp::parameters() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index offset = 0;
  for (const auto& layer : layers_) {
    flat.segment(offset, layer.weights.size()) =
        Eigen::Map<const Eigen::VectorXd>(layer.weights.data(), layer.weights.size());
    offset += layer.weights.size();
    flat.segment(offset, layer.bias.size()) = layer.bias;
    offset += layer.bias.size();
  }
  return flat;
}

void Mlp::set_parameters(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count())) {
    throw InvalidParameter("parameter vector has the wrong length");
  }
  Eigen::Index offset = 0;
  for (auto& layer : layers_) {
    Eigen::Map<Eigen::VectorXd>(layer.weights.data(), layer.weights.size()) =
        flat.segment(offset, layer.weights.size());
    offset += layer.weights.size();
    layer.bias = flat.segment(offset, layer.bias.size());
    offset += layer.bias.size();
  }
}

nlohmann::json Mlp::to_json() const {
  auto layers = nlohmann::json::array();
  for (const auto& layer : layers_) {
    layers.push_back({{"rows", layer.weights.rows()},
                      {"cols", layer.weights.cols()},
                      {"weights", std::vector<double>(layer.weights.data(),
                                                      layer.weights.data() + layer.weights.size())},
                      {"bias", std::vector<double>(layer.bias.data(),
                                                   layer.bias.data() + layer.bias.size())}});
  }
  return {{"layers", layers}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp mlp;
  for (const auto& jl : j.at("layers")) {
    const auto rows = jl.at("rows").get<Eigen::Index>();
    const auto cols = jl.at("cols").get<Eigen::Index>();
    const auto w = jl.at("weights").get<std::vector<double>>();
    const auto b = jl.at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols ||
        static_cast<Eigen::Index>(b.size()) != rows) {
      throw InvalidInput("checkpoint layer has inconsistent shape");
    }
    Layer layer{Eigen::Map<const Eigen::MatrixXd>(w.data(), rows, cols),
                Eigen::Map<const Eigen::VectorXd>(b.data(), rows)};
    if (!mlp.layers_.empty() && mlp.layers_.back().weights.rows() != cols) {
      throw InvalidInput("checkpoint layers do not chain");
    }
    mlp.layers_.push_back(std::move(layer));
  }
  if (mlp.layers_.empty()) throw InvalidInput("checkpoint member has no layers");
  return mlp;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    const auto& x = a.layers_[l];
    const auto& y = b.layers_[l];
    if (x.weights.rows() != y.weights.rows() || x.weights.cols() != y.weights.cols()) return false;
    if (x.weights != y.weights || x.bias != y.bias) return false;
  }
  return true;
}

}  // namespace wrapsim::learner
