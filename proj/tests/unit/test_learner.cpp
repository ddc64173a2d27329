#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "oracles.hpp"
#include "wrapsim/error.hpp"
#include "wrapsim/learner/demonstration.hpp"
#include "wrapsim/learner/ensemble.hpp"
#include "wrapsim/learner/features.hpp"
#include "wrapsim/learner/learner.hpp"
#include "wrapsim/learner/mlp.hpp"

using namespace wrapsim::learner;
using wrapsim::Rng;

namespace {

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = 2.0 * wrapsim::uniform_unit(rng) - 1.0;
  }
  return m;
}

TrainConfig quick(std::uint64_t seed = 1) {
  TrainConfig c;
  c.members = 3;
  c.epochs = 60;
  c.hidden = 16;
  c.seed = seed;
  return c;
}

/// 1-D regression y = sin(2x) on x in [-1, 0].
Dataset toy(std::size_t n) {
  Dataset d{Eigen::MatrixXd(1, n), Eigen::MatrixXd(1, n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double x = -1.0 + static_cast<double>(i) / static_cast<double>(n - 1);
    d.inputs(0, i) = x;
    d.targets(0, i) = std::sin(2.0 * x);
  }
  return d;
}

Demonstration line_demo(double x0, double x1, double speed = 0.2, double dt = 0.02) {
  std::vector<double> times;
  std::vector<ArmState> poses;
  const double duration = std::abs(x1 - x0) / speed;
  for (double t = 0.0; t <= duration + 1e-12; t += dt) {
    times.push_back(t);
    poses.push_back({x0 + (x1 - x0) * t / duration, 0.1, 0.3, 0.0});
  }
  return demonstration_from_poses(DemoLabel::Expert, times, poses);
}

}  // namespace

TEST_CASE("analytic gradient matches central differences") {
  Rng rng(11);
  for (std::size_t batch : {1u, 7u, 32u}) {
    Mlp net(3, 3, 8, 2);
    net.initialize(rng);
    const Eigen::MatrixXd x = random_matrix(rng, 3, static_cast<Eigen::Index>(batch));
    const Eigen::MatrixXd y = random_matrix(rng, 3, static_cast<Eigen::Index>(batch));
    Eigen::VectorXd analytic;
    net.loss_and_gradient(x, y, analytic);
    Mlp probe = net;
    const auto numeric = oracle::central_gradient(
        [&](const Eigen::VectorXd& p) {
          probe.set_parameters(p);
          return probe.loss(x, y);
        },
        net.parameters(), 1e-5);
    for (Eigen::Index i = 0; i < numeric.size(); ++i) {
      CHECK(std::abs(analytic[i] - numeric[i]) <= 1e-6 * std::max(1.0, std::abs(numeric[i])));
    }
  }
}

TEST_CASE("loss_and_gradient reports the same loss as loss") {
  Rng rng(2);
  Mlp net(2, 1, 4, 1);
  net.initialize(rng);
  const auto x = random_matrix(rng, 2, 5);
  const auto y = random_matrix(rng, 1, 5);
  Eigen::VectorXd g;
  CHECK(net.loss_and_gradient(x, y, g) == doctest::Approx(net.loss(x, y)));
  CHECK(static_cast<std::size_t>(g.size()) == net.parameter_count());
}

TEST_CASE("parameter vector round trip") {
  Rng rng(3);
  Mlp net(3, 2);
  net.initialize(rng);
  CHECK(net.parameter_count() == 3 * 32 + 32 + 32 * 32 + 32 + 32 * 2 + 2);
  Mlp copy(3, 2);
  copy.set_parameters(net.parameters());
  CHECK(copy == net);
  CHECK_THROWS_AS(copy.set_parameters(Eigen::VectorXd::Zero(3)), wrapsim::InvalidParameter);
  CHECK(Mlp::from_json(net.to_json()) == net);
}

TEST_CASE("standardizer inverts and survives constant columns") {
  Eigen::MatrixXd data(2, 4);
  data << 1, 2, 3, 4, 5, 5, 5, 5;
  const auto s = Standardizer::per_dimension(data);
  CHECK(s.scale[1] == 1.0);
  CHECK((s.invert(s.apply(data)) - data).norm() < 1e-12);
  const auto shared = Standardizer::shared_scale(data);
  CHECK(shared.scale[0] == shared.scale[1]);
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.members = 1;
  CHECK_THROWS_AS(c.validate(), wrapsim::InvalidParameter);
  c = {};
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), wrapsim::InvalidParameter);
}

TEST_CASE("training is deterministic in the seed") {
  const auto data = toy(40);
  const auto a = EnsembleModel::train(data, quick(5));
  const auto b = EnsembleModel::train(data, quick(5));
  const auto c = EnsembleModel::train(data, quick(6));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.member(i) == b.member(i));
  CHECK_FALSE(a.member(0) == c.member(0));
  CHECK(a.member(0) != a.member(1));
}

TEST_CASE("members learn the data and disagree away from it") {
  auto config = quick(7);
  config.epochs = 300;
  const auto data = toy(60);
  const auto model = EnsembleModel::train(data, config);
  Eigen::VectorXd q(1);
  double err = 0.0;
  for (Eigen::Index i = 0; i < data.inputs.cols(); ++i) {
    q[0] = data.inputs(0, i);
    err = std::max(err, std::abs(model.predict(q)[0] - data.targets(0, i)));
  }
  CHECK(err < 0.1);
  q[0] = -0.5;
  const double inside = model.uncertainty(q);
  q[0] = 3.0;
  const double outside = model.uncertainty(q);
  CHECK(outside > inside);
  CHECK(outside <= 1.0);
  CHECK(inside >= 0.0);
}

TEST_CASE("identical members have zero uncertainty") {
  Rng rng(8);
  Mlp net(1, 1, 4, 1);
  net.initialize(rng);
  const auto data = toy(10);
  const auto model = EnsembleModel::from_members(
      {net, net, net}, Standardizer::per_dimension(data.inputs),
      Standardizer::shared_scale(data.targets), data.inputs);
  Eigen::VectorXd q(1);
  for (double x : {-3.0, 0.0, 0.4, 10.0}) {
    q[0] = x;
    CHECK(model.raw_variance(q) == 0.0);
    CHECK(model.uncertainty(q) == 0.0);
  }
}

TEST_CASE("checkpoint round trip") {
  const auto model = EnsembleModel::train(toy(20), quick(9));
  const auto copy = EnsembleModel::from_json(model.to_json());
  Eigen::VectorXd q(1);
  for (double x : {-1.0, -0.2, 2.0}) {
    q[0] = x;
    CHECK(copy.predict(q) == model.predict(q));
    CHECK(copy.uncertainty(q) == model.uncertainty(q));
  }
  auto bad = model.to_json();
  bad["version"] = 99;
  CHECK_THROWS_AS(EnsembleModel::from_json(bad), wrapsim::InvalidInput);
}

TEST_CASE("untrained and mis-shaped queries") {
  EnsembleModel empty;
  CHECK_THROWS_AS(uncertainty(empty, {}), wrapsim::StateError);
  const auto model = EnsembleModel::train(toy(10), quick());
  CHECK_THROWS_AS(model.uncertainty(Eigen::VectorXd::Zero(2)), wrapsim::InvalidParameter);
  CHECK_THROWS_AS(EnsembleModel::train(Dataset{}, quick()), wrapsim::InvalidInput);
}

TEST_CASE("angles wrap into (-pi, pi]") {
  CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(3 * std::numbers::pi / 2) == doctest::Approx(-std::numbers::pi / 2));
  CHECK(wrap_angle(0.25) == 0.25);
  const ArmState a{0, 0, 3.0, 0};
  const ArmState b{0, 0, -3.0, 0};
  CHECK(pose_delta(a, b).dtheta == doctest::Approx(2 * std::numbers::pi - 6.0));
}

TEST_CASE("demonstrations from poses carry next-pose deltas") {
  const std::vector<double> t{0.0, 0.1, 0.2};
  const std::vector<ArmState> p{{0, 0, 0, 0}, {0.01, 0, 0, 0}, {0.03, 0.01, 0, 0}};
  const auto demo = demonstration_from_poses(DemoLabel::UserFirst, t, p);
  CHECK(demo.samples[0].action.dx == doctest::Approx(0.01));
  CHECK(demo.samples[1].action.dy == doctest::Approx(0.01));
  CHECK(demo.samples[2].action == Action{});
  CHECK(demo.duration() == doctest::Approx(0.2));
  CHECK(demo.arc_length() == doctest::Approx(0.01 + std::sqrt(0.0004 + 0.0001)));
  CHECK_NOTHROW(demo.validate());
}

TEST_CASE("demonstration validation") {
  const std::vector<double> t{0.0, 0.0};
  const std::vector<ArmState> p{{0, 0, 0, 0}, {0, 0, 0, 0}};
  CHECK_THROWS_AS(demonstration_from_poses(DemoLabel::Expert, t, p).validate(),
                  wrapsim::InvalidInput);
  const std::vector<double> t2{0.0, 0.1};
  const std::vector<ArmState> fast{{0, 0, 0, 0}, {1.0, 0, 0, 0}};
  CHECK_THROWS_AS(demonstration_from_poses(DemoLabel::Expert, t2, fast).validate(),
                  wrapsim::InvalidInput);
  CHECK_THROWS_AS(demo_label_from_string("teacher"), wrapsim::InvalidInput);
}

TEST_CASE("resampling lands on the grid and keeps the trace") {
  const auto demo = line_demo(0.0, 0.2, 0.2, 0.013);
  const auto grid = resample(demo, kActionDt);
  REQUIRE(grid.samples.size() >= 2);
  for (std::size_t i = 0; i < grid.samples.size(); ++i) {
    CHECK(grid.samples[i].t == doctest::Approx(kActionDt * static_cast<double>(i)));
    CHECK(grid.samples[i].state.x == doctest::Approx(0.2 * grid.samples[i].t));
  }
  CHECK(grid.samples[0].action.dx == doctest::Approx(0.2 * kActionDt));
}

TEST_CASE("planar dataset drops each demonstration's last sample") {
  const std::vector<Demonstration> demos{line_demo(0.0, 0.1), line_demo(0.5, 0.6)};
  const auto data = planar_dataset(demos);
  std::size_t expected = 0;
  for (const auto& d : demos) expected += resample(d).samples.size() - 1;
  CHECK(data.size() == expected);
  CHECK(data.inputs.rows() == 3);
  CHECK(data.inputs(2, 0) == doctest::Approx(0.3));
  CHECK_THROWS_AS(train(std::vector<Demonstration>{}, quick()), wrapsim::InvalidInput);
}

TEST_CASE("demonstration JSONL round trip") {
  auto demo = line_demo(0.0, 0.05);
  std::stringstream buffer;
  write_jsonl(buffer, demo);
  const auto back = read_jsonl(buffer, DemoLabel::Expert);
  REQUIRE(back.samples.size() == demo.samples.size());
  for (std::size_t i = 0; i < demo.samples.size(); ++i) CHECK(back.samples[i] == demo.samples[i]);
  std::stringstream broken("{\"t\": 0}\n");
  CHECK_THROWS_AS(read_jsonl(broken, DemoLabel::Expert), wrapsim::InvalidInput);
}

TEST_CASE("scripted schedule is one-hot per third") {
  const auto s =
      UncertaintySchedule::thirds({Feature::Orientation, Feature::EdgeDistance, Feature::Height});
  CHECK(s.at(0.1) == FeatureVector{0, 0, 1});
  CHECK(s.at(0.5) == FeatureVector{1, 0, 0});
  CHECK(s.at(1.0) == FeatureVector{0, 1, 0});
  CHECK(s.at(1.2) == FeatureVector{0, 0, 0});
  CHECK(s.at(-0.1) == FeatureVector{0, 0, 0});
  const nlohmann::json j = s;
  const auto back = j.get<UncertaintySchedule>();
  CHECK(back.at(0.5) == s.at(0.5));
  CHECK(back.segments.size() == 3);
}

TEST_CASE("feature names") {
  for (auto f : kFeatures) CHECK(feature_from_string(to_string(f)) == f);
  CHECK(to_string(Feature::EdgeDistance) == "edge_distance");
  CHECK_THROWS_AS(feature_from_string("width"), wrapsim::InvalidInput);
  const auto v = feature_values({0.3, 0.05, 0.2, 0.01});
  CHECK(v == FeatureVector{0.05, 0.01, 0.2});
}

TEST_CASE("feature source must be unambiguous") {
  const auto s = UncertaintySchedule::thirds({Feature::Height, Feature::Height, Feature::Height});
  FeatureSource none;
  CHECK_THROWS_AS(feature_uncertainty(none, {}), wrapsim::ConfigurationError);
  FeatureSource scripted{nullptr, &s, {-0.4, 0.4}};
  CHECK(feature_uncertainty(scripted, {0.0, 0, 0, 0}) == FeatureVector{0, 1, 0});
}

TEST_CASE("feature ensemble is uncertain where demonstrations never went") {
  std::vector<Demonstration> demos;
  for (double y : {0.04, 0.05, 0.06}) {
    auto d = line_demo(-0.4, 0.0);
    for (auto& s : d.samples) s.state.y = y;
    demos.push_back(d);
  }
  auto config = quick(3);
  config.epochs = 100;
  const ProgressAxis axis{-0.4, 0.4};
  const auto fe = FeatureEnsemble::train(demos, axis, config);
  const auto seen = fe.uncertainty({-0.2, 0.05, 0.0, 0.0});
  const auto unseen = fe.uncertainty({0.35, 0.2, 0.0, 0.0});
  CHECK(unseen[0] > seen[0]);
  for (double u : unseen) {
    CHECK(u >= 0.0);
    CHECK(u <= 1.0);
  }
}
