#include "wrapsim/pneumatics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wrapsim/error.hpp"

namespace wrapsim::pneumatics {

namespace {

// ln(1 / kSettleBand) = ln(20)
const double kSettleLog = std::log(1.0 / kSettleBand);

}  // namespace

MeasuredTiming measured_timing(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::Sleeve:
      return {0.72, 0.18, 0.86};
    case ChannelKind::Ring:
      return {0.38, 0.12, 0.55};
  }
  throw InvalidParameter("unknown channel kind");
}

double max_pressure(ChannelKind kind) {
  return kind == ChannelKind::Sleeve ? 3.5 : 5.0;
}

double calibrate_tau(ChannelKind kind, const Transition& transition) {
  if (!(transition.settle_time > 0.0)) {
    throw InvalidParameter("settle_time must be positive");
  }
  if (transition.from == transition.to) {
    throw InvalidParameter("calibration transition needs from != to");
  }
  const double ceiling = max_pressure(kind);
  for (double p : {transition.from, transition.to}) {
    if (!(p >= 0.0 && p <= ceiling)) {
      throw InvalidParameter("calibration pressure " + std::to_string(p) +
                             " psi outside [0, " + std::to_string(ceiling) + "]");
    }
  }
  return transition.settle_time / kSettleLog;
}

ChannelSpec ChannelSpec::calibrated(ChannelKind kind) {
  const MeasuredTiming timing = measured_timing(kind);
  ChannelSpec spec;
  spec.kind = kind;
  spec.max_pressure = pneumatics::max_pressure(kind);
  spec.tau_up = calibrate_tau(kind, {1.0, 3.0, timing.rise_1_to_3});
  spec.tau_down = calibrate_tau(kind, {3.0, 1.0, timing.fall_3_to_1});
  return spec;
}

void ChannelSpec::validate() const {
  if (!(max_pressure > 0.0)) throw InvalidParameter("max_pressure must be positive");
  if (!(tau_down > 0.0)) throw InvalidParameter("tau_down must be positive");
  if (!(tau_up > tau_down)) throw InvalidParameter("tau_up must exceed tau_down");
  if (ambient_pressure != 0.0) throw InvalidParameter("ambient pressure is fixed at 0 gauge");
}

void PlantConfig::validate() const {
  if (!(dt > 0.0)) throw InvalidParameter("dt must be positive");
  if (!(sensor_noise_sd >= 0.0)) throw InvalidParameter("sensor_noise_sd must be >= 0");
}

PressureChannelState step(const PressureChannelState& state, const ChannelSpec& spec,
                          const PlantConfig& config) {
  PressureChannelState next = state;
  next.commanded = std::clamp(state.commanded, 0.0, spec.max_pressure);
  const double tau = next.commanded > state.pressure ? spec.tau_up : spec.tau_down;
  const double gain = std::min(1.0, config.dt / tau);
  next.pressure = state.pressure + gain * (next.commanded - state.pressure);
  next.pressure = std::clamp(next.pressure, 0.0, spec.max_pressure);
  next.time = state.time + config.dt;
  return next;
}

double settle_time(const ChannelSpec& spec, double from, double to, double dt) {
  if (from == to) throw InvalidParameter("settle_time needs from != to");
  for (double p : {from, to}) {
    if (!(p >= 0.0 && p <= spec.max_pressure)) {
      throw InvalidParameter("pressure " + std::to_string(p) + " psi is unreachable (max " +
                             std::to_string(spec.max_pressure) + ")");
    }
  }
  PlantConfig config;
  config.dt = dt;
  config.validate();

  const double band = kSettleBand * std::abs(to - from);
  PressureChannelState state{from, to, 0.0};
  // A first-order lag settles within a few hundred tau; anything beyond is a bug.
  const auto limit = static_cast<long>(1000.0 * std::max(spec.tau_up, spec.tau_down) / dt) + 10;
  for (long n = 1; n <= limit; ++n) {
    state = step(state, spec, config);
    if (std::abs(state.pressure - to) <= band) return static_cast<double>(n) * dt;
  }
  throw InvalidParameter("channel never settled");
}

PressureChannel::PressureChannel(ChannelSpec spec, PlantConfig config, double initial_pressure)
    : spec_(spec), config_(config), noise_rng_(config.seed) {
  spec_.validate();
  config_.validate();
  const double p = std::clamp(initial_pressure, 0.0, spec_.max_pressure);
  state_ = {p, p, 0.0};
}

void PressureChannel::command(double psi) {
  state_.commanded = std::clamp(psi, 0.0, spec_.max_pressure);
}

void PressureChannel::step() { state_ = pneumatics::step(state_, spec_, config_); }

void PressureChannel::advance(double duration) {
  const double end = state_.time + duration - 0.5 * config_.dt;
  while (state_.time < end) step();
}

double PressureChannel::measured() {
  if (config_.sensor_noise_sd == 0.0) return state_.pressure;
  std::normal_distribution<double> noise(0.0, config_.sensor_noise_sd);
  return state_.pressure + noise(noise_rng_);
}

}  // namespace wrapsim::pneumatics
