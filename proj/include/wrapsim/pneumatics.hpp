#pragma once

#include <cstdint>

#include "wrapsim/random.hpp"

// Pressure dynamics of one display channel. The plant is an asymmetric
// first-order lag: inflation and deflation have separate time constants,
// calibrated so the simulated step response settles in the bench-measured
// times. "Settled" means within 5% of the step magnitude of the target.

namespace wrapsim::pneumatics {

enum class ChannelKind { Sleeve, Ring };

/// Fraction of the step magnitude that counts as settled.
inline constexpr double kSettleBand = 0.05;

/// Bench step-response timings for one display kind (seconds).
struct MeasuredTiming {
  double rise_1_to_3;   ///< 1 -> 3 psi
  double fall_3_to_1;   ///< 3 -> 1 psi
  double fill_to_1p5;   ///< empty -> above 1.5 psi; not used for calibration
};

MeasuredTiming measured_timing(ChannelKind kind);

/// Burst-safe ceiling for a display kind (psi, gauge).
double max_pressure(ChannelKind kind);

struct Transition {
  double from;          ///< psi
  double to;            ///< psi
  double settle_time;   ///< seconds
};

/// Time constant for which a first-order response from `from` toward `to`
/// enters the settle band exactly at `settle_time`: tau = settle_time / ln(20).
double calibrate_tau(ChannelKind kind, const Transition& transition);

struct ChannelSpec {
  ChannelKind kind = ChannelKind::Sleeve;
  double max_pressure = 3.5;      ///< psi
  double tau_up = 0.0;            ///< seconds, used while inflating
  double tau_down = 0.0;          ///< seconds, used while deflating
  double ambient_pressure = 0.0;  ///< psi gauge

  /// Calibrated from the measured 1<->3 psi timings.
  static ChannelSpec calibrated(ChannelKind kind);
  static ChannelSpec sleeve() { return calibrated(ChannelKind::Sleeve); }
  static ChannelSpec ring() { return calibrated(ChannelKind::Ring); }

  void validate() const;
};

struct PlantConfig {
  double dt = 1e-3;              ///< seconds
  std::uint64_t seed = 0;
  double sensor_noise_sd = 0.0;  ///< psi

  void validate() const;
};

struct PressureChannelState {
  double pressure = 0.0;   ///< psi gauge
  double commanded = 0.0;  ///< psi gauge
  double time = 0.0;       ///< seconds
};

/// One explicit Euler step of the lag. The command is clamped to
/// [0, max_pressure] first; the per-step gain dt/tau is capped at 1 so the
/// approach stays monotone for any dt.
PressureChannelState step(const PressureChannelState& state, const ChannelSpec& spec,
                          const PlantConfig& config);

/// Simulated time for the channel to settle from `from` to `to`.
double settle_time(const ChannelSpec& spec, double from, double to, double dt = 1e-3);

/// A channel plus its sensor: owns the state and the noise stream.
class PressureChannel {
 public:
  PressureChannel(ChannelSpec spec, PlantConfig config, double initial_pressure = 0.0);

  void command(double psi);
  void step();
  /// Steps until at least `duration` seconds have elapsed.
  void advance(double duration);

  double pressure() const { return state_.pressure; }
  double commanded() const { return state_.commanded; }
  double time() const { return state_.time; }
  const PressureChannelState& state() const { return state_; }
  const ChannelSpec& spec() const { return spec_; }

  /// Pressure as read by the sensor (true pressure plus Gaussian noise).
  double measured();

 private:
  ChannelSpec spec_;
  PlantConfig config_;
  PressureChannelState state_;
  Rng noise_rng_;
};

}  // namespace wrapsim::pneumatics
