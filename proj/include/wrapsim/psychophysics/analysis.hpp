#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "wrapsim/psychophysics/protocol.hpp"

namespace wrapsim::psychophysics {

/// Answer to a pair trial: the slot (1 or 2) chosen as higher.
struct PairResponse {
  std::size_t trial_id = 0;
  double first = 0.0;   ///< psi shown in slot 1
  double second = 0.0;  ///< psi shown in slot 2
  int test_slot = 2;
  int answer = 1;
  /// Empty for identical pairs: no slot is higher.
  std::optional<bool> correct;
  double rt = 0.0;  ///< s, from steady state to answer
  /// Time spent exploring each slot, when the runner measured it.
  std::optional<std::array<double, 2>> slot_times;

  double test() const { return test_slot == 1 ? first : second; }
  bool identical() const { return first == second; }
  bool chose_test() const { return answer == test_slot; }

  friend bool operator==(const PairResponse&, const PairResponse&) = default;
};

/// Answer to a triplet trial: the channel reported as different.
struct TripletResponse {
  std::size_t trial_id = 0;
  Method method = Method::Local;
  std::array<double, 3> channels{};
  Channel answer = Channel::Left;
  bool correct = false;
  double rt = 0.0;

  /// Channel holding the odd pressure.
  Channel target() const;

  friend bool operator==(const TripletResponse&, const TripletResponse&) = default;
};

/// Throws InvalidInput for a slot other than 1 or 2 or a non-positive rt.
PairResponse score(const PairTrial& trial, int answer, double rt);
TripletResponse score(const TripletTrial& trial, Channel answer, double rt);

/// Modeled percentage of "test is higher" answers.
double sigmoid(double pressure, double k, double reference = kReferencePressure);

/// JND = ln(3) / k. Throws InvalidParameter for k <= 0.
double jnd(double k);
/// 100 * jnd / reference.
double weber(double jnd, double reference = kReferencePressure);

struct PressureProportion {
  double pressure = 0.0;
  double percent = 0.0;  ///< of answers choosing the test stimulus
  std::size_t count = 0;
};

/// Percent of trials per test pressure where the test slot was chosen,
/// ascending by pressure.
std::vector<PressureProportion> proportions(std::span<const PairResponse> responses);

struct PsychometricFit {
  double k = 0.0;
  double reference = kReferencePressure;
  double jnd = 0.0;
  double weber = 0.0;
  double sse = 0.0;
  std::vector<PressureProportion> proportions;
};

inline constexpr double kMinSteepness = 0.1;
inline constexpr double kMaxSteepness = 50.0;

/// Least-squares fit of the sigmoid steepness to per-pressure percentages
/// over k in [0.1, 50]. Throws FitDegenerate with fewer than two distinct
/// pressures or when every percentage is equal.
PsychometricFit fit_sigmoid(std::span<const PressureProportion> data,
                            double reference = kReferencePressure);
PsychometricFit fit_sigmoid(std::span<const PairResponse> responses,
                            double reference = kReferencePressure);

/// Sum of squared percentage residuals at steepness k.
double fit_error(std::span<const PressureProportion> data, double k,
                 double reference = kReferencePressure);

struct Bias {
  double first_pct = 0.0;
  double second_pct = 0.0;
  std::size_t count = 0;
};

/// Slot preference over the identical pairs. Throws InvalidInput if there
/// are none.
Bias bias(std::span<const PairResponse> responses);

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;  ///< sample SD (n - 1); 0 for a single value

  friend bool operator==(const Summary&, const Summary&) = default;
};

/// Throws InvalidInput on an empty set.
Summary summarize(std::span<const double> values);

struct PairTimeSummary {
  Summary overall;
  std::map<bool, Summary> by_correct;      ///< identical pairs excluded
  std::map<double, Summary> by_pressure;   ///< test pressure
  std::map<int, Summary> by_slot;          ///< slot exploration times, when recorded
};

struct TripletTimeSummary {
  Summary overall;
  std::map<bool, Summary> by_correct;
  std::map<Channel, Summary> by_channel;  ///< target channel
  std::map<Method, Summary> by_method;
};

PairTimeSummary time_summary(std::span<const PairResponse> responses);
TripletTimeSummary time_summary(std::span<const TripletResponse> responses);

struct ConfusionMatrix {
  /// counts[target][answer]
  std::array<std::array<std::size_t, 3>, 3> counts{};
  /// Percent correct per target channel; empty when the channel was never the target.
  std::array<std::optional<double>, 3> accuracy;
  double overall = 0.0;  ///< percent
  std::size_t total = 0;
};

ConfusionMatrix confusion_matrix(std::span<const TripletResponse> responses);

}  // namespace wrapsim::psychophysics
