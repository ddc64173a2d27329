#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace wrapsim::psychophysics {

inline constexpr double kReferencePressure = 2.0;  ///< psi
inline constexpr std::array<double, 7> kTestPressures{1.5, 1.75, 1.875, 2.0, 2.125, 2.25, 2.5};
inline constexpr std::size_t kPairReps = 10;
inline constexpr double kHighPressure = 2.75;  ///< psi
inline constexpr std::size_t kTripletRepsPerChannel = 16;

/// One reference-vs-test comparison. Slots are numbered 1 and 2 in
/// presentation order; the test pressure sits in `test_slot`.
struct PairTrial {
  std::size_t id = 0;
  double reference = kReferencePressure;
  double test = kReferencePressure;
  int test_slot = 2;

  double first() const { return test_slot == 1 ? test : reference; }
  double second() const { return test_slot == 1 ? reference : test; }
  bool identical() const { return test == reference; }

  friend bool operator==(const PairTrial&, const PairTrial&) = default;
};

struct PairProtocol {
  double reference = kReferencePressure;
  std::vector<double> test_pressures{kTestPressures.begin(), kTestPressures.end()};
  std::size_t reps = kPairReps;
  std::uint64_t seed = 0;
  std::vector<PairTrial> trials;

  const PairTrial& trial(std::size_t id) const;
  void validate() const;

  friend bool operator==(const PairProtocol&, const PairProtocol&) = default;
};

/// Every test pressure `reps` times in a seeded order, each with a seeded
/// slot for the test stimulus.
PairProtocol generate_pair_protocol(std::uint64_t seed);

enum class Channel { Left, Center, Right };
enum class Method { Local, Global };
enum class MethodOrder { LocalFirst, GlobalFirst };

inline constexpr std::array<Channel, 3> kChannels{Channel::Left, Channel::Center, Channel::Right};

std::string_view to_string(Channel channel);
Channel channel_from_string(std::string_view text);
std::string_view to_string(Method method);
Method method_from_string(std::string_view text);
std::string_view to_string(MethodOrder order);
MethodOrder method_order_from_string(std::string_view text);

/// Odd-one-out trial: the target channel is at P_H, the others at P_o.
struct TripletTrial {
  std::size_t id = 0;
  Method method = Method::Local;
  Channel target = Channel::Left;
  std::array<double, 3> pressures{};

  friend bool operator==(const TripletTrial&, const TripletTrial&) = default;
};

struct TripletProtocol {
  double reference = kReferencePressure;
  double high = kHighPressure;
  std::size_t reps_per_channel = kTripletRepsPerChannel;
  MethodOrder order = MethodOrder::LocalFirst;
  std::uint64_t seed = 0;
  std::vector<TripletTrial> trials;

  std::size_t trials_per_method() const { return 3 * reps_per_channel; }
  double delta() const { return high - reference; }
  const TripletTrial& trial(std::size_t id) const;
  void validate() const;

  friend bool operator==(const TripletProtocol&, const TripletProtocol&) = default;
};

/// Both methods in the given order, each a seeded shuffle of
/// `reps_per_channel` trials per target channel.
TripletProtocol generate_triplet_protocol(std::uint64_t seed,
                                          MethodOrder order = MethodOrder::LocalFirst);

void to_json(nlohmann::json& j, const PairProtocol& p);
void from_json(const nlohmann::json& j, PairProtocol& p);
void to_json(nlohmann::json& j, const TripletProtocol& p);
void from_json(const nlohmann::json& j, TripletProtocol& p);

/// Canonical protocol file text (compact JSON plus newline).
std::string serialize(const PairProtocol& p);
std::string serialize(const TripletProtocol& p);

}  // namespace wrapsim::psychophysics
