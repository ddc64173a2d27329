#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wrapsim/psychophysics/analysis.hpp"
#include "wrapsim/psychophysics/protocol.hpp"

namespace wrapsim::psychophysics {

inline constexpr std::string_view kResponseCsvHeader =
    "trial_id,shown_a,shown_b_or_channels,answer,correct,rt_seconds";

/// Pair rows: shown_a / shown_b are the slot pressures, answer is 1 or 2,
/// correct is 1, 0, or empty for identical pairs. Triplet rows: shown_a is
/// the method, the channels are ';'-separated, answer is a channel name.
/// Numbers use the shortest round-trip representation.
void write_csv(std::ostream& out, std::span<const PairResponse> responses);
void write_csv(std::ostream& out, std::span<const TripletResponse> responses);

std::string csv_row(const PairResponse& r);
std::string csv_row(const TripletResponse& r);

struct ResponseLog {
  std::vector<PairResponse> pairs;
  std::vector<TripletResponse> triplets;
};

/// Parses a response CSV. The test slot of a pair row is the slot not
/// holding `reference`; for identical pairs it comes from `protocol` when
/// given, slot 2 otherwise. Throws InvalidInput with the line number.
ResponseLog read_csv(std::istream& in, double reference = kReferencePressure,
                     const PairProtocol* protocol = nullptr);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);
double parse_number(std::string_view text);

}  // namespace wrapsim::psychophysics
