#include "wrapsim/psychophysics/io.hpp"

#include <charconv>
#include <istream>
#include <ostream>

#include "wrapsim/error.hpp"

namespace wrapsim::psychophysics {

std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_number(std::string_view text) {
  double v = 0.0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
    throw InvalidInput("not a number: '" + std::string(text) + "'");
  }
  return v;
}

std::string csv_row(const PairResponse& r) {
  std::string correct = r.correct ? (*r.correct ? "1" : "0") : "";
  return std::to_string(r.trial_id) + ',' + format_number(r.first) + ',' + format_number(r.second) +
         ',' + std::to_string(r.answer) + ',' + correct + ',' + format_number(r.rt);
}

std::string csv_row(const TripletResponse& r) {
  return std::to_string(r.trial_id) + ',' + std::string(to_string(r.method)) + ',' +
         format_number(r.channels[0]) + ';' + format_number(r.channels[1]) + ';' +
         format_number(r.channels[2]) + ',' + std::string(to_string(r.answer)) + ',' +
         (r.correct ? "1" : "0") + ',' + format_number(r.rt);
}

void write_csv(std::ostream& out, std::span<const PairResponse> responses) {
  out << kResponseCsvHeader << '\n';
  for (const auto& r : responses) out << csv_row(r) << '\n';
}

void write_csv(std::ostream& out, std::span<const TripletResponse> responses) {
  out << kResponseCsvHeader << '\n';
  for (const auto& r : responses) out << csv_row(r) << '\n';
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::size_t parse_index(std::string_view text) {
  std::size_t v = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc{} || r.ptr != text.data() + text.size()) {
    throw InvalidInput("not a trial id: '" + std::string(text) + "'");
  }
  return v;
}

std::optional<bool> parse_correct(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text == "1") return true;
  if (text == "0") return false;
  throw InvalidInput("correct must be 1, 0 or empty");
}

}  // namespace

ResponseLog read_csv(std::istream& in, double reference, const PairProtocol* protocol) {
  ResponseLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != kResponseCsvHeader) throw InvalidInput("line 1: unexpected CSV header");
      continue;
    }
    try {
      const auto f = split(line, ',');
      if (f.size() != 6) throw InvalidInput("expected 6 fields, got " + std::to_string(f.size()));
      if (f[1] == "local" || f[1] == "global") {
        TripletResponse r;
        r.trial_id = parse_index(f[0]);
        r.method = method_from_string(f[1]);
        const auto ch = split(f[2], ';');
        if (ch.size() != 3) throw InvalidInput("expected three channel pressures");
        for (std::size_t i = 0; i < 3; ++i) r.channels[i] = parse_number(ch[i]);
        r.answer = channel_from_string(f[3]);
        const auto c = parse_correct(f[4]);
        if (!c) throw InvalidInput("triplet rows need a correctness flag");
        r.correct = *c;
        r.rt = parse_number(f[5]);
        log.triplets.push_back(r);
      } else {
        PairResponse r;
        r.trial_id = parse_index(f[0]);
        r.first = parse_number(f[1]);
        r.second = parse_number(f[2]);
        if (f[3] != "1" && f[3] != "2") throw InvalidInput("pair answer must be 1 or 2");
        r.answer = f[3] == "1" ? 1 : 2;
        r.correct = parse_correct(f[4]);
        r.rt = parse_number(f[5]);
        if (protocol) {
          const auto& t = protocol->trial(r.trial_id);
          if (t.first() != r.first || t.second() != r.second) {
            throw InvalidInput("pressures do not match protocol trial " + std::to_string(r.trial_id));
          }
          r.test_slot = t.test_slot;
        } else {
          r.test_slot = (r.first != reference && r.second == reference) ? 1 : 2;
        }
        log.pairs.push_back(r);
      }
    } catch (const Error& e) {
      throw InvalidInput("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

}  // namespace wrapsim::psychophysics
