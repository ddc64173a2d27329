#include "wrapsim/psychophysics/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/tools/minima.hpp>

#include "wrapsim/error.hpp"

namespace wrapsim::psychophysics {

Channel TripletResponse::target() const {
  // The odd one out differs from the other two.
  if (channels[1] == channels[2] && channels[0] != channels[1]) return Channel::Left;
  if (channels[0] == channels[2] && channels[1] != channels[0]) return Channel::Center;
  if (channels[0] == channels[1] && channels[2] != channels[0]) return Channel::Right;
  throw InvalidInput("triplet " + std::to_string(trial_id) + " has no odd channel");
}

PairResponse score(const PairTrial& trial, int answer, double rt) {
  if (answer != 1 && answer != 2) throw InvalidInput("pair answer must be slot 1 or 2");
  if (!(rt > 0.0)) throw InvalidInput("response time must be positive");
  PairResponse r;
  r.trial_id = trial.id;
  r.first = trial.first();
  r.second = trial.second();
  r.test_slot = trial.test_slot;
  r.answer = answer;
  r.rt = rt;
  if (!trial.identical()) {
    const int higher = r.first > r.second ? 1 : 2;
    r.correct = answer == higher;
  }
  return r;
}

TripletResponse score(const TripletTrial& trial, Channel answer, double rt) {
  if (!(rt > 0.0)) throw InvalidInput("response time must be positive");
  return {trial.id, trial.method, trial.pressures, answer, answer == trial.target, rt};
}

double sigmoid(double pressure, double k, double reference) {
  return 100.0 / (1.0 + std::exp(-k * (pressure - reference)));
}

double jnd(double k) {
  if (!(k > 0.0)) throw InvalidParameter("steepness k must be positive");
  return std::log(3.0) / k;
}

double weber(double jnd_psi, double reference) {
  if (!(reference > 0.0)) throw InvalidParameter("reference pressure must be positive");
  return 100.0 * jnd_psi / reference;
}

std::vector<PressureProportion> proportions(std::span<const PairResponse> responses) {
  std::map<double, std::pair<std::size_t, std::size_t>> tally;  // chose test, total
  for (const auto& r : responses) {
    auto& [chosen, total] = tally[r.test()];
    chosen += r.chose_test() ? 1 : 0;
    ++total;
  }
  std::vector<PressureProportion> out;
  for (const auto& [pressure, counts] : tally) {
    out.push_back({pressure, 100.0 * static_cast<double>(counts.first) / static_cast<double>(counts.second),
                   counts.second});
  }
  return out;
}

double fit_error(std::span<const PressureProportion> data, double k, double reference) {
  double sse = 0.0;
  for (const auto& d : data) {
    const double r = d.percent - sigmoid(d.pressure, k, reference);
    sse += r * r;
  }
  return sse;
}

PsychometricFit fit_sigmoid(std::span<const PressureProportion> data, double reference) {
  std::vector<double> pressures;
  for (const auto& d : data) pressures.push_back(d.pressure);
  std::sort(pressures.begin(), pressures.end());
  if (std::unique(pressures.begin(), pressures.end()) - pressures.begin() < 2) {
    throw FitDegenerate("need responses at two or more distinct pressures");
  }
  const bool flat = std::all_of(data.begin(), data.end(), [&](const PressureProportion& d) {
    return d.percent == data.front().percent;
  });
  if (flat) throw FitDegenerate("all proportions are equal; the slope is undetermined");

  // Coarse scan guards against local minima, Brent polishes the bracket.
  constexpr int kCoarse = 1000;
  const double step = (kMaxSteepness - kMinSteepness) / kCoarse;
  double best_k = kMinSteepness;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= kCoarse; ++i) {
    const double k = kMinSteepness + step * i;
    const double e = fit_error(data, k, reference);
    if (e < best) {
      best = e;
      best_k = k;
    }
  }
  const double lo = std::max(kMinSteepness, best_k - step);
  const double hi = std::min(kMaxSteepness, best_k + step);
  const auto [k, sse] = boost::math::tools::brent_find_minima(
      [&](double kk) { return fit_error(data, kk, reference); }, lo, hi,
      std::numeric_limits<double>::digits / 2);

  PsychometricFit fit;
  fit.k = sse <= best ? k : best_k;
  fit.reference = reference;
  fit.jnd = jnd(fit.k);
  fit.weber = weber(fit.jnd, reference);
  fit.sse = std::min(sse, best);
  fit.proportions.assign(data.begin(), data.end());
  return fit;
}

PsychometricFit fit_sigmoid(std::span<const PairResponse> responses, double reference) {
  const auto data = proportions(responses);
  return fit_sigmoid(std::span<const PressureProportion>(data), reference);
}

Bias bias(std::span<const PairResponse> responses) {
  Bias b;
  std::size_t first = 0;
  for (const auto& r : responses) {
    if (!r.identical()) continue;
    ++b.count;
    if (r.answer == 1) ++first;
  }
  if (b.count == 0) throw InvalidInput("no identical pairs to measure bias on");
  b.first_pct = 100.0 * static_cast<double>(first) / static_cast<double>(b.count);
  b.second_pct = 100.0 - b.first_pct;
  return b;
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("cannot summarize an empty set");
  Summary s;
  s.count = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.count);
  if (s.count > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.count - 1));
  }
  return s;
}

namespace {

template <typename Key>
std::map<Key, Summary> summarize_groups(const std::map<Key, std::vector<double>>& groups) {
  std::map<Key, Summary> out;
  for (const auto& [key, values] : groups) out[key] = summarize(values);
  return out;
}

}  // namespace

PairTimeSummary time_summary(std::span<const PairResponse> responses) {
  std::vector<double> all;
  std::map<bool, std::vector<double>> by_correct;
  std::map<double, std::vector<double>> by_pressure;
  std::map<int, std::vector<double>> by_slot;
  for (const auto& r : responses) {
    all.push_back(r.rt);
    if (r.correct) by_correct[*r.correct].push_back(r.rt);
    by_pressure[r.test()].push_back(r.rt);
    if (r.slot_times) {
      by_slot[1].push_back((*r.slot_times)[0]);
      by_slot[2].push_back((*r.slot_times)[1]);
    }
  }
  return {summarize(all), summarize_groups(by_correct), summarize_groups(by_pressure),
          summarize_groups(by_slot)};
}

TripletTimeSummary time_summary(std::span<const TripletResponse> responses) {
  std::vector<double> all;
  std::map<bool, std::vector<double>> by_correct;
  std::map<Channel, std::vector<double>> by_channel;
  std::map<Method, std::vector<double>> by_method;
  for (const auto& r : responses) {
    all.push_back(r.rt);
    by_correct[r.correct].push_back(r.rt);
    by_channel[r.target()].push_back(r.rt);
    by_method[r.method].push_back(r.rt);
  }
  return {summarize(all), summarize_groups(by_correct), summarize_groups(by_channel),
          summarize_groups(by_method)};
}

ConfusionMatrix confusion_matrix(std::span<const TripletResponse> responses) {
  ConfusionMatrix m;
  std::size_t hits = 0;
  for (const auto& r : responses) {
    const auto t = static_cast<std::size_t>(r.target());
    const auto a = static_cast<std::size_t>(r.answer);
    ++m.counts[t][a];
    ++m.total;
    if (t == a) ++hits;
  }
  for (std::size_t t = 0; t < 3; ++t) {
    std::size_t row = 0;
    for (auto c : m.counts[t]) row += c;
    if (row > 0) {
      m.accuracy[t] = 100.0 * static_cast<double>(m.counts[t][t]) / static_cast<double>(row);
    }
  }
  m.overall = m.total ? 100.0 * static_cast<double>(hits) / static_cast<double>(m.total) : 0.0;
  return m;
}

}  // namespace wrapsim::psychophysics
