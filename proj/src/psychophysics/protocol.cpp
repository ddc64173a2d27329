#include "wrapsim/psychophysics/protocol.hpp"

#include <algorithm>
#include <cmath>

#include "wrapsim/error.hpp"
#include "wrapsim/random.hpp"

namespace wrapsim::psychophysics {

const PairTrial& PairProtocol::trial(std::size_t id) const {
  if (id >= trials.size() || trials[id].id != id) throw NotFound("no pair trial " + std::to_string(id));
  return trials[id];
}

void PairProtocol::validate() const {
  if (trials.size() != test_pressures.size() * reps) {
    throw InvalidInput("pair protocol has " + std::to_string(trials.size()) + " trials, expected " +
                       std::to_string(test_pressures.size() * reps));
  }
  for (double p : test_pressures) {
    const auto n = std::count_if(trials.begin(), trials.end(),
                                 [&](const PairTrial& t) { return t.test == p; });
    if (static_cast<std::size_t>(n) != reps) {
      throw InvalidInput("test pressure " + std::to_string(p) + " is not shown " +
                         std::to_string(reps) + " times");
    }
  }
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    if (t.id != i || (t.test_slot != 1 && t.test_slot != 2) || t.reference != reference) {
      throw InvalidInput("pair trial " + std::to_string(i) + " is malformed");
    }
  }
}

PairProtocol generate_pair_protocol(std::uint64_t seed) {
  PairProtocol p;
  p.seed = seed;
  std::vector<double> order;
  for (double test : p.test_pressures) order.insert(order.end(), p.reps, test);
  Rng order_rng(derive_seed(seed, 1));
  shuffle(std::span(order), order_rng);
  Rng slot_rng(derive_seed(seed, 2));
  for (std::size_t i = 0; i < order.size(); ++i) {
    p.trials.push_back({i, p.reference, order[i], 1 + static_cast<int>(uniform_index(slot_rng, 2))});
  }
  return p;
}

std::string_view to_string(Channel channel) {
  switch (channel) {
    case Channel::Left:
      return "left";
    case Channel::Center:
      return "center";
    case Channel::Right:
      return "right";
  }
  return "?";
}

Channel channel_from_string(std::string_view text) {
  for (Channel c : kChannels) {
    if (to_string(c) == text) return c;
  }
  throw InvalidInput("unknown channel '" + std::string(text) + "'");
}

std::string_view to_string(Method method) {
  return method == Method::Local ? "local" : "global";
}

Method method_from_string(std::string_view text) {
  if (text == "local") return Method::Local;
  if (text == "global") return Method::Global;
  throw InvalidInput("unknown method '" + std::string(text) + "'");
}

std::string_view to_string(MethodOrder order) {
  return order == MethodOrder::LocalFirst ? "local_first" : "global_first";
}

MethodOrder method_order_from_string(std::string_view text) {
  if (text == "local_first") return MethodOrder::LocalFirst;
  if (text == "global_first") return MethodOrder::GlobalFirst;
  throw InvalidInput("unknown method order '" + std::string(text) + "'");
}

const TripletTrial& TripletProtocol::trial(std::size_t id) const {
  if (id >= trials.size() || trials[id].id != id) {
    throw NotFound("no triplet trial " + std::to_string(id));
  }
  return trials[id];
}

void TripletProtocol::validate() const {
  if (!(high > reference)) throw InvalidInput("P_H must exceed P_o");
  if (trials.size() != 2 * trials_per_method()) {
    throw InvalidInput("triplet protocol has " + std::to_string(trials.size()) + " trials");
  }
  for (Method m : {Method::Local, Method::Global}) {
    for (Channel c : kChannels) {
      const auto n = std::count_if(trials.begin(), trials.end(), [&](const TripletTrial& t) {
        return t.method == m && t.target == c;
      });
      if (static_cast<std::size_t>(n) != reps_per_channel) {
        throw InvalidInput("channel " + std::string(to_string(c)) + " is not the target " +
                           std::to_string(reps_per_channel) + " times");
      }
    }
  }
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    for (std::size_t c = 0; c < 3; ++c) {
      const double want = c == static_cast<std::size_t>(t.target) ? high : reference;
      if (t.id != i || t.pressures[c] != want) {
        throw InvalidInput("triplet trial " + std::to_string(i) + " is malformed");
      }
    }
  }
}

TripletProtocol generate_triplet_protocol(std::uint64_t seed, MethodOrder order) {
  TripletProtocol p;
  p.seed = seed;
  p.order = order;
  const std::array<Method, 2> methods =
      order == MethodOrder::LocalFirst ? std::array{Method::Local, Method::Global}
                                       : std::array{Method::Global, Method::Local};
  for (std::size_t m = 0; m < 2; ++m) {
    std::vector<Channel> targets;
    for (Channel c : kChannels) targets.insert(targets.end(), p.reps_per_channel, c);
    Rng rng(derive_seed(seed, 10 + static_cast<std::uint64_t>(methods[m])));
    shuffle(std::span(targets), rng);
    for (Channel c : targets) {
      TripletTrial t{p.trials.size(), methods[m], c, {p.reference, p.reference, p.reference}};
      t.pressures[static_cast<std::size_t>(c)] = p.high;
      p.trials.push_back(t);
    }
  }
  return p;
}

void to_json(nlohmann::json& j, const PairProtocol& p) {
  auto trials = nlohmann::json::array();
  for (const auto& t : p.trials) {
    trials.push_back({{"id", t.id}, {"test", t.test}, {"test_slot", t.test_slot}});
  }
  j = {{"kind", "pair"},      {"version", 1},          {"seed", p.seed},
       {"reference", p.reference}, {"test_pressures", p.test_pressures}, {"reps", p.reps},
       {"trials", trials}};
}

void from_json(const nlohmann::json& j, PairProtocol& p) {
  if (j.value("kind", "") != "pair") throw InvalidInput("not a pair protocol");
  p = PairProtocol{};
  p.seed = j.at("seed").get<std::uint64_t>();
  p.reference = j.at("reference").get<double>();
  p.test_pressures = j.at("test_pressures").get<std::vector<double>>();
  p.reps = j.at("reps").get<std::size_t>();
  for (const auto& t : j.at("trials")) {
    p.trials.push_back({t.at("id").get<std::size_t>(), p.reference, t.at("test").get<double>(),
                        t.at("test_slot").get<int>()});
  }
  p.validate();
}

void to_json(nlohmann::json& j, const TripletProtocol& p) {
  auto trials = nlohmann::json::array();
  for (const auto& t : p.trials) {
    trials.push_back({{"id", t.id},
                      {"method", to_string(t.method)},
                      {"target", to_string(t.target)},
                      {"pressures", t.pressures}});
  }
  j = {{"kind", "triplet"},
       {"version", 1},
       {"seed", p.seed},
       {"reference", p.reference},
       {"high", p.high},
       {"reps_per_channel", p.reps_per_channel},
       {"order", to_string(p.order)},
       {"trials", trials}};
}

void from_json(const nlohmann::json& j, TripletProtocol& p) {
  if (j.value("kind", "") != "triplet") throw InvalidInput("not a triplet protocol");
  p = TripletProtocol{};
  p.seed = j.at("seed").get<std::uint64_t>();
  p.reference = j.at("reference").get<double>();
  p.high = j.at("high").get<double>();
  p.reps_per_channel = j.at("reps_per_channel").get<std::size_t>();
  p.order = method_order_from_string(j.at("order").get<std::string>());
  for (const auto& t : j.at("trials")) {
    p.trials.push_back({t.at("id").get<std::size_t>(),
                        method_from_string(t.at("method").get<std::string>()),
                        channel_from_string(t.at("target").get<std::string>()),
                        t.at("pressures").get<std::array<double, 3>>()});
  }
  p.validate();
}

std::string serialize(const PairProtocol& p) { return nlohmann::json(p).dump() + "\n"; }
std::string serialize(const TripletProtocol& p) { return nlohmann::json(p).dump() + "\n"; }

}  // namespace wrapsim::psychophysics
