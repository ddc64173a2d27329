#include "wrapsim/display.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include "wrapsim/error.hpp"

namespace wrapsim::display {

namespace {

constexpr std::array<Location, 3> kArmOrder = {Location::Base, Location::Middle,
                                               Location::EndEffector};

}  // namespace

std::string_view to_string(Location location) {
  switch (location) {
    case Location::Base:
      return "base";
    case Location::Middle:
      return "middle";
    case Location::EndEffector:
      return "end_effector";
  }
  return "?";
}

Location location_from_string(std::string_view id) {
  for (Location l : kArmOrder) {
    if (to_string(l) == id) return l;
  }
  throw InvalidInput("unknown display location '" + std::string(id) + "'");
}

std::string_view to_string(LayoutMode mode) {
  return mode == LayoutMode::Local ? "local" : "global";
}

double DisplayGeometry::circumference_cm() const {
  return 2.0 * std::numbers::pi * arm_radius_cm;
}

DisplayGeometry DisplayGeometry::sleeve() {
  DisplayGeometry g;
  g.arm_radius_cm = 3.0 * 10.16 / (2.0 * std::numbers::pi);
  g.length_cm = 40.64;
  g.rings_per_group = 1;
  return g;
}

DisplayGeometry DisplayGeometry::ring_group(double arm_radius_cm) {
  DisplayGeometry g;
  g.arm_radius_cm = arm_radius_cm;
  g.rings_per_group = 3;
  g.ring_separation_cm = 1.9;
  g.length_cm = 3 * g.cell_size_cm + 2 * g.ring_separation_cm;
  return g;
}

void DisplayGeometry::validate() const {
  if (!(cell_size_cm > 0.0)) throw InvalidParameter("cell_size must be positive");
  if (!(arm_radius_cm > 0.0)) throw InvalidParameter("arm radius must be positive");
  if (!(length_cm > 0.0)) throw InvalidParameter("display length must be positive");
  if (rings_per_group < 1) throw InvalidParameter("rings_per_group must be >= 1");
  if (!(max_contraction >= 0.0 && max_contraction < 1.0)) {
    throw InvalidParameter("max_contraction must lie in [0, 1)");
  }
}

Layout Layout::local(std::size_t channels, std::size_t rings_per_location) {
  if (channels == 0 || channels > kArmOrder.size()) {
    throw InvalidParameter("local layout supports 1-3 channels");
  }
  if (rings_per_location == 0) throw InvalidParameter("rings_per_location must be >= 1");
  Layout layout;
  layout.mode = LayoutMode::Local;
  layout.channel_count = channels;
  for (std::size_t c = 0; c < channels; ++c) {
    layout.locations.push_back(kArmOrder[c]);
    layout.channel_map.emplace_back(rings_per_location, c);
  }
  return layout;
}

Layout Layout::global(std::size_t channels, std::size_t location_count) {
  if (channels == 0) throw InvalidParameter("global layout needs at least one channel");
  if (location_count == 0 || location_count > kArmOrder.size()) {
    throw InvalidParameter("global layout supports 1-3 locations");
  }
  Layout layout;
  layout.mode = LayoutMode::Global;
  layout.channel_count = channels;
  std::vector<std::size_t> rings(channels);
  for (std::size_t c = 0; c < channels; ++c) rings[c] = c;
  for (std::size_t i = 0; i < location_count; ++i) {
    layout.locations.push_back(kArmOrder[i]);
    layout.channel_map.push_back(rings);
  }
  return layout;
}

void Layout::validate() const {
  if (locations.empty()) throw ConfigurationError("layout has no locations");
  if (channel_map.size() != locations.size()) {
    throw ConfigurationError("channel_map must have one entry per location");
  }
  if (std::set<Location>(locations.begin(), locations.end()).size() != locations.size()) {
    throw ConfigurationError("layout locations must be distinct");
  }
  std::set<std::size_t> seen;
  for (const auto& rings : channel_map) {
    if (rings.empty()) throw ConfigurationError("location without rings");
    for (std::size_t c : rings) {
      if (c >= channel_count) throw ConfigurationError("channel id out of range");
      seen.insert(c);
    }
    if (mode == LayoutMode::Local &&
        std::any_of(rings.begin(), rings.end(), [&](std::size_t c) { return c != rings[0]; })) {
      throw ConfigurationError("local layout: a location carries exactly one channel");
    }
    if (mode == LayoutMode::Global) {
      if (rings.size() != channel_count) {
        throw ConfigurationError("global layout: every location carries all channels");
      }
      for (std::size_t r = 0; r < rings.size(); ++r) {
        if (rings[r] != r) throw ConfigurationError("global layout: channels out of order");
      }
    }
  }
  if (seen.size() != channel_count) throw ConfigurationError("layout leaves a channel unplaced");
}

void to_json(nlohmann::json& j, const RenderFrame& frame) {
  j = nlohmann::json::object();
  j["t"] = frame.time;
  auto locations = nlohmann::json::array();
  for (const auto& loc : frame.locations) {
    locations.push_back({{"id", std::string(to_string(loc.location))}, {"pressures", loc.pressures}});
  }
  j["locations"] = std::move(locations);
  if (frame.percent) j["percent"] = *frame.percent;
}

void from_json(const nlohmann::json& j, RenderFrame& frame) {
  frame = {};
  frame.time = j.at("t").get<double>();
  for (const auto& loc : j.at("locations")) {
    frame.locations.push_back({location_from_string(loc.at("id").get<std::string>()),
                               loc.at("pressures").get<std::vector<double>>()});
  }
  if (j.contains("percent")) frame.percent = j.at("percent").get<std::vector<double>>();
}

double map_uncertainty(double uncertainty) {
  if (std::isnan(uncertainty)) throw InvalidParameter("uncertainty is NaN");
  const double u = std::clamp(uncertainty, 0.0, 1.0);
  return kMinRenderPressure + (kMaxRenderPressure - kMinRenderPressure) * u;
}

RenderFrame render(const Layout& layout, std::span<const double> channel_uncertainties,
                   double time) {
  if (channel_uncertainties.size() != layout.channel_count) {
    throw InvalidParameter("expected " + std::to_string(layout.channel_count) +
                           " channel uncertainties, got " +
                           std::to_string(channel_uncertainties.size()));
  }
  std::vector<double> channel_psi(channel_uncertainties.size());
  std::transform(channel_uncertainties.begin(), channel_uncertainties.end(), channel_psi.begin(),
                 map_uncertainty);

  RenderFrame frame;
  frame.time = time;
  for (std::size_t i = 0; i < layout.locations.size(); ++i) {
    LocationPressures loc{layout.locations[i], {}};
    for (std::size_t c : layout.channel_map[i]) loc.pressures.push_back(channel_psi.at(c));
    frame.locations.push_back(std::move(loc));
  }
  return frame;
}

RenderFrame render_percent(std::span<const double> channel_uncertainties, double time) {
  RenderFrame frame;
  frame.time = time;
  std::vector<double> percent;
  for (double u : channel_uncertainties) {
    if (std::isnan(u)) throw InvalidParameter("uncertainty is NaN");
    percent.push_back(100.0 * std::clamp(u, 0.0, 1.0));
  }
  frame.percent = std::move(percent);
  return frame;
}

std::vector<double> channel_pressures(const Layout& layout, const RenderFrame& frame) {
  std::vector<double> out(layout.channel_count, kMinRenderPressure);
  std::vector<bool> found(layout.channel_count, false);
  for (std::size_t i = 0; i < layout.locations.size(); ++i) {
    const auto it = std::find_if(frame.locations.begin(), frame.locations.end(),
                                 [&](const auto& l) { return l.location == layout.locations[i]; });
    if (it == frame.locations.end()) continue;
    for (std::size_t r = 0; r < layout.channel_map[i].size() && r < it->pressures.size(); ++r) {
      const std::size_t c = layout.channel_map[i][r];
      if (!found[c]) {
        out[c] = it->pressures[r];
        found[c] = true;
      }
    }
  }
  if (std::find(found.begin(), found.end(), false) != found.end()) {
    throw ConfigurationError("frame does not cover every layout channel");
  }
  return out;
}

DisplayPlant::DisplayPlant(const Layout& layout, pneumatics::ChannelSpec spec,
                           pneumatics::PlantConfig config, double initial_pressure)
    : dt_(config.dt) {
  layout.validate();
  std::uint64_t salt = 0;
  for (std::size_t i = 0; i < layout.locations.size(); ++i) {
    for (std::size_t r = 0; r < layout.channel_map[i].size(); ++r) {
      pneumatics::PlantConfig channel_config = config;
      channel_config.seed = derive_seed(config.seed, salt++);
      channels_.emplace(ChannelAddress{layout.locations[i], r},
                        pneumatics::PressureChannel(spec, channel_config, initial_pressure));
    }
  }
}

DisplayPlant::DisplayPlant(std::span<const ChannelAddress> addresses,
                           pneumatics::ChannelSpec spec, pneumatics::PlantConfig config,
                           double initial_pressure)
    : dt_(config.dt) {
  std::uint64_t salt = 0;
  for (const auto& address : addresses) {
    pneumatics::PlantConfig channel_config = config;
    channel_config.seed = derive_seed(config.seed, salt++);
    channels_.emplace(address, pneumatics::PressureChannel(spec, channel_config, initial_pressure));
  }
}

void DisplayPlant::apply_frame(const RenderFrame& frame) {
  for (const auto& loc : frame.locations) {
    for (std::size_t r = 0; r < loc.pressures.size(); ++r) {
      if (!channels_.contains({loc.location, r})) {
        throw ConfigurationError("no plant channel for " + std::string(to_string(loc.location)) +
                                 " ring " + std::to_string(r));
      }
    }
  }
  for (const auto& loc : frame.locations) {
    for (std::size_t r = 0; r < loc.pressures.size(); ++r) {
      channels_.at({loc.location, r}).command(loc.pressures[r]);
    }
  }
}

void DisplayPlant::step() {
  for (auto& [address, channel] : channels_) channel.step();
}

void DisplayPlant::advance(double duration) {
  const auto steps = static_cast<long>(std::llround(duration / dt_));
  for (long n = 0; n < steps; ++n) step();
}

const pneumatics::PressureChannel& DisplayPlant::channel(Location location,
                                                         std::size_t ring) const {
  const auto it = channels_.find({location, ring});
  if (it == channels_.end()) {
    throw ConfigurationError("no plant channel for " + std::string(to_string(location)) +
                             " ring " + std::to_string(ring));
  }
  return it->second;
}

double DisplayPlant::pressure(Location location, std::size_t ring) const {
  return channel(location, ring).pressure();
}

double DisplayPlant::commanded(Location location, std::size_t ring) const {
  return channel(location, ring).commanded();
}

double DisplayPlant::max_pressure() const {
  double m = 0.0;
  for (const auto& [address, channel] : channels_) m = std::max(m, channel.spec().max_pressure);
  return m;
}

double DisplayPlant::time() const {
  return channels_.empty() ? 0.0 : channels_.begin()->second.time();
}

RenderFrame DisplayPlant::snapshot(const Layout& layout) const {
  RenderFrame frame;
  frame.time = time();
  for (std::size_t i = 0; i < layout.locations.size(); ++i) {
    LocationPressures loc{layout.locations[i], {}};
    for (std::size_t r = 0; r < layout.channel_map[i].size(); ++r) {
      loc.pressures.push_back(pressure(layout.locations[i], r));
    }
    frame.locations.push_back(std::move(loc));
  }
  return frame;
}

}  // namespace wrapsim::display
