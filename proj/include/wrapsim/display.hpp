#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "wrapsim/pneumatics.hpp"

namespace wrapsim::display {

/// Mounting positions along the arm.
enum class Location { Base, Middle, EndEffector };

std::string_view to_string(Location location);
Location location_from_string(std::string_view id);

enum class LayoutMode { Local, Global };

std::string_view to_string(LayoutMode mode);

/// Physical dimensions of a wrapped display group. Metadata only: nothing
/// here feeds the pressure dynamics.
struct DisplayGeometry {
  double cell_size_cm = 2.54;
  double arm_radius_cm = 0.0;
  double length_cm = 0.0;
  int rings_per_group = 1;
  double ring_separation_cm = 0.0;
  double max_contraction = 0.10;  ///< mounting contraction limit (fraction)

  double circumference_cm() const;

  /// Three 10.16 cm pouches side by side around a 40.64 cm UR-10 link.
  static DisplayGeometry sleeve();
  /// Three 2.54 cm rings, 1.9 cm apart, around a link of the given radius.
  static DisplayGeometry ring_group(double arm_radius_cm);

  void validate() const;
};

/// Placement of K feedback channels on the arm.
///
/// Local: location i hosts channel i on all of its rings.
/// Global: every location hosts all K channels, one per ring, in channel order.
struct Layout {
  LayoutMode mode = LayoutMode::Global;
  std::vector<Location> locations;
  /// Per location (same order as `locations`): channel id driving each ring.
  std::vector<std::vector<std::size_t>> channel_map;
  std::size_t channel_count = 0;

  static Layout local(std::size_t channels = 3, std::size_t rings_per_location = 3);
  static Layout global(std::size_t channels = 3, std::size_t location_count = 3);

  std::size_t rings_at(std::size_t location_index) const {
    return channel_map.at(location_index).size();
  }

  void validate() const;
};

struct LocationPressures {
  Location location = Location::Base;
  std::vector<double> pressures;  ///< one target per ring, psi

  friend bool operator==(const LocationPressures&, const LocationPressures&) = default;
};

/// Target pressures for every ring on the arm at one instant. GUI sessions
/// carry the uncertainty as percentages instead of pressures.
struct RenderFrame {
  double time = 0.0;
  std::vector<LocationPressures> locations;
  std::optional<std::vector<double>> percent;

  friend bool operator==(const RenderFrame&, const RenderFrame&) = default;
};

void to_json(nlohmann::json& j, const RenderFrame& frame);
void from_json(const nlohmann::json& j, RenderFrame& frame);

inline constexpr double kMinRenderPressure = 1.0;  ///< psi at zero uncertainty
inline constexpr double kMaxRenderPressure = 3.0;  ///< psi at full uncertainty

/// Affine uncertainty-to-pressure map, 0 -> 1 psi and 1 -> 3 psi. Inputs
/// outside [0, 1] are clamped; NaN is rejected.
double map_uncertainty(double uncertainty);

RenderFrame render(const Layout& layout, std::span<const double> channel_uncertainties,
                   double time = 0.0);

/// GUI frame: uncertainty percentages, no pressures.
RenderFrame render_percent(std::span<const double> channel_uncertainties, double time = 0.0);

/// Pressure of each channel as rendered in `frame` (first ring carrying it).
std::vector<double> channel_pressures(const Layout& layout, const RenderFrame& frame);

struct ChannelAddress {
  Location location;
  std::size_t ring;

  auto operator<=>(const ChannelAddress&) const = default;
};

/// The pneumatic channels behind a layout: one plant channel per
/// (location, ring) pair.
class DisplayPlant {
 public:
  DisplayPlant(const Layout& layout, pneumatics::ChannelSpec spec,
               pneumatics::PlantConfig config = {}, double initial_pressure = 0.0);
  DisplayPlant(std::span<const ChannelAddress> addresses, pneumatics::ChannelSpec spec,
               pneumatics::PlantConfig config = {}, double initial_pressure = 0.0);

  /// Sets the commanded pressure of every ring named in the frame (clamped to
  /// the channel's max pressure). Throws ConfigurationError if the frame
  /// addresses a ring this plant does not have; no command is changed then.
  void apply_frame(const RenderFrame& frame);

  void step();
  void advance(double duration);

  double pressure(Location location, std::size_t ring) const;
  double commanded(Location location, std::size_t ring) const;
  double max_pressure() const;
  double time() const;

  /// Actual pressures in frame form, in the same order as `layout`.
  RenderFrame snapshot(const Layout& layout) const;

  std::size_t size() const { return channels_.size(); }

 private:
  const pneumatics::PressureChannel& channel(Location location, std::size_t ring) const;

  std::map<ChannelAddress, pneumatics::PressureChannel> channels_;
  double dt_;
};

}  // namespace wrapsim::display
