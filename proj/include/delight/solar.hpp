#pragma once

#include "delight/scene.hpp"

namespace delight {

/// Local sun direction in the East-North-Up frame.
struct SunDirection {
  Vec3 vector = Vec3::UnitZ();  // unit, pointing from the ground toward the sun
  double azimuth_deg = 0.0;     // clockwise from North
  double elevation_deg = 90.0;  // above the horizon

  /// Builds a consistent direction from azimuth and elevation.
  static SunDirection from_angles(double azimuth_deg, double elevation_deg);
};

/// Solar position from geotag and UTC time using the low-precision Meeus
/// series (apparent longitude, obliquity, sidereal time). No refraction.
/// Throws InvalidArgument outside years 1900..2100.
SunDirection sun_direction(double latitude_deg, double longitude_deg, const UtcTime& utc);
SunDirection sun_direction(const CaptureMeta& meta);

/// True when the sun is at or below the horizon (elevation <= 0).
bool sun_below_horizon(const SunDirection& dir);

/// Sun and zenith directions expressed in the project's world frame.
struct LightingFrame {
  Vec3 sun = Vec3::UnitZ();
  Vec3 zenith = Vec3::UnitZ();
};
LightingFrame lighting_frame(const CaptureMeta& meta, const SunDirection& sun);

}  // namespace delight
