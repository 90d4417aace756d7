#include "delight/solar.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "delight/error.hpp"

namespace delight {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double wrap360(double deg) {
  deg = std::fmod(deg, 360.0);
  return deg < 0.0 ? deg + 360.0 : deg;
}

}  // namespace

SunDirection SunDirection::from_angles(double azimuth_deg, double elevation_deg) {
  SunDirection dir;
  dir.azimuth_deg = wrap360(azimuth_deg);
  dir.elevation_deg = elevation_deg;
  const double az = azimuth_deg * kDeg;
  const double el = elevation_deg * kDeg;
  dir.vector = Vec3(std::cos(el) * std::sin(az), std::cos(el) * std::cos(az), std::sin(el));
  dir.vector.normalize();
  return dir;
}

SunDirection sun_direction(double latitude_deg, double longitude_deg, const UtcTime& utc) {
  if (utc.year < 1900 || utc.year > 2100) {
    throw InvalidArgument("sun_direction: timestamp outside supported years 1900-2100");
  }
  const double jd = utc.julian_day();
  const double days = jd - 2451545.0;
  const double t = days / 36525.0;  // Julian centuries since J2000.0

  const double mean_longitude = wrap360(280.46646 + t * (36000.76983 + 0.0003032 * t));
  const double mean_anomaly = 357.52911 + t * (35999.05029 - 0.0001537 * t);
  const double m = mean_anomaly * kDeg;
  const double center = std::sin(m) * (1.914602 - t * (0.004817 + 0.000014 * t)) +
                        std::sin(2 * m) * (0.019993 - 0.000101 * t) +
                        std::sin(3 * m) * 0.000289;
  const double true_longitude = mean_longitude + center;
  const double omega = (125.04 - 1934.136 * t) * kDeg;
  const double apparent_longitude = (true_longitude - 0.00569 - 0.00478 * std::sin(omega)) * kDeg;

  const double mean_obliquity =
      23.0 + (26.0 + (21.448 - t * (46.815 + t * (0.00059 - t * 0.001813))) / 60.0) / 60.0;
  const double obliquity = (mean_obliquity + 0.00256 * std::cos(omega)) * kDeg;

  const double declination = std::asin(std::sin(obliquity) * std::sin(apparent_longitude));
  const double right_ascension = std::atan2(std::cos(obliquity) * std::sin(apparent_longitude),
                                            std::cos(apparent_longitude));

  // Greenwich apparent sidereal time, degrees.
  const double gmst = 280.46061837 + 360.98564736629 * days + 0.000387933 * t * t -
                      t * t * t / 38710000.0;
  const double nutation_longitude = -0.00478 * std::sin(omega);
  const double gast = gmst + nutation_longitude * std::cos(obliquity);

  const double hour_angle = (wrap360(gast + longitude_deg) * kDeg) - right_ascension;
  const double lat = latitude_deg * kDeg;

  const double sin_el = std::sin(lat) * std::sin(declination) +
                        std::cos(lat) * std::cos(declination) * std::cos(hour_angle);
  const double elevation = std::asin(std::clamp(sin_el, -1.0, 1.0));
  const double azimuth =
      std::atan2(-std::cos(declination) * std::sin(hour_angle),
                 std::sin(declination) * std::cos(lat) -
                     std::cos(declination) * std::sin(lat) * std::cos(hour_angle));
  return SunDirection::from_angles(azimuth / kDeg, elevation / kDeg);
}

SunDirection sun_direction(const CaptureMeta& meta) {
  meta.validate();
  return sun_direction(meta.latitude, meta.longitude, meta.timestamp_utc);
}

bool sun_below_horizon(const SunDirection& dir) { return dir.elevation_deg <= 0.0; }

LightingFrame lighting_frame(const CaptureMeta& meta, const SunDirection& sun) {
  LightingFrame frame;
  frame.sun = meta.to_world(sun.vector).normalized();
  frame.zenith = meta.to_world(Vec3::UnitZ()).normalized();
  return frame;
}

}  // namespace delight
