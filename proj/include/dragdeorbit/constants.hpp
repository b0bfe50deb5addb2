#pragma once

#include <numbers>

namespace dragdeorbit::constants {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Earth gravity (EGM-96 zonal values, unnormalized).
inline constexpr double kMu = 3.986004418e14;   // m^3/s^2
inline constexpr double kReGravity = 6378137.0;  // m
inline constexpr double kJ2 = 1.08262668e-3;
inline constexpr double kJ3 = -2.53265649e-6;
inline constexpr double kJ4 = -1.61962159e-6;

// WGS84 ellipsoid.
inline constexpr double kWgs84A = 6378137.0;
inline constexpr double kWgs84F = 1.0 / 298.257223563;
inline constexpr double kWgs84B = kWgs84A * (1.0 - kWgs84F);
inline constexpr double kWgs84E2 = kWgs84F * (2.0 - kWgs84F);

inline constexpr double kEarthRate = 7.292115e-5;  // rad/s

inline constexpr double kSecondsPerDay = 86400.0;
inline constexpr double kJ2000 = 2451545.0;  // JD of J2000.0

}  // namespace dragdeorbit::constants
