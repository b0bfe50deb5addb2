#pragma once

// Reference frames: ECI, ECEF (GMST spin model), LVLH and WGS84 geodetic
// coordinates, plus the relative state of a spacecraft about its guidance point.

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "constants.hpp"
#include "error.hpp"

namespace dragdeorbit {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/// Position/velocity of a point mass, ECI, with elapsed time since the case epoch.
struct StateECI {
  Vec3 r = Vec3::Zero();  // m
  Vec3 v = Vec3::Zero();  // m/s
  double t = 0.0;         // s since epoch
};

/// UTC instant as a Julian date.
struct Epoch {
  double jd = constants::kJ2000;

  static Epoch from_calendar(int year, int month, int day, double seconds_of_day = 0.0) {
    // Fliegel-Van Flandern day number, valid for the Gregorian calendar.
    const int a = (14 - month) / 12;
    const int y = year + 4800 - a;
    const int m = month + 12 * a - 3;
    const long jdn = day + (153 * m + 2) / 5 + 365L * y + y / 4 - y / 100 + y / 400 - 32045;
    return Epoch{static_cast<double>(jdn) - 0.5 + seconds_of_day / constants::kSecondsPerDay};
  }

  Epoch plus_seconds(double s) const { return Epoch{jd + s / constants::kSecondsPerDay}; }
};

/// Direction-cosine matrix; rows are the target-frame axes expressed in the source frame.
using Dcm = Mat3;

/// Radial/in-track relative position and velocity [m, m, m/s, m/s].
struct RelativeState {
  Vec4 x = Vec4::Zero();
};

/// Full 3-axis relative position/velocity in LVLH, including cross-track.
struct RelativeStateFull {
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();

  RelativeState in_plane() const { return RelativeState{Vec4(r.x(), r.y(), v.x(), v.y())}; }
};

struct GeodeticPoint {
  double lat = 0.0;  // rad
  double lon = 0.0;  // rad, (-pi, pi]
  double alt = 0.0;  // m above the WGS84 ellipsoid
};

inline double wrap_pi(double a) {
  a = std::remainder(a, constants::kTwoPi);
  if (a <= -constants::kPi) a += constants::kTwoPi;
  return a;
}

/// LVLH axes (radial, in-track, angular momentum) as rows, expressed in ECI.
inline Dcm lvlh_dcm(const StateECI& guidance) {
  const double rn = guidance.r.norm();
  const Vec3 h = guidance.r.cross(guidance.v);
  const double hn = h.norm();
  if (rn <= 0.0 || !(hn >= 1e-6)) {
    throw DegenerateGeometryError("lvlh_dcm: |r x v| below 1e-6 m^2/s");
  }
  const Vec3 e1 = guidance.r / rn;
  const Vec3 e3 = h / hn;
  const Vec3 e2 = e3.cross(e1);
  Dcm c;
  c.row(0) = e1.transpose();
  c.row(1) = e2.transpose();
  c.row(2) = e3.transpose();
  return c;
}

/// Angular velocity of LVLH relative to ECI, expressed in LVLH.
inline Vec3 lvlh_rate(const StateECI& guidance) {
  const double r2 = guidance.r.squaredNorm();
  return Vec3(0.0, 0.0, guidance.r.cross(guidance.v).norm() / r2);
}

/// Relative state with cross-track components (diagnostic form).
inline RelativeStateFull relative_state_full(const StateECI& spacecraft, const StateECI& guidance) {
  const Dcm c = lvlh_dcm(guidance);
  const Vec3 w = lvlh_rate(guidance);
  RelativeStateFull out;
  out.r = c * (spacecraft.r - guidance.r);
  out.v = c * (spacecraft.v - guidance.v) - w.cross(out.r);
  return out;
}

inline RelativeState relative_state(const StateECI& spacecraft, const StateECI& guidance) {
  return relative_state_full(spacecraft, guidance).in_plane();
}

/// Inverse of relative_state_full: places a spacecraft about the guidance point.
inline StateECI from_relative(const StateECI& guidance, const RelativeStateFull& rel) {
  const Dcm c = lvlh_dcm(guidance);
  const Vec3 w = lvlh_rate(guidance);
  StateECI s;
  s.t = guidance.t;
  s.r = guidance.r + c.transpose() * rel.r;
  s.v = guidance.v + c.transpose() * (rel.v + w.cross(rel.r));
  return s;
}

inline StateECI from_relative(const StateECI& guidance, const RelativeState& rel) {
  RelativeStateFull full;
  full.r = Vec3(rel.x(0), rel.x(1), 0.0);
  full.v = Vec3(rel.x(2), rel.x(3), 0.0);
  return from_relative(guidance, full);
}

/// Greenwich mean sidereal time [rad] (IAU-82 polynomial, UT1 taken as UTC).
inline double gmst(const Epoch& epoch) {
  const double t = (epoch.jd - constants::kJ2000) / 36525.0;
  double sec = 67310.54841 + (876600.0 * 3600.0 + 8640184.812866) * t + 0.093104 * t * t -
               6.2e-6 * t * t * t;
  sec = std::fmod(sec, constants::kSecondsPerDay);
  if (sec < 0) sec += constants::kSecondsPerDay;
  return sec / constants::kSecondsPerDay * constants::kTwoPi;
}

/// Earth rotation angle at t seconds after epoch: GMST(epoch) + omega_e t.
inline double earth_rotation_angle(const Epoch& epoch, double t) {
  return std::fmod(gmst(epoch) + constants::kEarthRate * t, constants::kTwoPi);
}

inline Mat3 rot3(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Mat3 m;
  m << c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0;
  return m;
}

/// ECI -> ECEF given the rotation angle directly.
inline StateECI eci_to_ecef_angle(const StateECI& state, double theta) {
  const Mat3 r3 = rot3(theta);
  const Vec3 w(0.0, 0.0, constants::kEarthRate);
  StateECI out;
  out.t = state.t;
  out.r = r3 * state.r;
  out.v = r3 * (state.v - w.cross(state.r));
  return out;
}

/// ECI -> ECEF: rotation about axis 3; velocity is atmosphere-relative (Earth-fixed).
inline StateECI eci_to_ecef(const StateECI& state, const Epoch& epoch) {
  return eci_to_ecef_angle(state, earth_rotation_angle(epoch, state.t));
}

inline Vec3 ecef_to_eci_position(const Vec3& r_ecef, const Epoch& epoch, double t) {
  return rot3(earth_rotation_angle(epoch, t)).transpose() * r_ecef;
}

/// WGS84 geodetic coordinates from an ECEF position (Bowring iteration, 10-iteration cap).
inline GeodeticPoint geodetic(const Vec3& r_ecef) {
  using namespace constants;
  const double x = r_ecef.x(), y = r_ecef.y(), z = r_ecef.z();
  if (!(r_ecef.norm() > 0.0)) throw RangeError("geodetic: zero position vector");
  GeodeticPoint g;
  const double p = std::hypot(x, y);
  g.lon = std::atan2(y, x);
  if (g.lon <= -kPi) g.lon = kPi;
  if (p < 1e-9 * kWgs84A) {
    g.lat = z >= 0 ? kPi / 2 : -kPi / 2;
    g.lon = 0.0;
    g.alt = std::abs(z) - kWgs84B;
    return g;
  }
  const double ep2 = kWgs84E2 / (1.0 - kWgs84E2);
  double beta = std::atan2(z, (1.0 - kWgs84F) * p);
  double lat = 0.0;
  double alt = 0.0;
  double prev_alt = std::numeric_limits<double>::infinity();
  double prev_lat = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 10; ++it) {
    const double sb = std::sin(beta), cb = std::cos(beta);
    lat = std::atan2(z + ep2 * kWgs84B * sb * sb * sb, p - kWgs84E2 * kWgs84A * cb * cb * cb);
    const double sl = std::sin(lat), cl = std::cos(lat);
    const double n = kWgs84A / std::sqrt(1.0 - kWgs84E2 * sl * sl);
    alt = p * cl + z * sl - kWgs84A * kWgs84A / n;
    if (std::abs(alt - prev_alt) < 1e-4 && std::abs(lat - prev_lat) * kWgs84A < 1e-4) {
      g.lat = lat;
      g.alt = alt;
      return g;
    }
    prev_alt = alt;
    prev_lat = lat;
    beta = std::atan2((1.0 - kWgs84F) * sl, cl);
  }
  throw ConvergenceError("geodetic: no convergence within 10 iterations");
}

inline Vec3 geodetic_to_ecef(const GeodeticPoint& g) {
  using namespace constants;
  const double sl = std::sin(g.lat), cl = std::cos(g.lat);
  const double n = kWgs84A / std::sqrt(1.0 - kWgs84E2 * sl * sl);
  return Vec3((n + g.alt) * cl * std::cos(g.lon), (n + g.alt) * cl * std::sin(g.lon),
              (n * (1.0 - kWgs84E2) + g.alt) * sl);
}

/// Geodetic altitude of an ECI position (rotation does not change altitude).
inline double altitude_eci(const Vec3& r_eci) {
  // Altitude is invariant under rotation about axis 3, so the ECI vector can be used directly.
  return geodetic(r_eci).alt;
}

}  // namespace dragdeorbit
