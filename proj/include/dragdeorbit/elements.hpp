#pragma once

// Classical orbital elements and in-plane angles used by guidance and case sampling.

#include <algorithm>
#include <cmath>

#include "constants.hpp"
#include "frames.hpp"

namespace dragdeorbit {

struct OrbitalElements {
  double a = 0.0;     // semi-major axis [m]
  double e = 0.0;     // eccentricity
  double i = 0.0;     // inclination [rad]
  double raan = 0.0;  // right ascension of the ascending node [rad]
  double argp = 0.0;  // argument of perigee [rad]
  double nu = 0.0;    // true anomaly [rad]
};

inline StateECI elements_to_state(const OrbitalElements& el, double mu = constants::kMu) {
  const double p = el.a * (1.0 - el.e * el.e);
  const double r = p / (1.0 + el.e * std::cos(el.nu));
  const Vec3 r_pqw(r * std::cos(el.nu), r * std::sin(el.nu), 0.0);
  const double k = std::sqrt(mu / p);
  const Vec3 v_pqw(-k * std::sin(el.nu), k * (el.e + std::cos(el.nu)), 0.0);
  const Mat3 q = (Eigen::AngleAxisd(el.raan, Vec3::UnitZ()) *
                  Eigen::AngleAxisd(el.i, Vec3::UnitX()) *
                  Eigen::AngleAxisd(el.argp, Vec3::UnitZ()))
                     .toRotationMatrix();
  StateECI s;
  s.r = q * r_pqw;
  s.v = q * v_pqw;
  return s;
}

/// Unit vector toward the ascending node; falls back to ECI x for equatorial orbits.
inline Vec3 node_direction(const Vec3& h) {
  Vec3 n(-h.y(), h.x(), 0.0);
  const double nn = n.norm();
  if (nn < 1e-12 * h.norm()) return Vec3::UnitX();
  return n / nn;
}

/// Argument of latitude: in-plane angle from the osculating ascending node to r, in [0, 2pi).
inline double argument_of_latitude(const StateECI& s) {
  const Vec3 h = s.r.cross(s.v);
  const Vec3 hn = h.normalized();
  const Vec3 n = node_direction(h);
  double u = std::atan2(n.cross(s.r).dot(hn), n.dot(s.r));
  if (u < 0) u += constants::kTwoPi;
  return u;
}

inline OrbitalElements state_to_elements(const StateECI& s, double mu = constants::kMu) {
  OrbitalElements el;
  const double r = s.r.norm();
  const double v2 = s.v.squaredNorm();
  el.a = 1.0 / (2.0 / r - v2 / mu);
  const Vec3 h = s.r.cross(s.v);
  const Vec3 evec = ((v2 - mu / r) * s.r - s.r.dot(s.v) * s.v) / mu;
  el.e = evec.norm();
  el.i = std::acos(std::clamp(h.z() / h.norm(), -1.0, 1.0));
  const Vec3 n = node_direction(h);
  el.raan = std::atan2(n.y(), n.x());
  if (el.raan < 0) el.raan += constants::kTwoPi;
  const double u = argument_of_latitude(s);
  const Vec3 hn = h.normalized();
  double argp = 0.0;
  if (el.e > 1e-12) {
    argp = std::atan2(n.cross(evec).dot(hn), n.dot(evec));
    if (argp < 0) argp += constants::kTwoPi;
  }
  el.argp = argp;
  el.nu = std::fmod(u - argp + 2 * constants::kTwoPi, constants::kTwoPi);
  return el;
}

/// Secular J2 nodal regression rate for the given elements.
inline double j2_raan_rate(double a, double e, double i, double j2 = constants::kJ2,
                           double re = constants::kReGravity, double mu = constants::kMu) {
  const double n = std::sqrt(mu / (a * a * a));
  const double p = a * (1.0 - e * e);
  return -1.5 * n * j2 * (re / p) * (re / p) * std::cos(i);
}

}  // namespace dragdeorbit
