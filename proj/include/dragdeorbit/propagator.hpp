#pragma once

// Adaptive Dormand-Prince 5(4) propagation of a point mass under gravity and
// drag, piecewise-constant ballistic coefficient, altitude events, and dense
// (quintic Hermite) trajectory output.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "elements.hpp"
#include "environment.hpp"
#include "error.hpp"
#include "frames.hpp"

namespace dragdeorbit {

/// Piecewise-constant Cb(t): value of segment k applies on (t_k, t_{k+1}].
class CbProfile {
 public:
  struct Segment {
    double t_start;
    double cb;
  };

  CbProfile() = default;
  explicit CbProfile(double cb) : segments_{{-1e300, cb}} {}
  CbProfile(std::vector<Segment> segs) : segments_(std::move(segs)) {
    std::sort(segments_.begin(), segments_.end(),
              [](const Segment& a, const Segment& b) { return a.t_start < b.t_start; });
  }

  /// Guidance profile: cb1 on [0, t_swap], cb2 afterwards.
  static CbProfile swap(double cb1, double cb2, double t_swap) {
    return CbProfile({{-1e300, cb1}, {t_swap, cb2}});
  }

  /// Value on the open interval following t (so a breakpoint belongs to the earlier segment).
  double value_after(double t) const {
    double cb = segments_.front().cb;
    for (const auto& s : segments_) {
      if (s.t_start <= t) cb = s.cb;
    }
    return cb;
  }

  /// Breakpoints strictly inside (t0, t1).
  std::vector<double> breakpoints(double t0, double t1) const {
    std::vector<double> out;
    for (std::size_t k = 1; k < segments_.size(); ++k) {
      if (segments_[k].t_start > t0 && segments_[k].t_start < t1) out.push_back(segments_[k].t_start);
    }
    return out;
  }

  const std::vector<Segment>& segments() const { return segments_; }

 private:
  std::vector<Segment> segments_{{-1e300, 0.0}};
};

struct TrajectoryNode {
  double t = 0.0;
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a_left = Vec3::Zero();   // acceleration with the Cb of the interval ending here
  Vec3 a_right = Vec3::Zero();  // acceleration with the Cb of the interval starting here
  double cb = 0.0;              // Cb on the interval starting here
};

namespace detail {

/// Quintic Hermite interpolation of position (and its derivative) on one interval.
inline void hermite5(const TrajectoryNode& n0, const TrajectoryNode& n1, double t, Vec3& r, Vec3& v) {
  const double h = n1.t - n0.t;
  const double s = (t - n0.t) / h;
  const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
  const double h0 = 1 - 10 * s3 + 15 * s4 - 6 * s5;
  const double h1 = s - 6 * s3 + 8 * s4 - 3 * s5;
  const double h2 = 0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5;
  const double h3 = 10 * s3 - 15 * s4 + 6 * s5;
  const double h4 = -4 * s3 + 7 * s4 - 3 * s5;
  const double h5 = 0.5 * s3 - s4 + 0.5 * s5;
  const double d0 = -30 * s2 + 60 * s3 - 30 * s4;
  const double d1 = 1 - 18 * s2 + 32 * s3 - 15 * s4;
  const double d2 = s - 4.5 * s2 + 6 * s3 - 2.5 * s4;
  const double d3 = 30 * s2 - 60 * s3 + 30 * s4;
  const double d4 = -12 * s2 + 28 * s3 - 15 * s4;
  const double d5 = 1.5 * s2 - 4 * s3 + 2.5 * s4;
  const Vec3& a0 = n0.a_right;
  const Vec3& a1 = n1.a_left;
  r = h0 * n0.r + h1 * h * n0.v + h2 * h * h * a0 + h3 * n1.r + h4 * h * n1.v + h5 * h * h * a1;
  v = (d0 * n0.r + d1 * h * n0.v + d2 * h * h * a0 + d3 * n1.r + d4 * h * n1.v + d5 * h * h * a1) / h;
}

}  // namespace detail

/// Time-ordered propagation output with dense interpolation.
class Trajectory {
 public:
  std::vector<TrajectoryNode> nodes;
  bool terminated_by_event = false;

  double t0() const { return nodes.front().t; }
  double t_final() const { return nodes.back().t; }
  double duration() const { return t_final() - t0(); }

  StateECI node_state(std::size_t k) const { return StateECI{nodes[k].r, nodes[k].v, nodes[k].t}; }
  StateECI initial() const { return node_state(0); }
  StateECI final_state() const { return node_state(nodes.size() - 1); }

  /// Index k with nodes[k].t <= t < nodes[k+1].t (clamped).
  std::size_t interval(double t) const {
    auto it = std::upper_bound(nodes.begin(), nodes.end(), t,
                               [](double v, const TrajectoryNode& n) { return v < n.t; });
    std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - nodes.begin() - 1, 0));
    return std::min(k, nodes.size() - 2);
  }

  StateECI state_at(double t) const {
    if (nodes.size() == 1) return node_state(0);
    const std::size_t k = interval(t);
    StateECI s;
    s.t = t;
    detail::hermite5(nodes[k], nodes[k + 1], t, s.r, s.v);
    return s;
  }

  /// Ballistic coefficient in force just after t.
  double cb_at(double t) const { return nodes[interval(t)].cb; }
};

struct EventSpec {
  double altitude = 100e3;  // m, descending crossing
  double tolerance = 1.0;   // m
  bool required = true;     // error if t_end arrives first
};

struct IntegratorOptions {
  double rtol = 1e-9;
  double atol_pos = 1e-6;  // m
  double atol_vel = 1e-9;  // m/s
  double h_initial = 30.0;
  double h_max = 600.0;
  double h_min = 1e-6;
  bool store_nodes = true;
};

namespace detail {

using Vec6 = Eigen::Matrix<double, 6, 1>;

struct Rhs {
  const Environment& env;
  double cb;
  Vec6 operator()(double t, const Vec6& y) const {
    const StateECI s{y.head<3>(), y.tail<3>(), t};
    Vec6 d;
    d.head<3>() = s.v;
    d.tail<3>() = env.acceleration(s, cb);
    return d;
  }
};

}  // namespace detail

/// Integrates from `initial` to t_end or the descending altitude crossing.
inline Trajectory propagate(const StateECI& initial, const CbProfile& profile, const Environment& env,
                            double t_end, const std::optional<EventSpec>& event = std::nullopt,
                            const IntegratorOptions& opt = {}) {
  using detail::Vec6;
  // Dormand-Prince 5(4) tableau.
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  if (event && !(altitude_eci(initial.r) > event->altitude)) {
    throw PropagationError("propagate: initial altitude is not above the event altitude");
  }
  if (!(t_end > initial.t)) throw PropagationError("propagate: t_end must exceed the initial time");

  Trajectory traj;
  std::vector<double> stops = profile.breakpoints(initial.t, t_end);
  stops.push_back(t_end);

  Vec6 y;
  y << initial.r, initial.v;
  double t = initial.t;
  double h = opt.h_initial;
  double cb = profile.value_after(t);

  auto make_node = [&](double tn, const Vec6& yn, const Vec6& fn_left, const Vec6& fn_right, double cbn) {
    TrajectoryNode n;
    n.t = tn;
    n.r = yn.head<3>();
    n.v = yn.tail<3>();
    n.a_left = fn_left.tail<3>();
    n.a_right = fn_right.tail<3>();
    n.cb = cbn;
    return n;
  };

  detail::Rhs f{env, cb};
  Vec6 k1 = f(t, y);
  traj.nodes.push_back(make_node(t, y, k1, k1, cb));

  const Vec6 sc_abs = (Vec6() << Vec3::Constant(opt.atol_pos), Vec3::Constant(opt.atol_vel)).finished();
  double err_old = 1e-4;
  double g_old = event ? altitude_eci(y.head<3>()) - event->altitude : 0.0;

  for (std::size_t seg = 0; seg < stops.size(); ++seg) {
    const double t_stop = stops[seg];
    f.cb = cb;
    k1 = f(t, y);
    if (!traj.nodes.empty()) {
      traj.nodes.back().a_right = k1.tail<3>();
      traj.nodes.back().cb = cb;
    }
    bool reject_prev = false;
    while (t < t_stop) {
      h = std::min({h, opt.h_max, t_stop - t});
      const bool last = (t + h >= t_stop - 1e-9 * std::max(1.0, std::abs(t_stop)));
      if (last) h = t_stop - t;
      const Vec6 k2 = f(t + c2 * h, y + h * a21 * k1);
      const Vec6 k3 = f(t + c3 * h, y + h * (a31 * k1 + a32 * k2));
      const Vec6 k4 = f(t + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
      const Vec6 k5 = f(t + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const double t_new = last ? t_stop : t + h;
      const Vec6 k6 = f(t_new, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      const Vec6 y_new = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const Vec6 k7 = f(t_new, y_new);
      const Vec6 err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      const Vec6 scale = sc_abs + opt.rtol * y.cwiseAbs().cwiseMax(y_new.cwiseAbs());
      const double en = std::sqrt((err.cwiseQuotient(scale)).squaredNorm() / 6.0);
      if (!std::isfinite(en)) throw PropagationError("propagate: non-finite error estimate");
      if (en <= 1.0) {
        // PI step control (Hairer/Wanner DOPRI5 constants).
        double fac = std::pow(en, 0.17) / std::pow(err_old, 0.04) / 0.9;
        fac = std::clamp(fac, 0.2, 10.0);
        double h_next = h / fac;
        if (reject_prev) h_next = std::min(h_next, h);
        err_old = std::max(en, 1e-4);
        reject_prev = false;

        if (event) {
          const double g_new = altitude_eci(y_new.head<3>()) - event->altitude;
          if (g_old > 0.0 && g_new <= 0.0) {
            TrajectoryNode n0 = make_node(t, y, k1, k1, cb);
            TrajectoryNode n1 = make_node(t_new, y_new, k7, k7, cb);
            double lo = t, hi = t_new;
            Vec3 r, v;
            double t_ev = hi;
            for (int it = 0; it < 200; ++it) {
              const double mid = 0.5 * (lo + hi);
              detail::hermite5(n0, n1, mid, r, v);
              const double g = altitude_eci(r) - event->altitude;
              t_ev = mid;
              if (std::abs(g) < event->tolerance) break;
              if (g > 0.0) lo = mid; else hi = mid;
              if (hi - lo < 1e-9) break;
            }
            detail::hermite5(n0, n1, t_ev, r, v);
            Vec6 ye;
            ye << r, v;
            const Vec6 fe = f(t_ev, ye);
            if (opt.store_nodes || traj.nodes.size() == 1) {
              traj.nodes.push_back(make_node(t_ev, ye, fe, fe, cb));
            } else {
              traj.nodes.back() = make_node(t_ev, ye, fe, fe, cb);
            }
            traj.terminated_by_event = true;
            return traj;
          }
          g_old = g_new;
        }

        t = t_new;
        y = y_new;
        k1 = k7;
        if (opt.store_nodes || traj.nodes.size() == 1) {
          traj.nodes.push_back(make_node(t, y, k7, k7, cb));
        } else {
          traj.nodes.back() = make_node(t, y, k7, k7, cb);
        }
        h = h_next;
      } else {
        h = h / std::min(10.0, std::pow(en, 0.2) / 0.9);
        reject_prev = true;
        if (h < opt.h_min) throw PropagationError("propagate: step size underflow");
      }
    }
    if (seg + 1 < stops.size()) cb = profile.value_after(t);
  }
  if (event && event->required) {
    throw PropagationError("propagate: event altitude not reached before t_end");
  }
  return traj;
}

struct DecayStats {
  double swept_angle = 0.0;  // rad
  double elapsed = 0.0;      // s
  double mean_rate = 0.0;    // rad/s
  double raan_rate = 0.0;    // rad/s, J2 secular
};

/// In-plane angle from a to b measured about the osculating angular momentum h.
inline double plane_angle(const Vec3& a, const Vec3& b, const Vec3& h) {
  const Vec3 c = a.cross(b);
  const double s = c.norm() * (c.dot(h) >= 0.0 ? 1.0 : -1.0);
  return std::atan2(s, a.dot(b));
}

/// Cumulative swept in-plane angle at every node (increment-based unwrapping).
inline std::vector<double> cumulative_angles(const Trajectory& traj) {
  std::vector<double> out(traj.nodes.size(), 0.0);
  for (std::size_t k = 1; k < traj.nodes.size(); ++k) {
    const auto& n0 = traj.nodes[k - 1];
    const auto& n1 = traj.nodes[k];
    out[k] = out[k - 1] + plane_angle(n0.r, n1.r, n0.r.cross(n0.v));
  }
  return out;
}

/// Swept angle from the trajectory start to t, using precomputed cumulative node angles.
inline double swept_angle_at(const Trajectory& traj, const std::vector<double>& cum, double t) {
  if (t <= traj.t0()) return 0.0;
  if (t >= traj.t_final()) return cum.back();
  const std::size_t k = traj.interval(t);
  const auto& n0 = traj.nodes[k];
  const StateECI s = traj.state_at(t);
  return cum[k] + plane_angle(n0.r, s.r, n0.r.cross(n0.v));
}

inline DecayStats decay_stats(const Trajectory& traj, double j2 = constants::kJ2,
                              double mu = constants::kMu) {
  DecayStats st;
  const auto cum = cumulative_angles(traj);
  st.swept_angle = cum.back();
  st.elapsed = traj.duration();
  st.mean_rate = st.elapsed > 0 ? st.swept_angle / st.elapsed : 0.0;
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < traj.nodes.size(); ++k) {
    const double dt = traj.nodes[k + 1].t - traj.nodes[k].t;
    const auto e0 = state_to_elements(traj.node_state(k), mu);
    const auto e1 = state_to_elements(traj.node_state(k + 1), mu);
    acc += 0.5 * dt * (j2_raan_rate(e0.a, e0.e, e0.i, j2, constants::kReGravity, mu) +
                       j2_raan_rate(e1.a, e1.e, e1.i, j2, constants::kReGravity, mu));
  }
  st.raan_rate = st.elapsed > 0 ? acc / st.elapsed : 0.0;
  return st;
}

inline constexpr std::string_view kTrajectoryCsvHeader =
    "T_S,RX_M,RY_M,RZ_M,VX_M_S,VY_M_S,VZ_M_S,CB_M2_KG,ALT_M";

inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << kTrajectoryCsvHeader << '\n';
  char buf[512];
  for (const auto& n : traj.nodes) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", n.t,
                  n.r.x(), n.r.y(), n.r.z(), n.v.x(), n.v.y(), n.v.z(), n.cb, altitude_eci(n.r));
    out << buf;
  }
}

/// Reads a trajectory CSV and rebuilds node accelerations from the given environment.
inline Trajectory read_trajectory_csv(std::istream& in, const Environment& env) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError("trajectory CSV: missing header", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrajectoryCsvHeader) throw ParseError("trajectory CSV: unexpected header", 1);
  static constexpr const char* kNames[] = {"T_S", "RX_M", "RY_M", "RZ_M", "VX_M_S",
                                           "VY_M_S", "VZ_M_S", "CB_M2_KG", "ALT_M"};
  Trajectory traj;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 9) throw ParseError("trajectory CSV: expected 9 fields", lineno);
    double v[9];
    for (int k = 0; k < 9; ++k) v[k] = detail::parse_number(f[k], kNames[k], lineno);
    TrajectoryNode n;
    n.t = v[0];
    n.r = Vec3(v[1], v[2], v[3]);
    n.v = Vec3(v[4], v[5], v[6]);
    n.cb = v[7];
    if (!traj.nodes.empty() && !(n.t > traj.nodes.back().t)) {
      throw ParseError("trajectory CSV: times must increase", lineno);
    }
    traj.nodes.push_back(n);
  }
  if (traj.nodes.size() < 2) throw ParseError("trajectory CSV: need at least two nodes", lineno);
  for (std::size_t k = 0; k < traj.nodes.size(); ++k) {
    auto& n = traj.nodes[k];
    const StateECI s{n.r, n.v, n.t};
    n.a_right = env.acceleration(s, n.cb);
    n.a_left = k > 0 ? env.acceleration(s, traj.nodes[k - 1].cb) : n.a_right;
  }
  traj.terminated_by_event = true;
  return traj;
}

}  // namespace dragdeorbit
