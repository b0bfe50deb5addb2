#pragma once

// Single-swap guidance: Cb1 until t_swap, Cb2 afterwards, iterated from
// propagated trajectories with a latitude step (moving the swap) and a
// longitude step (rescaling both ballistic coefficients).

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <vector>

#include "elements.hpp"
#include "environment.hpp"
#include "error.hpp"
#include "frames.hpp"
#include "json.hpp"
#include "propagator.hpp"

namespace dragdeorbit {

struct GuidanceConfig {
  double cb_min = 0.025;
  double cb_max = 0.1;
  double tolerance = 10e3;       // m, targeting error
  int max_iter = 15;
  double swap_window_lo = 0.02;  // candidate swap times as a fraction of the previous duration
  double swap_window_hi = 0.98;
  double t_max = 3.0e7;          // s, propagation cap
  EventSpec event{};
  IntegratorOptions integrator{};

  double cb_mid() const { return std::sqrt(cb_min * cb_max); }

  void validate() const {
    if (!(cb_min > 0.0 && cb_min < cb_max)) throw RangeError("GuidanceConfig: need 0 < cb_min < cb_max");
    if (!(tolerance > 0.0)) throw RangeError("GuidanceConfig: tolerance must be positive");
    if (max_iter < 1) throw RangeError("GuidanceConfig: max_iter must be >= 1");
    if (!(0.0 <= swap_window_lo && swap_window_lo < swap_window_hi && swap_window_hi <= 1.0)) {
      throw RangeError("GuidanceConfig: invalid swap window");
    }
  }
};

struct GuidanceParams {
  double cb1 = 0.0;
  double cb2 = 0.0;
  double t_swap = 0.0;

  CbProfile profile() const { return CbProfile::swap(cb1, cb2, t_swap); }
};

struct TargetSpec {
  double lat = 0.0;       // geodetic [rad]
  double lon = 0.0;       // [rad]
  double alt = 100e3;     // m

  /// Latitude must be reachable from an orbit of inclination i (|lat| <= 0.99 i).
  void validate(double inclination) const {
    const double imax = inclination <= constants::kPi / 2 ? inclination : constants::kPi - inclination;
    if (!(std::abs(lat) <= 0.99 * imax + 1e-12)) {
      throw RangeError("target latitude exceeds 0.99 x inclination");
    }
    if (!(std::abs(lon) <= constants::kPi + 1e-12)) throw RangeError("target longitude outside [-pi, pi]");
  }

  Vec3 ecef() const { return geodetic_to_ecef(GeodeticPoint{lat, lon, alt}); }
};

enum class GuidanceStatus { Converged, MaxIter };

struct GuidanceTrajectory {
  Trajectory trajectory;
  GuidanceParams params;
  TargetSpec target;
  GeodeticPoint achieved;
  double targeting_error = 0.0;  // m
  int iterations = 0;
  GuidanceStatus status = GuidanceStatus::MaxIter;
  std::vector<double> error_history;  // error of each propagated iterate, initialisation first
};

/// Decay-phase scaling: angle or duration flown with cb0 becomes value * cb0 / cb.
inline double scale_law(double value0, double cb0, double cb) {
  if (!(cb > 0.0)) throw RangeError("scale_law: Cb must be positive");
  return value0 * cb0 / cb;
}

/// Final ECEF position and its distance to the target.
inline double targeting_error(const Trajectory& traj, const TargetSpec& target, const Epoch& epoch) {
  const Vec3 r = eci_to_ecef(traj.final_state(), epoch).r;
  return (r - target.ecef()).norm();
}

/// Quantities of a propagated single-swap trajectory used by the update formulas.
struct PhaseAnalysis {
  const Trajectory* traj = nullptr;
  std::vector<double> cum;      // swept in-plane angle at each node
  double duration = 0.0;
  double total_angle = 0.0;
  double t_swap = 0.0;
  double theta1 = 0.0, t1 = 0.0;  // before the swap
  double theta2 = 0.0, t2 = 0.0;  // after the swap
  double omega2_avg = 0.0;        // mean angular rate after the swap
  double u_final = 0.0;           // argument of latitude at the end
  double raan_final = 0.0;
  double inc_final = 0.0;
  double raan_rate = 0.0;         // mean J2 nodal rate over the trajectory

  double angle_at(double t) const { return swept_angle_at(*traj, cum, t); }
};

inline PhaseAnalysis analyze_phases(const Trajectory& traj, const GuidanceParams& params, const Environment& env) {
  PhaseAnalysis a;
  a.traj = &traj;
  a.cum = cumulative_angles(traj);
  a.duration = traj.duration();
  a.total_angle = a.cum.back();
  a.t_swap = std::clamp(params.t_swap, traj.t0(), traj.t_final()) - traj.t0();
  a.t1 = a.t_swap;
  a.theta1 = a.angle_at(traj.t0() + a.t_swap);
  a.t2 = a.duration - a.t1;
  a.theta2 = a.total_angle - a.theta1;
  a.omega2_avg = a.t2 > 0.0 ? a.theta2 / a.t2 : a.total_angle / a.duration;
  const StateECI fin = traj.final_state();
  const auto el = state_to_elements(fin, env.gravity.mu);
  a.u_final = argument_of_latitude(fin);
  a.raan_final = el.raan;
  a.inc_final = el.i;
  // Mean nodal rate from a coarse sample of the osculating elements.
  const std::size_t n = traj.nodes.size();
  const std::size_t stride = std::max<std::size_t>(1, n / 2000);
  double acc = 0.0, wsum = 0.0;
  for (std::size_t k = 0; k + stride < n; k += stride) {
    const double dt = traj.nodes[k + stride].t - traj.nodes[k].t;
    const auto e0 = state_to_elements(traj.node_state(k), env.gravity.mu);
    acc += dt * j2_raan_rate(e0.a, e0.e, e0.i, env.gravity.j2(), env.gravity.re, env.gravity.mu);
    wsum += dt;
  }
  a.raan_rate = wsum > 0.0 ? acc / wsum : 0.0;
  return a;
}

struct SwapCandidate {
  double t_swap = 0.0;  // latitude-targeted swap time (relative to the trajectory start)
  double dphi = 0.0;    // change in total swept angle
};

/// Geocentric latitude of the target point at the entry-interface altitude.
inline double target_geocentric_latitude(const TargetSpec& target) {
  const Vec3 r = target.ecef();
  return std::asin(r.z() / r.norm());
}

/// Arguments of latitude at which an orbit of inclination i passes the target latitude.
inline std::array<double, 2> target_arguments_of_latitude(const TargetSpec& target, double inclination) {
  const double si = std::sin(inclination);
  if (std::abs(si) < 1e-9) throw DegenerateGeometryError("latitude targeting needs a non-equatorial orbit");
  const double s = std::clamp(std::sin(target_geocentric_latitude(target)) / si, -1.0, 1.0);
  const double u1 = std::asin(s);
  return {u1, constants::kPi - u1};
}

/// Swap-time change producing a swept-angle change dphi (phase-2 rate omega2).
inline double swap_shift(double dphi, double cb1, double cb2, double omega2) {
  return dphi * cb2 / (omega2 * (cb2 - cb1));
}

inline std::vector<SwapCandidate> latitude_candidates(const PhaseAnalysis& pa, const GuidanceParams& params,
                                                      const TargetSpec& target, const GuidanceConfig& cfg) {
  std::vector<SwapCandidate> out;
  if (params.cb2 == params.cb1 || !(pa.omega2_avg > 0.0)) return out;
  const double lo = cfg.swap_window_lo * pa.duration;
  const double hi = cfg.swap_window_hi * pa.duration;
  const double step = swap_shift(constants::kTwoPi, params.cb1, params.cb2, pa.omega2_avg);
  for (double u_d : target_arguments_of_latitude(target, pa.inc_final)) {
    const double base = wrap_pi(u_d - pa.u_final);
    const double s0 = pa.t_swap + swap_shift(base, params.cb1, params.cb2, pa.omega2_avg);
    const double m_a = (lo - s0) / step, m_b = (hi - s0) / step;
    const long m_lo = static_cast<long>(std::ceil(std::min(m_a, m_b)));
    const long m_hi = static_cast<long>(std::floor(std::max(m_a, m_b)));
    for (long m = m_lo; m <= m_hi; ++m) {
      const double s = s0 + static_cast<double>(m) * step;
      if (s >= lo && s <= hi) out.push_back({s, base + constants::kTwoPi * static_cast<double>(m)});
    }
  }
  std::sort(out.begin(), out.end(), [](const SwapCandidate& a, const SwapCandidate& b) { return a.t_swap < b.t_swap; });
  return out;
}

/// Phase angles/durations of the latitude-targeted trajectory and the retarget solution.
struct RetargetResult {
  bool feasible = false;
  GuidanceParams params;  // new parameters (t_swap relative to trajectory start)
  double t_swap_latitude = 0.0;
  double lifetime_latitude = 0.0;  // predicted lifetime after the latitude step
  double e_long = 0.0;
  double dt_d = 0.0;
  double theta1 = 0.0, t1 = 0.0, theta2 = 0.0, t2 = 0.0;  // phases before rescaling
  double theta_total = 0.0, t_total = 0.0;                 // desired totals
  double x = 1.0, y = 1.0;                                 // Cb10/Cb1, Cb20/Cb2
};

/// Solves theta_total = theta1 x + theta2 y, t_total = t1 x + t2 y. Returns false when singular.
inline bool solve_phase_system(double theta1, double t1, double theta2, double t2, double theta_total,
                               double t_total, double& x, double& y) {
  const double det = theta1 * t2 - t1 * theta2;
  const double scale = std::abs(theta1 * t2) + std::abs(t1 * theta2);
  if (!(std::abs(det) > 1e-12 * scale)) return false;
  x = (theta_total * t2 - t_total * theta2) / det;
  y = (theta1 * t_total - t1 * theta_total) / det;
  return true;
}

/// Closed forms of the same system written for Cb2 then Cb1.
inline double cb2_closed_form(double cb20, double theta1, double t1, double theta2, double t2, double theta_total,
                              double t_total) {
  return cb20 * (t2 * theta1 - t1 * theta2) / (t_total * theta1 - t1 * theta_total);
}
inline double cb1_closed_form(double cb10, double cb20, double cb2, double theta1, double theta2, double theta_total) {
  return cb10 * theta1 * cb2 / (theta_total * cb2 - theta2 * cb20);
}

/// Predicted entry longitude for an arrival at argument of latitude u at time t.
inline double predicted_longitude(double u, double raan, double inc, const Epoch& epoch, double t) {
  const Vec3 r_pqw(std::cos(u), std::sin(u), 0.0);
  const Vec3 r = (Eigen::AngleAxisd(raan, Vec3::UnitZ()) * Eigen::AngleAxisd(inc, Vec3::UnitX())) * r_pqw;
  const Vec3 e = rot3(earth_rotation_angle(epoch, t)) * r;
  return std::atan2(e.y(), e.x());
}

inline RetargetResult longitude_retarget(const PhaseAnalysis& pa, const GuidanceParams& params,
                                         const SwapCandidate& cand, const TargetSpec& target, const Epoch& epoch,
                                         const GuidanceConfig& cfg) {
  RetargetResult rr;
  const double cb10 = params.cb1, cb20 = params.cb2;
  const double s = cand.t_swap;
  const double dts = s - pa.t_swap;
  rr.t_swap_latitude = s;
  rr.lifetime_latitude = pa.duration + dts * (cb20 - cb10) / cb20;
  if (!(rr.lifetime_latitude > s)) return rr;

  // Phase 1 of the latitude-targeted trajectory.
  rr.t1 = s;
  if (s <= pa.t_swap) {
    rr.theta1 = pa.angle_at(pa.traj->t0() + s);
  } else {
    // Extra time at cb10 covers the decay flown at cb20 over a scaled interval.
    const double tau_prev = (s - pa.t_swap) * cb10 / cb20;
    if (pa.t_swap + tau_prev >= pa.duration) return rr;
    const double t_sw = pa.traj->t0() + pa.t_swap;
    rr.theta1 = pa.theta1 + (pa.angle_at(t_sw + tau_prev) - pa.angle_at(t_sw)) * cb20 / cb10;
  }
  rr.theta_total = pa.total_angle + cand.dphi;
  rr.theta2 = rr.theta_total - rr.theta1;
  rr.t2 = rr.lifetime_latitude - s;
  if (!(rr.theta2 > 0.0 && rr.theta1 > 0.0)) return rr;

  // Longitude error of the latitude-targeted arrival.
  const double u_d = pa.u_final + cand.dphi;
  const double d_life = rr.lifetime_latitude - pa.duration;
  const double lon_pred = predicted_longitude(u_d, pa.raan_final + pa.raan_rate * d_life, pa.inc_final, epoch,
                                              pa.traj->t0() + rr.lifetime_latitude);
  rr.e_long = wrap_pi(lon_pred - target.lon);
  rr.dt_d = rr.e_long / (constants::kEarthRate - pa.raan_rate);
  rr.t_total = rr.lifetime_latitude + rr.dt_d;

  double x = 1.0, y = 1.0;
  if (!solve_phase_system(rr.theta1, rr.t1, rr.theta2, rr.t2, rr.theta_total, rr.t_total, x, y)) return rr;
  if (!(x > 0.0 && y > 0.0)) return rr;
  rr.x = x;
  rr.y = y;
  rr.params.cb1 = cb10 / x;
  rr.params.cb2 = cb20 / y;
  rr.params.t_swap = s * x;
  const double eps = 1e-12;
  rr.feasible = rr.params.cb1 >= cfg.cb_min - eps && rr.params.cb1 <= cfg.cb_max + eps &&
                rr.params.cb2 >= cfg.cb_min - eps && rr.params.cb2 <= cfg.cb_max + eps;
  rr.params.cb1 = std::clamp(rr.params.cb1, cfg.cb_min, cfg.cb_max);
  rr.params.cb2 = std::clamp(rr.params.cb2, cfg.cb_min, cfg.cb_max);
  return rr;
}

/// Candidate closest to (Cb_mid, Cb_mid); ties by swap time nearest mid-duration.
inline std::size_t select_swap(const std::vector<RetargetResult>& cands, double duration, const GuidanceConfig& cfg) {
  if (cands.empty()) throw ControlAuthorityError("no feasible swap time: insufficient control authority");
  const double mid = cfg.cb_mid();
  auto key = [&](const RetargetResult& r) {
    return std::make_tuple(std::hypot(r.params.cb1 - mid, r.params.cb2 - mid),
                           std::abs(r.params.t_swap - 0.5 * duration), r.params.t_swap, r.params.cb1);
  };
  std::size_t best = 0;
  for (std::size_t k = 1; k < cands.size(); ++k) {
    if (key(cands[k]) < key(cands[best])) best = k;
  }
  return best;
}

inline Trajectory propagate_guidance(const StateECI& initial, const GuidanceParams& p, const Environment& env,
                                     const GuidanceConfig& cfg) {
  GuidanceParams abs = p;
  abs.t_swap = initial.t + p.t_swap;
  return propagate(initial, abs.profile(), env, initial.t + cfg.t_max, cfg.event, cfg.integrator);
}

/// Decay at Cb_max gives t_f0; initial guess Cb1 = Cb_max, Cb2 = Cb_min, t_swap = t_f0 / 2.
inline std::pair<GuidanceParams, Trajectory> initialize(const StateECI& initial, const Environment& env,
                                                        const GuidanceConfig& cfg) {
  IntegratorOptions light = cfg.integrator;
  light.store_nodes = false;
  const Trajectory t0 = propagate(initial, CbProfile(cfg.cb_max), env, initial.t + cfg.t_max, cfg.event, light);
  GuidanceParams p{cfg.cb_max, cfg.cb_min, 0.5 * t0.duration()};
  return {p, propagate_guidance(initial, p, env, cfg)};
}

/// One latitude + longitude update from a propagated trajectory.
inline GuidanceParams guidance_update(const Trajectory& traj, const GuidanceParams& params, const TargetSpec& target,
                                      const Environment& env, const GuidanceConfig& cfg) {
  const PhaseAnalysis pa = analyze_phases(traj, params, env);
  const auto cands = latitude_candidates(pa, params, target, cfg);
  std::vector<RetargetResult> feasible;
  for (const auto& c : cands) {
    auto r = longitude_retarget(pa, params, c, target, env.epoch, cfg);
    if (r.feasible) feasible.push_back(r);
  }
  return feasible[select_swap(feasible, pa.duration, cfg)].params;
}

inline GuidanceTrajectory generate(const StateECI& initial, const TargetSpec& target, const Environment& env,
                                   const GuidanceConfig& cfg = {}) {
  cfg.validate();
  target.validate(state_to_elements(initial, env.gravity.mu).i);
  auto [params, traj] = initialize(initial, env, cfg);
  GuidanceTrajectory best;
  best.target = target;
  best.targeting_error = std::numeric_limits<double>::infinity();
  std::vector<double> history;
  for (int iter = 0;; ++iter) {
    const double err = targeting_error(traj, target, env.epoch);
    history.push_back(err);
    if (err < best.targeting_error) {
      best.trajectory = traj;
      best.params = params;
      best.targeting_error = err;
      best.iterations = iter;
    }
    if (err < cfg.tolerance) {
      best.status = GuidanceStatus::Converged;
      break;
    }
    if (iter >= cfg.max_iter) break;
    params = guidance_update(traj, params, target, env, cfg);
    traj = propagate_guidance(initial, params, env, cfg);
  }
  best.error_history = std::move(history);
  best.achieved = geodetic(eci_to_ecef(best.trajectory.final_state(), env.epoch).r);
  return best;
}

inline nlohmann::json guidance_sidecar(const GuidanceTrajectory& g) {
  nlohmann::json j;
  j["cb1"] = g.params.cb1;
  j["cb2"] = g.params.cb2;
  j["t_swap_s"] = g.params.t_swap;
  j["target_lat_rad"] = g.target.lat;
  j["target_lon_rad"] = g.target.lon;
  j["targeting_error_m"] = g.targeting_error;
  j["iterations"] = g.iterations;
  return j;
}

}  // namespace dragdeorbit
