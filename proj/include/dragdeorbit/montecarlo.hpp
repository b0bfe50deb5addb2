#pragma once

// Case sampling, closed-loop simulation (measurement -> EKF -> MPC -> truth
// propagation), and campaign aggregation with deterministic per-case streams.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "controller.hpp"
#include "elements.hpp"
#include "environment.hpp"
#include "estimator.hpp"
#include "guidance.hpp"
#include "json.hpp"
#include "propagator.hpp"
#include "spaceweather.hpp"

namespace dragdeorbit {

/// SplitMix64 finaliser, used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t { Case = 1, Measurement = 2 };

/// Generator for (seed, case, stream); identical wherever and whenever it is created.
inline std::mt19937_64 case_stream(std::uint64_t seed, std::uint64_t case_index, Stream s) {
  const std::uint64_t k = splitmix64(splitmix64(splitmix64(seed) ^ case_index) ^ static_cast<std::uint64_t>(s));
  return std::mt19937_64(k);
}

struct SamplingRanges {
  double sma = 6853e3;
  double ecc_min = 1e-6, ecc_max = 1e-3;
  double inc_min = 0.0, inc_max = constants::kPi / 2;
  double lat_fraction = 0.99;  // |target lat| <= fraction * i
  double c_drag_min = 0.75, c_drag_max = 1.25;
  double disp_sma = 100.0;       // m
  double disp_intrack = 1000.0;  // m
  bool gravity_dispersion = true;  // truth J2-J4 instead of the guidance J2 field
  // Synthetic space weather.
  double f107_min = 130.0, f107_max = 200.0;
  double f107_amp_max = 30.0;
  double storm_ap_peak_min = 10.0, storm_ap_peak_max = 25.0;
  double storm_len_min = 1.0, storm_len_max = 4.0;  // days
  double storm_window_days = 150.0;
  long epoch_first_day = 2451545;  // 2000-01-01
  long epoch_span_days = 7305;     // 20 years
  long series_days = 600;
};

struct CaseConfig {
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
  Epoch epoch;
  OrbitalElements elements;  // guidance initial orbit
  double dispersion_sma = 0.0;    // m
  double dispersion_angle = 0.0;  // rad, in-track
  TargetSpec target;
  double c_drag = 1.0;
  SyntheticProfile weather;
  long weather_first_day = 0;
};

inline CaseConfig sample_case(std::uint64_t seed, std::uint64_t index, const SamplingRanges& rg = {}) {
  auto rng = case_stream(seed, index, Stream::Case);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };
  CaseConfig c;
  c.seed = seed;
  c.index = index;
  const long day = rg.epoch_first_day + static_cast<long>(std::floor(uni(0.0, static_cast<double>(rg.epoch_span_days))));
  c.epoch = Epoch{static_cast<double>(day) - 0.5 + uni(0.0, 1.0)};
  c.elements.a = rg.sma;
  c.elements.e = uni(rg.ecc_min, rg.ecc_max);
  c.elements.i = uni(rg.inc_min, rg.inc_max);
  c.elements.raan = uni(0.0, constants::kTwoPi);
  const double arg_lat = uni(0.0, constants::kTwoPi);
  c.elements.nu = uni(0.0, constants::kTwoPi);
  c.elements.argp = std::fmod(arg_lat - c.elements.nu + 2.0 * constants::kTwoPi, constants::kTwoPi);
  const double lat_max = rg.lat_fraction * c.elements.i;
  c.target.lat = uni(-lat_max, lat_max);
  c.target.lon = uni(-constants::kPi, constants::kPi);
  c.c_drag = uni(rg.c_drag_min, rg.c_drag_max);
  c.dispersion_sma = uni(-rg.disp_sma, rg.disp_sma);
  c.dispersion_angle = uni(-rg.disp_intrack, rg.disp_intrack) / rg.sma;
  SyntheticProfile& w = c.weather;
  const int kind = static_cast<int>(std::floor(uni(0.0, 3.0)));
  w.kind = kind == 0 ? SyntheticProfile::Kind::Constant
                     : (kind == 1 ? SyntheticProfile::Kind::Sinusoid : SyntheticProfile::Kind::Storm);
  w.f107_mean = uni(rg.f107_min, rg.f107_max);
  w.f107_amplitude = w.kind == SyntheticProfile::Kind::Constant ? 0.0 : uni(0.0, rg.f107_amp_max);
  w.f107_phase = uni(0.0, constants::kTwoPi);
  w.ap_base = 15.0;
  if (w.kind == SyntheticProfile::Kind::Storm) {
    w.storm_length_days = uni(rg.storm_len_min, rg.storm_len_max);
    w.storm_start_day = 60.0 + uni(0.0, rg.storm_window_days);  // series starts 60 days before the epoch
    w.storm_ap_peak = uni(rg.storm_ap_peak_min, rg.storm_ap_peak_max);
  }
  c.weather_first_day = civil_day(c.epoch) - 60;
  return c;
}

/// Truth environment (J2-J4 unless disabled, observed indices, drag multiplier)
/// and nominal environment (J2, forecast-style indices) for a case.
struct CaseEnvironments {
  Environment truth;
  Environment nominal;
};

inline CaseEnvironments make_environments(const CaseConfig& c, const SamplingRanges& rg,
                                          std::shared_ptr<const IndexSeries> historical = nullptr,
                                          const AtmosphereModel& atmosphere = AtmosphereModel::standard()) {
  auto series = historical ? historical
                           : std::make_shared<const IndexSeries>(
                                 make_synthetic_series(c.weather, c.weather_first_day, rg.series_days));
  auto provider = std::make_shared<const IndexProvider>(series);
  CaseEnvironments e;
  e.truth.gravity = rg.gravity_dispersion ? GravityModel::dispersed() : GravityModel::nominal();
  e.truth.atmosphere = atmosphere;
  e.truth.indices = provider;
  e.truth.mode = IndexMode::Observed;
  e.truth.c_drag = c.c_drag;
  e.truth.epoch = c.epoch;
  e.nominal.gravity = GravityModel::nominal();
  e.nominal.atmosphere = atmosphere;
  e.nominal.indices = provider;
  e.nominal.mode = IndexMode::Nominal;
  e.nominal.c_drag = 1.0;
  e.nominal.epoch = c.epoch;
  return e;
}

inline StateECI guidance_initial_state(const CaseConfig& c) { return elements_to_state(c.elements); }

inline StateECI spacecraft_initial_state(const CaseConfig& c) {
  OrbitalElements el = c.elements;
  el.a += c.dispersion_sma;
  el.nu += c.dispersion_angle;
  return elements_to_state(el);
}

enum class CaseStatus { Success, TrackingFailure, GuidanceFailure, Error };

inline const char* to_string(CaseStatus s) {
  switch (s) {
    case CaseStatus::Success: return "success";
    case CaseStatus::TrackingFailure: return "tracking-failure";
    case CaseStatus::GuidanceFailure: return "guidance-failure";
    default: return "error";
  }
}

struct CaseResult {
  CaseStatus status = CaseStatus::Error;
  bool use_density_estimate = true;
  double miss_m = std::numeric_limits<double>::quiet_NaN();
  double max_err_m = 0.0;
  double max_err_prior_m = 0.0;  // largest distance at steps before the failure step
  double actuation = 0.0;  // sum |dCb_{k+1} - dCb_k| / guidance duration
  double guidance_err_m = std::numeric_limits<double>::quiet_NaN();
  double guidance_duration_s = 0.0;
  int steps = 0;
  int failure_step = -1;
  int first_excursion_step = -1;  // first step whose distance exceeded the limit
  int cb_violations = 0;
  int psd_violations = 0;
  int qp_max_iter = 0;
  int dare_failures = 0;
  double final_c = 0.0;
  std::string message;
};

struct SimulationConfig {
  MPCConfig mpc;
  NoiseConfig noise = NoiseConfig::defaults();
  GuidanceConfig guidance;
  SamplingRanges ranges;
  double c_variance = 0.25;  // initial variance of the density-error estimate
  double measurement_noise_scale = 1.0;  // synthetic GPS noise relative to V (the filter keeps V)
  double failure_distance = 100e3;
  double tail_max = 3.0e6;  // s allowed after guidance end
  IntegratorOptions integrator{};
  AtmosphereModel atmosphere = AtmosphereModel::standard();
  std::shared_ptr<const IndexSeries> historical;  // replaces the synthetic profiles when set
};

/// Per-step trace sinks (optional).
struct TraceSinks {
  std::ostream* filter = nullptr;
  std::ostream* control = nullptr;
};

/// Tracks a prepared guidance with one arm of the closed loop.
inline CaseResult track(const CaseConfig& c, const CaseEnvironments& envs, const GuidanceTrajectory& guidance,
                        const TrackingModel& tm, const SimulationConfig& sim, bool use_density_estimate,
                        const TraceSinks& traces = {}, Trajectory* truth_out = nullptr) {
  CaseResult res;
  res.use_density_estimate = use_density_estimate;
  res.guidance_err_m = guidance.targeting_error;
  res.guidance_duration_s = guidance.trajectory.duration();
  const Trajectory& gtraj = guidance.trajectory;
  const MPCConfig& mc = sim.mpc;
  auto noise_rng = case_stream(c.seed, c.index, Stream::Measurement);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Mat4 v_factor = sim.measurement_noise_scale * Mat4(sim.noise.V.llt().matrixL());

  IntegratorOptions io = sim.integrator;
  io.store_nodes = false;
  EventSpec ev = sim.guidance.event;
  ev.required = false;

  StateECI x = spacecraft_initial_state(c);
  FilterState f;
  MpcController ctl(mc);
  double u_prev = 0.0;
  bool landed = false;
  StateECI landing;
  if (traces.filter) *traces.filter << kFilterTraceHeader << '\n';
  if (traces.control) *traces.control << kControlTraceHeader << '\n';
  if (truth_out) {
    truth_out->nodes.clear();
    TrajectoryNode n;
    n.t = x.t;
    n.r = x.r;
    n.v = x.v;
    truth_out->nodes.push_back(n);
  }
  auto record = [&](const Trajectory& seg, double cb) {
    if (!truth_out) return;
    TrajectoryNode n = seg.nodes.back();
    n.cb = cb;
    truth_out->nodes.push_back(n);
  };

  try {
    double actuation = 0.0;
    for (int k = 0; k < tm.size(); ++k) {
      const StepModel& sm = tm.steps[static_cast<std::size_t>(k)];
      const double t = sm.t0;
      const StateECI g = gtraj.state_at(t);
      const double dist = (x.r - g.r).norm();
      res.max_err_prior_m = res.max_err_m;
      res.max_err_m = std::max(res.max_err_m, dist);
      if (dist > sim.failure_distance) {
        if (res.first_excursion_step < 0) res.first_excursion_step = k;
        res.status = CaseStatus::TrackingFailure;
        res.failure_step = k;
        res.steps = k;
        return res;
      }
      Measurement m;
      m.t = t;
      Vec4 w;
      for (int i = 0; i < 4; ++i) w(i) = gauss(noise_rng);
      m.y = relative_state(x, g).x + v_factor * w;
      Vec4 nu = Vec4::Zero();
      if (k == 0) {
        f = initialize_filter(m, sim.noise, sim.c_variance);
      } else {
        f = time_update(f, tm.steps[static_cast<std::size_t>(k - 1)].kf_model(u_prev), u_prev, sim.noise);
        f = measurement_update(f, m, sim.noise, &nu);
      }
      if (!covariance_valid(f.P)) ++res.psd_violations;
      const double c_used = use_density_estimate ? f.c() : 0.0;
      const Command cmd = ctl.step(f.dynamic(), c_used, tm, k);
      if (cmd.qp_status != QPStatus::Optimal) ++res.qp_max_iter;
      if (cmd.dare_failed) ++res.dare_failures;
      const double u = cmd.dcb;
      if (k > 0) actuation += std::abs(u - u_prev);
      if (traces.filter) write_filter_trace_row(*traces.filter, t, f, nu);
      if (traces.control) write_control_trace_row(*traces.control, f.dynamic(), c_used, cmd);

      // Guidance Cb may swap inside the step; the held command rides on top of it.
      std::vector<CbProfile::Segment> segs{{-1e300, 0.0}};
      const double cb_a = sm.cb_g_start;
      segs[0].cb = cb_a + u;
      const double t_swap_abs = gtraj.t0() + guidance.params.t_swap;
      if (t_swap_abs > t && t_swap_abs < t + sm.dt) segs.push_back({t_swap_abs, guidance.params.cb2 + u});
      for (auto& s : segs) {
        if (s.cb < mc.cb_min - 1e-12 || s.cb > mc.cb_max + 1e-12) ++res.cb_violations;
        s.cb = std::clamp(s.cb, mc.cb_min, mc.cb_max);
      }
      const Trajectory seg = propagate(x, CbProfile(segs), envs.truth, t + sm.dt, ev, io);
      record(seg, segs.back().cb);
      x = seg.final_state();
      u_prev = u;
      res.steps = k + 1;
      res.final_c = f.c();
      if (seg.terminated_by_event) {
        landed = true;
        landing = x;
        break;
      }
    }
    res.actuation = res.guidance_duration_s > 0.0 ? actuation / res.guidance_duration_s : 0.0;
    if (!landed) {
      // After the guidance ends: hold the last command on top of Cb2 until entry.
      const double cb = std::clamp(guidance.params.cb2 + u_prev, mc.cb_min, mc.cb_max);
      EventSpec req = sim.guidance.event;
      req.required = true;
      const Trajectory tail = propagate(x, CbProfile(cb), envs.truth, x.t + sim.tail_max, req, io);
      record(tail, cb);
      landing = tail.final_state();
    }
    const Vec3 sc = eci_to_ecef(landing, envs.truth.epoch).r;
    const Vec3 gp = eci_to_ecef(gtraj.final_state(), envs.nominal.epoch).r;
    res.miss_m = (sc - gp).norm();
    res.status = CaseStatus::Success;
  } catch (const std::exception& e) {
    res.status = CaseStatus::Error;
    res.message = e.what();
  }
  return res;
}

/// Guidance, tracking model and environments for one case (shared by both arms).
struct PreparedCase {
  CaseConfig config;
  CaseEnvironments envs;
  std::optional<GuidanceTrajectory> guidance;
  TrackingModel model;
  std::string guidance_error;
};

inline PreparedCase prepare_case(const CaseConfig& c, const SimulationConfig& sim,
                                 std::shared_ptr<const IndexSeries> historical = nullptr) {
  PreparedCase p;
  p.config = c;
  p.envs = make_environments(c, sim.ranges, historical ? historical : sim.historical, sim.atmosphere);
  try {
    p.guidance = generate(guidance_initial_state(c), c.target, p.envs.nominal, sim.guidance);
    p.model = TrackingModel::build(p.guidance->trajectory, p.envs.nominal, sim.mpc);
  } catch (const std::exception& e) {
    p.guidance.reset();
    p.guidance_error = e.what();
  }
  return p;
}

inline CaseResult run_arm(const PreparedCase& p, const SimulationConfig& sim, bool use_density_estimate) {
  if (!p.guidance) {
    CaseResult r;
    r.status = CaseStatus::GuidanceFailure;
    r.use_density_estimate = use_density_estimate;
    r.message = p.guidance_error;
    return r;
  }
  return track(p.config, p.envs, *p.guidance, p.model, sim, use_density_estimate);
}

struct CaseRecord {
  CaseConfig config;
  double guidance_cb1 = std::numeric_limits<double>::quiet_NaN();
  double guidance_cb2 = std::numeric_limits<double>::quiet_NaN();
  double guidance_t_swap = std::numeric_limits<double>::quiet_NaN();
  double guidance_err_m = std::numeric_limits<double>::quiet_NaN();
  bool guidance_converged = false;
  int guidance_iterations = 0;
  std::vector<CaseResult> arms;  // [with estimate] or [with, without]
};

inline CaseRecord run_case(const CaseConfig& c, const SimulationConfig& sim, bool paired,
                           bool use_density_estimate = true, std::shared_ptr<const IndexSeries> historical = nullptr) {
  const PreparedCase p = prepare_case(c, sim, historical);
  CaseRecord rec;
  rec.config = c;
  if (p.guidance) {
    rec.guidance_cb1 = p.guidance->params.cb1;
    rec.guidance_cb2 = p.guidance->params.cb2;
    rec.guidance_t_swap = p.guidance->params.t_swap;
    rec.guidance_err_m = p.guidance->targeting_error;
    rec.guidance_converged = p.guidance->status == GuidanceStatus::Converged;
    rec.guidance_iterations = p.guidance->iterations;
  }
  if (paired) {
    rec.arms.push_back(run_arm(p, sim, true));
    rec.arms.push_back(run_arm(p, sim, false));
  } else {
    rec.arms.push_back(run_arm(p, sim, use_density_estimate));
  }
  return rec;
}

struct CampaignOptions {
  std::uint32_t n = 1;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  bool paired = true;
  bool use_density_estimate = true;  // single-arm mode
};

/// Runs cases on a worker pool; results are indexed by case so order is fixed.
inline std::vector<CaseRecord> run_campaign_cases(const CampaignOptions& opt, const SimulationConfig& sim,
                                                  std::shared_ptr<const IndexSeries> historical = nullptr) {
  if (opt.n < 1) throw RangeError("campaign size must be >= 1");
  std::vector<CaseRecord> out(opt.n);
  std::atomic<std::uint32_t> next{0};
  auto worker = [&]() {
    for (std::uint32_t i = next++; i < opt.n; i = next++) {
      const CaseConfig c = sample_case(opt.seed, i, sim.ranges);
      out[i] = run_case(c, sim, opt.paired, opt.use_density_estimate, historical);
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(opt.jobs, opt.n));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation

/// Linear-interpolated percentile of a sorted sample (p in [0, 100]).
inline double percentile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return percentile_sorted(v, 50.0);
}

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline nlohmann::json json_number(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

inline nlohmann::json arm_summary(const std::vector<CaseRecord>& recs, std::size_t arm) {
  std::vector<double> miss, act, maxerr;
  int n = 0, ok = 0, trk = 0, gfail = 0, err = 0, cbv = 0, psd = 0, qpmax = 0, dare = 0, rule = 0;
  for (const auto& r : recs) {
    if (arm >= r.arms.size()) continue;
    const CaseResult& a = r.arms[arm];
    ++n;
    switch (a.status) {
      case CaseStatus::Success: ++ok; miss.push_back(a.miss_m); act.push_back(a.actuation); break;
      case CaseStatus::TrackingFailure: ++trk; break;
      case CaseStatus::GuidanceFailure: ++gfail; break;
      default: ++err; break;
    }
    if (a.status != CaseStatus::GuidanceFailure) maxerr.push_back(a.max_err_m);
    cbv += a.cb_violations;
    psd += a.psd_violations;
    qpmax += a.qp_max_iter;
    dare += a.dare_failures;
    if (a.status == CaseStatus::TrackingFailure && a.failure_step != a.first_excursion_step) ++rule;
  }
  std::vector<double> sorted = miss;
  std::sort(sorted.begin(), sorted.end());
  nlohmann::json j;
  j["n"] = n;
  j["success"] = ok;
  j["tracking_failure"] = trk;
  j["guidance_failure"] = gfail;
  j["error"] = err;
  j["success_rate"] = n > 0 ? static_cast<double>(ok) / n : 0.0;
  j["miss_mean_m"] = json_number(mean_of(miss));
  j["miss_median_m"] = json_number(percentile_sorted(sorted, 50));
  j["miss_p90_m"] = json_number(percentile_sorted(sorted, 90));
  j["miss_max_m"] = json_number(sorted.empty() ? std::numeric_limits<double>::quiet_NaN() : sorted.back());
  nlohmann::json cdf = nlohmann::json::array();
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    cdf.push_back({{"miss_m", sorted[i]}, {"fraction", static_cast<double>(i + 1) / static_cast<double>(sorted.size())}});
  }
  j["miss_cdf"] = cdf;
  j["actuation_median"] = json_number(act.empty() ? std::numeric_limits<double>::quiet_NaN() : median_of(act));
  j["actuation_mean"] = json_number(mean_of(act));
  j["max_tracking_error_median_m"] = json_number(maxerr.empty() ? std::numeric_limits<double>::quiet_NaN() : median_of(maxerr));
  j["cb_violations"] = cbv;
  j["psd_violations"] = psd;
  j["failure_rule_violations"] = rule;
  j["qp_max_iter_steps"] = qpmax;
  j["dare_fallbacks"] = dare;
  return j;
}

inline nlohmann::json campaign_summary(const std::vector<CaseRecord>& recs, const CampaignOptions& opt,
                                       const SimulationConfig& sim) {
  nlohmann::json j;
  j["n_cases"] = recs.size();
  j["seed"] = opt.seed;
  j["paired"] = opt.paired;
  j["r_input"] = sim.mpc.r_input;
  j["gravity_dispersion"] = sim.ranges.gravity_dispersion;
  j["with_estimate"] = arm_summary(recs, 0);
  if (opt.paired) {
    j["without_estimate"] = arm_summary(recs, 1);
    std::vector<double> with, without;
    for (const auto& r : recs) {
      if (r.arms.size() == 2 && r.arms[0].status == CaseStatus::Success && r.arms[1].status == CaseStatus::Success) {
        with.push_back(r.arms[0].miss_m);
        without.push_back(r.arms[1].miss_m);
      }
    }
    nlohmann::json pc;
    pc["n_both_success"] = with.size();
    pc["miss_mean_with_m"] = json_number(mean_of(with));
    pc["miss_mean_without_m"] = json_number(mean_of(without));
    pc["ratio_with_over_without"] = json_number(mean_of(with) / mean_of(without));
    j["paired_comparison"] = pc;
  } else {
    j["with_estimate"]["use_density_estimate"] = opt.use_density_estimate;
  }
  std::vector<double> gerr, dist_mid, dist_04;
  int converged = 0, with_guidance = 0;
  for (const auto& r : recs) {
    if (!std::isfinite(r.guidance_err_m)) continue;
    ++with_guidance;
    gerr.push_back(r.guidance_err_m);
    if (r.guidance_converged) ++converged;
    dist_mid.push_back(std::hypot(r.guidance_cb1 - 0.05, r.guidance_cb2 - 0.05));
    dist_04.push_back(std::hypot(r.guidance_cb1 - 0.04, r.guidance_cb2 - 0.04));
  }
  nlohmann::json g;
  g["generated"] = with_guidance;
  g["converged"] = converged;
  g["targeting_error_median_m"] = json_number(gerr.empty() ? std::numeric_limits<double>::quiet_NaN() : median_of(gerr));
  g["median_distance_to_0_05"] = json_number(dist_mid.empty() ? std::numeric_limits<double>::quiet_NaN() : median_of(dist_mid));
  g["median_distance_to_0_04"] = json_number(dist_04.empty() ? std::numeric_limits<double>::quiet_NaN() : median_of(dist_04));
  j["guidance"] = g;
  return j;
}

inline constexpr const char* kCasesCsvHeader =
    "case,arm,seed,status,miss_m,max_err_m,actuation,guidance_err_m,cb1,cb2,t_swap_s,c_drag,final_c";

inline void write_cases_csv(std::ostream& out, const std::vector<CaseRecord>& recs) {
  out << kCasesCsvHeader << '\n';
  char buf[512];
  for (const auto& r : recs) {
    for (const auto& a : r.arms) {
      std::snprintf(buf, sizeof buf, "%llu,%s,%llu,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                    static_cast<unsigned long long>(r.config.index), a.use_density_estimate ? "with" : "without",
                    static_cast<unsigned long long>(r.config.seed), to_string(a.status), a.miss_m, a.max_err_m,
                    a.actuation, r.guidance_err_m, r.guidance_cb1, r.guidance_cb2, r.guidance_t_swap, r.config.c_drag,
                    a.final_c);
      out << buf;
    }
  }
}

}  // namespace dragdeorbit
