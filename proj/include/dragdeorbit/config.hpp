#pragma once

// Run configuration: a flat `key = value` file with [sections]. Every knob has
// a default; unknown keys are rejected so a typo cannot silently fall back.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "montecarlo.hpp"

namespace dragdeorbit {

struct CampaignSettings {
  std::uint32_t n = 20;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  bool paired = true;
};

/// Explicit single case ([case] section); absent means "sample from the seed".
struct CaseSettings {
  long epoch_day = 2455197;  // 2010-01-01
  double epoch_seconds = 0.0;
  OrbitalElements elements{6853e3, 1e-4, 0.9, 0.0, 0.0, 0.0};
  double arg_lat = 0.0;
  double target_lat = 0.0;
  double target_lon = 0.0;
  double c_drag = 1.0;
  double dispersion_sma = 0.0;
  double dispersion_intrack = 0.0;
  SyntheticProfile weather;

  CaseConfig to_case(std::uint64_t seed) const {
    CaseConfig c;
    c.seed = seed;
    c.index = 0;
    c.epoch = Epoch{static_cast<double>(epoch_day) - 0.5 + epoch_seconds / constants::kSecondsPerDay};
    c.elements = elements;
    c.elements.argp = std::fmod(arg_lat - elements.nu + 2.0 * constants::kTwoPi, constants::kTwoPi);
    c.target.lat = target_lat;
    c.target.lon = target_lon;
    c.c_drag = c_drag;
    c.dispersion_sma = dispersion_sma;
    c.dispersion_angle = dispersion_intrack / elements.a;
    c.weather = weather;
    c.weather_first_day = civil_day(c.epoch) - 60;
    return c;
  }
};

struct RunConfig {
  SimulationConfig sim;
  CampaignSettings campaign;
  std::optional<CaseSettings> single_case;
  std::string atmosphere_path;     // empty: built-in table
  std::string space_weather_path;  // empty: synthetic profiles
  std::string output_dir = "results";

  void validate() const {
    sim.mpc.validate();
    sim.guidance.validate();
    if (!(sim.guidance.cb_min == sim.mpc.cb_min && sim.guidance.cb_max == sim.mpc.cb_max)) {
      throw RangeError("config: guidance and controller Cb bounds differ");
    }
    Eigen::SelfAdjointEigenSolver<Mat3x3> ew(sim.noise.W);
    if (ew.eigenvalues().minCoeff() < 0.0) throw RangeError("config: filter.w must be PSD");
    Eigen::SelfAdjointEigenSolver<Mat4> ev(sim.noise.V);
    if (!(ev.eigenvalues().minCoeff() > 0.0)) throw RangeError("config: measurement noise must be positive");
    if (!(sim.c_variance > 0.0)) throw RangeError("config: filter.c_variance must be positive");
    const auto& r = sim.ranges;
    if (!(r.sma > constants::kReGravity)) throw RangeError("config: sampling.sma_m below the Earth radius");
    if (!(0.0 <= r.ecc_min && r.ecc_min <= r.ecc_max && r.ecc_max < 0.1)) {
      throw RangeError("config: eccentricity range must satisfy 0 <= min <= max < 0.1");
    }
    if (!(0.0 <= r.inc_min && r.inc_min <= r.inc_max && r.inc_max <= constants::kPi)) {
      throw RangeError("config: inclination range must lie in [0, 180] deg");
    }
    if (!(0.0 < r.c_drag_min && r.c_drag_min <= r.c_drag_max)) throw RangeError("config: invalid c_drag range");
    if (!(r.disp_sma >= 0.0 && r.disp_intrack >= 0.0)) throw RangeError("config: dispersions must be >= 0");
    if (!(r.f107_min > 0.0 && r.f107_min <= r.f107_max)) throw RangeError("config: invalid F10.7 range");
    if (!(sim.failure_distance > 0.0)) throw RangeError("config: failure distance must be positive");
    if (campaign.n < 1) throw RangeError("config: campaign.n must be >= 1");
    if (campaign.jobs < 1) throw RangeError("config: campaign.jobs must be >= 1");
    for (const auto* p : {&atmosphere_path, &space_weather_path}) {
      if (!p->empty() && !std::filesystem::exists(*p)) throw RangeError("config: file not found: " + *p);
    }
    if (single_case) {
      const auto& c = *single_case;
      if (!(c.elements.a > constants::kReGravity + 150e3)) throw RangeError("config: case.sma_m too low");
      if (!(c.elements.e >= 0.0 && c.elements.e < 0.1)) throw RangeError("config: case.ecc must be in [0, 0.1)");
      if (!(c.c_drag > 0.0)) throw RangeError("config: case.c_drag must be positive");
    }
  }
};

namespace detail {

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const char* b = v.data();
  const char* e = v.data() + v.size();
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc() || p != e) throw ParseError("config: " + key + " is not a number: '" + v + "'", 0);
  return out;
}

inline long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ParseError("config: " + key + " is not an integer: '" + v + "'", 0);
  }
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ParseError("config: " + key + " is not a boolean: '" + v + "'", 0);
}

inline std::vector<double> to_list(const std::string& key, const std::string& v, std::size_t n) {
  std::vector<double> out;
  std::istringstream ss(v);
  std::string tok;
  while (ss >> tok) {
    if (!tok.empty() && tok.back() == ',') tok.pop_back();
    if (!tok.empty()) out.push_back(to_double(key, tok));
  }
  if (out.size() != n) throw ParseError("config: " + key + " needs " + std::to_string(n) + " values", 0);
  return out;
}

inline SyntheticProfile::Kind to_weather_kind(const std::string& key, const std::string& v) {
  if (v == "constant") return SyntheticProfile::Kind::Constant;
  if (v == "sinusoid") return SyntheticProfile::Kind::Sinusoid;
  if (v == "storm") return SyntheticProfile::Kind::Storm;
  throw ParseError("config: " + key + " must be constant, sinusoid or storm", 0);
}

}  // namespace detail

inline RunConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(std::string("config: ") + e.message(), e.line());
  }
  RunConfig cfg;
  cfg.sim.noise = NoiseConfig::defaults();
  constexpr double deg = constants::kPi / 180.0;
  double sigma_pos = 5.0, sigma_vel = 0.05;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  auto& m = cfg.sim.mpc;
  auto& g = cfg.sim.guidance;
  auto& r = cfg.sim.ranges;
  auto num = [](double& dst) { return Setter([&dst](const std::string& k, const std::string& v) { dst = detail::to_double(k, v); }); };
  auto scaled = [](double& dst, double s) {
    return Setter([&dst, s](const std::string& k, const std::string& v) { dst = detail::to_double(k, v) * s; });
  };
  auto integer = [](int& dst) {
    return Setter([&dst](const std::string& k, const std::string& v) { dst = static_cast<int>(detail::to_int(k, v)); });
  };
  auto flag = [](bool& dst) { return Setter([&dst](const std::string& k, const std::string& v) { dst = detail::to_bool(k, v); }); };
  auto text = [](std::string& dst) { return Setter([&dst](const std::string&, const std::string& v) { dst = v; }); };

  const std::map<std::string, Setter> common = {
      {"mpc.horizon", integer(m.horizon)},
      {"mpc.substeps", integer(m.substeps)},
      {"mpc.q_stage", [&](const std::string& k, const std::string& v) {
         const auto d = detail::to_list(k, v, 4);
         m.q_stage = Vec4(d[0], d[1], d[2], d[3]).asDiagonal();
       }},
      {"mpc.r_input", num(m.r_input)},
      {"mpc.cb_min", [&](const std::string& k, const std::string& v) { m.cb_min = g.cb_min = detail::to_double(k, v); }},
      {"mpc.cb_max", [&](const std::string& k, const std::string& v) { m.cb_max = g.cb_max = detail::to_double(k, v); }},
      {"mpc.step_s", num(m.nominal_dt)},
      {"mpc.qp_tol", num(m.qp_tol)},
      {"mpc.qp_max_iter", integer(m.qp_max_iter)},
      {"filter.w", [&](const std::string& k, const std::string& v) {
         const auto d = detail::to_list(k, v, 3);
         cfg.sim.noise.W = Eigen::Vector3d(d[0], d[1], d[2]).asDiagonal();
       }},
      {"filter.sigma_pos_m", num(sigma_pos)},
      {"filter.sigma_vel_m_s", num(sigma_vel)},
      {"filter.c_variance", num(cfg.sim.c_variance)},
      {"guidance.tolerance_m", num(g.tolerance)},
      {"guidance.max_iter", integer(g.max_iter)},
      {"guidance.t_max_s", num(g.t_max)},
      {"guidance.entry_altitude_m", num(g.event.altitude)},
      {"environment.atmosphere", text(cfg.atmosphere_path)},
      {"environment.space_weather", text(cfg.space_weather_path)},
      {"sampling.sma_m", num(r.sma)},
      {"sampling.ecc_min", num(r.ecc_min)},
      {"sampling.ecc_max", num(r.ecc_max)},
      {"sampling.inc_min_deg", scaled(r.inc_min, deg)},
      {"sampling.inc_max_deg", scaled(r.inc_max, deg)},
      {"sampling.c_drag_min", num(r.c_drag_min)},
      {"sampling.c_drag_max", num(r.c_drag_max)},
      {"sampling.dispersion_sma_m", num(r.disp_sma)},
      {"sampling.dispersion_intrack_m", num(r.disp_intrack)},
      {"sampling.gravity_dispersion", flag(r.gravity_dispersion)},
      {"sampling.f107_min", num(r.f107_min)},
      {"sampling.f107_max", num(r.f107_max)},
      {"sampling.f107_amplitude_max", num(r.f107_amp_max)},
      {"sampling.storm_ap_peak_min", num(r.storm_ap_peak_min)},
      {"sampling.storm_ap_peak_max", num(r.storm_ap_peak_max)},
      {"simulation.failure_distance_m", num(cfg.sim.failure_distance)},
      {"simulation.tail_max_s", num(cfg.sim.tail_max)},
      {"campaign.n", [&](const std::string& k, const std::string& v) {
         const auto n = detail::to_int(k, v);
         if (n < 1) throw RangeError("config: campaign.n must be >= 1");
         cfg.campaign.n = static_cast<std::uint32_t>(n);
       }},
      {"campaign.seed", [&](const std::string& k, const std::string& v) {
         cfg.campaign.seed = static_cast<std::uint64_t>(detail::to_int(k, v));
       }},
      {"campaign.jobs", [&](const std::string& k, const std::string& v) {
         const auto n = detail::to_int(k, v);
         if (n < 1) throw RangeError("config: campaign.jobs must be >= 1");
         cfg.campaign.jobs = static_cast<unsigned>(n);
       }},
      {"campaign.paired", flag(cfg.campaign.paired)},
      {"output.dir", text(cfg.output_dir)},
  };

  CaseSettings cs;
  const std::map<std::string, Setter> case_keys = {
      {"case.epoch", [&](const std::string& k, const std::string& v) { cs.epoch_day = detail::parse_iso_date(v, 0); (void)k; }},
      {"case.epoch_seconds", num(cs.epoch_seconds)},
      {"case.sma_m", num(cs.elements.a)},
      {"case.ecc", num(cs.elements.e)},
      {"case.inc_deg", scaled(cs.elements.i, deg)},
      {"case.raan_deg", scaled(cs.elements.raan, deg)},
      {"case.arg_lat_deg", scaled(cs.arg_lat, deg)},
      {"case.true_anomaly_deg", scaled(cs.elements.nu, deg)},
      {"case.target_lat_deg", scaled(cs.target_lat, deg)},
      {"case.target_lon_deg", scaled(cs.target_lon, deg)},
      {"case.c_drag", num(cs.c_drag)},
      {"case.dispersion_sma_m", num(cs.dispersion_sma)},
      {"case.dispersion_intrack_m", num(cs.dispersion_intrack)},
      {"case.weather", [&](const std::string& k, const std::string& v) { cs.weather.kind = detail::to_weather_kind(k, v); }},
      {"case.f107_mean", num(cs.weather.f107_mean)},
      {"case.f107_amplitude", num(cs.weather.f107_amplitude)},
      {"case.ap_base", num(cs.weather.ap_base)},
      {"case.storm_start_day", num(cs.weather.storm_start_day)},
      {"case.storm_length_days", num(cs.weather.storm_length_days)},
      {"case.storm_ap_peak", num(cs.weather.storm_ap_peak)},
  };

  bool have_case = false;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ParseError("config: key '" + section + "' outside a section", 0);
    }
    for (const auto& [key, node] : body) {
      const std::string full = section + "." + key;
      const std::string value = node.get_value<std::string>();
      if (auto it = common.find(full); it != common.end()) {
        it->second(full, value);
      } else if (auto jt = case_keys.find(full); jt != case_keys.end()) {
        jt->second(full, value);
        have_case = true;
      } else {
        throw ParseError("config: unknown key '" + full + "'", 0);
      }
    }
  }
  cfg.sim.noise.V = Vec4(sigma_pos * sigma_pos, sigma_pos * sigma_pos, sigma_vel * sigma_vel, sigma_vel * sigma_vel)
                        .asDiagonal();
  if (have_case) cfg.single_case = cs;
  cfg.validate();
  return cfg;
}

/// Loads the referenced atmosphere table and index file. With a historical
/// index file, epochs are sampled so the nominal averages and a full decay
/// (up to 400 days) stay inside its coverage.
inline void load_inputs(RunConfig& cfg) {
  if (!cfg.atmosphere_path.empty()) cfg.sim.atmosphere = load_atmosphere(cfg.atmosphere_path);
  if (!cfg.space_weather_path.empty()) {
    auto series = std::make_shared<const IndexSeries>(load_indices(cfg.space_weather_path));
    if (series->empty()) throw CoverageError("space weather file is empty");
    const long first = series->first_day() + 60;
    const long last = series->last_day() - 400;
    if (last <= first) throw CoverageError("space weather file spans too few days for a decay");
    cfg.sim.ranges.epoch_first_day = first;
    cfg.sim.ranges.epoch_span_days = last - first;
    cfg.sim.historical = std::move(series);
  }
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("config: cannot open " + path, 0);
  RunConfig cfg = parse_config(in);
  load_inputs(cfg);
  return cfg;
}

}  // namespace dragdeorbit
