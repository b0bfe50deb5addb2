#pragma once

// Gravity (zonal harmonics), piecewise-exponential atmosphere modulated by
// space-weather indices, and drag acceleration.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "constants.hpp"
#include "error.hpp"
#include "frames.hpp"
#include "spaceweather.hpp"

namespace dragdeorbit {

/// Zonal gravity field. zonal[k] holds J_{k+2}.
struct GravityModel {
  double mu = constants::kMu;
  double re = constants::kReGravity;
  std::vector<double> zonal;

  static GravityModel two_body() { return GravityModel{constants::kMu, constants::kReGravity, {}}; }
  static GravityModel nominal() { return GravityModel{constants::kMu, constants::kReGravity, {constants::kJ2}}; }
  static GravityModel dispersed() {
    return GravityModel{constants::kMu, constants::kReGravity,
                        {constants::kJ2, constants::kJ3, constants::kJ4}};
  }
  double j2() const { return zonal.empty() ? 0.0 : zonal[0]; }
};

/// Central term plus zonal J2..Jn perturbations. Valid in ECEF and ECI alike
/// since the field is symmetric about axis 3.
inline Vec3 gravity_accel(const Vec3& r, const GravityModel& g) {
  const double rn = r.norm();
  const Vec3 rhat = r / rn;
  Vec3 acc = -g.mu / (rn * rn) * rhat;
  if (g.zonal.empty()) return acc;
  const double s = rhat.z();
  // Legendre P_n(s) and derivatives by recursion.
  const std::size_t nmax = g.zonal.size() + 1;
  double p_prev = 1.0, p = s;      // P0, P1
  double dp_prev = 0.0, dp = 1.0;  // P0', P1'
  const double ratio = g.re / rn;
  double ratio_n = ratio;
  const Vec3 zhat(0.0, 0.0, 1.0);
  for (std::size_t n = 2; n <= nmax; ++n) {
    const double nd = static_cast<double>(n);
    const double p_next = ((2.0 * nd - 1.0) * s * p - (nd - 1.0) * p_prev) / nd;
    const double dp_next = nd * p + s * dp;
    p_prev = p;
    p = p_next;
    dp_prev = dp;
    dp = dp_next;
    ratio_n *= ratio;
    const double jn = g.zonal[n - 2];
    if (jn == 0.0) continue;
    const double k = g.mu / (rn * rn) * jn * ratio_n;
    acc -= k * (-(nd + 1.0) * p * rhat + dp * (zhat - s * rhat));
  }
  (void)dp_prev;
  return acc;
}

struct AtmosphereNode {
  double alt = 0.0;           // m
  double rho = 0.0;           // kg/m^3
  double scale_height = 0.0;  // m
};

/// Base density table with linear space-weather modulation.
struct AtmosphereModel {
  std::vector<AtmosphereNode> nodes;
  double k_f107 = 1.0;
  double k_ap = 0.3;
  double f107_ref = 150.0;
  double ap_ref = 15.0;
  double floor = 0.05;

  void validate() const {
    if (nodes.size() < 2) throw RangeError("atmosphere: need at least two nodes");
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (!(nodes[k].rho > 0.0)) throw RangeError("atmosphere: densities must be positive");
      if (!(nodes[k].scale_height > 0.0)) throw RangeError("atmosphere: scale heights must be positive");
      if (k > 0) {
        if (!(nodes[k].alt > nodes[k - 1].alt)) throw RangeError("atmosphere: altitudes must increase");
        if (!(nodes[k].rho < nodes[k - 1].rho)) throw RangeError("atmosphere: densities must decrease");
      }
    }
  }

  static AtmosphereModel standard();

  double min_alt() const { return nodes.front().alt; }
  double max_alt() const { return nodes.back().alt; }

  double base_density(double h) const {
    if (!(h >= min_alt() && h <= max_alt())) {
      throw RangeError("atmosphere: altitude " + std::to_string(h / 1e3) + " km outside table span");
    }
    auto it = std::upper_bound(nodes.begin(), nodes.end(), h,
                               [](double v, const AtmosphereNode& n) { return v < n.alt; });
    const auto& n = *(it - 1);
    return n.rho * std::exp(-(h - n.alt) / n.scale_height);
  }

  double modulation(double f107, double ap) const {
    return std::max(floor, 1.0 + k_f107 * (f107 - f107_ref) / f107_ref + k_ap * (ap - ap_ref) / ap_ref);
  }
};

namespace detail {
struct TableRow {
  double alt_km, rho, h_km;
};
// Generated by tools/make_atmosphere_table.py (identical to data/atmosphere_base.csv).
inline constexpr TableRow kStandardTable[] = {
    {60, 3.206000e-04, 7.714428277},
    {70, 8.770000e-05, 6.549411257},
    {80, 1.905000e-05, 5.798887059},
    {90, 3.396000e-06, 5.382007524},
    {100, 5.297000e-07, 5.876723203},
    {110, 9.661000e-08, 7.262590643},
    {120, 2.438000e-08, 9.473455066},
    {130, 8.484000e-09, 12.635700573},
    {140, 3.845000e-09, 16.149218894},
    {150, 2.070000e-09, 22.523003074},
    {160, 1.327846e-09, 22.522999371},
    {170, 8.517753e-10, 22.523970784},
    {180, 5.464000e-10, 29.739989993},
    {190, 3.903734e-10, 29.739739598},
    {200, 2.789000e-10, 37.105026922},
    {210, 2.130119e-10, 37.104954792},
    {220, 1.626893e-10, 37.104989130},
    {230, 1.242551e-10, 37.105034466},
    {240, 9.490074e-11, 37.102882074},
    {250, 7.248000e-11, 45.545988232},
    {260, 5.819226e-11, 45.546013084},
    {270, 4.672102e-11, 45.545979495},
    {280, 3.751106e-11, 45.545986902},
    {290, 3.011663e-11, 45.547365666},
    {300, 2.418000e-11, 53.628043847},
    {310, 2.006659e-11, 53.627910410},
    {320, 1.665293e-11, 53.628113896},
    {330, 1.382000e-11, 53.627944705},
    {340, 1.146899e-11, 53.630193252},
    {350, 9.518000e-12, 53.297986130},
    {360, 7.889718e-12, 53.298000982},
    {370, 6.539993e-12, 53.298014131},
    {380, 5.421171e-12, 53.297999946},
    {390, 4.493750e-12, 53.299025630},
    {400, 3.725000e-12, 58.515023553},
    {410, 3.139836e-12, 58.515023314},
    {420, 2.646596e-12, 58.514936066},
    {430, 2.230839e-12, 58.514976997},
    {440, 1.880394e-12, 58.514804606},
    {450, 1.585000e-12, 60.828045836},
    {460, 1.344721e-12, 60.827969546},
    {470, 1.140867e-12, 60.827968874},
    {480, 9.679164e-13, 60.828023997},
    {490, 8.211845e-13, 60.829874687},
    {500, 6.967000e-13, 63.822030703},
    {510, 5.956595e-13, 63.822008294},
    {520, 5.092726e-13, 63.821951737},
    {530, 4.354141e-13, 63.822051341},
    {540, 3.722672e-13, 63.821897934},
    {550, 3.182782e-13, 63.822058993},
    {560, 2.721192e-13, 63.822039593},
    {570, 2.326545e-13, 63.821922826},
    {580, 1.989132e-13, 63.822123264},
    {590, 1.700654e-13, 63.818447706},
    {600, 1.454000e-13, 71.835198415},
    {610, 1.265049e-13, 71.834887447},
    {620, 1.100652e-13, 71.834890311},
    {630, 9.576189e-14, 71.835020607},
    {640, 8.331736e-14, 71.835005857},
    {650, 7.249003e-14, 71.834984576},
    {660, 6.306974e-14, 71.835040494},
    {670, 5.487365e-14, 71.834987160},
    {680, 4.774266e-14, 71.834951919},
    {690, 4.153836e-14, 71.830281000},
    {700, 3.614000e-14, 88.667061505},
    {710, 3.228552e-14, 88.666892955},
    {720, 2.884213e-14, 88.667124862},
    {730, 2.576600e-14, 88.667065928},
    {740, 2.301795e-14, 88.667033487},
    {750, 2.056299e-14, 88.666961433},
    {760, 1.836986e-14, 88.666644969},
    {770, 1.641063e-14, 88.667133802},
    {780, 1.466037e-14, 88.666995659},
    {790, 1.309678e-14, 88.670124588},
    {800, 1.170000e-14, 124.640585933},
    {810, 1.079797e-14, 124.639427809},
    {820, 9.965476e-15, 124.639932173},
    {830, 9.197168e-15, 124.640075204},
    {840, 8.488095e-15, 124.640011892},
    {850, 7.833689e-15, 124.639863952},
    {860, 7.229735e-15, 124.640085688},
    {870, 6.672345e-15, 124.640078362},
    {880, 6.157928e-15, 124.639819463},
    {890, 5.683170e-15, 124.635544173},
    {900, 5.245000e-15, 181.049828940},
    {910, 4.963156e-15, 181.050458319},
    {920, 4.696458e-15, 181.049596703},
    {930, 4.444090e-15, 181.050220083},
    {940, 4.205284e-15, 181.049897053},
    {950, 3.979310e-15, 181.050003647},
    {960, 3.765479e-15, 181.049674290},
    {970, 3.563138e-15, 181.050691120},
    {980, 3.371671e-15, 181.050100496},
    {990, 3.190492e-15, 180.997158454},
    {1000, 3.019000e-15, 180.997158454},
};
}  // namespace detail

inline AtmosphereModel AtmosphereModel::standard() {
  AtmosphereModel m;
  for (const auto& row : detail::kStandardTable) {
    m.nodes.push_back({row.alt_km * 1e3, row.rho, row.h_km * 1e3});
  }
  return m;
}

inline constexpr std::string_view kAtmosphereCsvHeader = "ALT_KM,RHO_KG_M3,SCALE_HEIGHT_KM";

/// Reads a base table; index-modulation coefficients keep their defaults.
inline AtmosphereModel parse_atmosphere(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError("atmosphere CSV: missing header", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kAtmosphereCsvHeader) throw ParseError("atmosphere CSV: unexpected header", 1);
  AtmosphereModel m;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 3) throw ParseError("atmosphere CSV: expected 3 fields", lineno);
    AtmosphereNode n;
    n.alt = detail::parse_number(f[0], "ALT_KM", lineno) * 1e3;
    n.rho = detail::parse_number(f[1], "RHO_KG_M3", lineno);
    n.scale_height = detail::parse_number(f[2], "SCALE_HEIGHT_KM", lineno) * 1e3;
    m.nodes.push_back(n);
  }
  m.validate();
  return m;
}

inline AtmosphereModel load_atmosphere(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open atmosphere table: " + path);
  return parse_atmosphere(in);
}

/// Density at a geodetic point for the given indices.
inline double density(const GeodeticPoint& point, double f107, double ap, const AtmosphereModel& model) {
  return model.base_density(point.alt) * model.modulation(f107, ap);
}

struct DragConfig {
  double cb = 0.05;      // m^2/kg, a_d = rho v^2 Cb
  double c_drag = 1.0;
};

/// Drag acceleration c_drag * rho * |v_rel|^2 * Cb along -v_rel, v_rel = v - omega_e x r.
inline Vec3 drag_accel(const StateECI& state, double rho, const DragConfig& cfg) {
  const Vec3 w(0.0, 0.0, constants::kEarthRate);
  const Vec3 vrel = state.v - w.cross(state.r);
  const double vn = vrel.norm();
  if (vn < 1.0 || rho == 0.0) return Vec3::Zero();
  return -cfg.c_drag * rho * cfg.cb * vn * vrel;
}

inline double atmosphere_relative_speed(const StateECI& state) {
  const Vec3 w(0.0, 0.0, constants::kEarthRate);
  return (state.v - w.cross(state.r)).norm();
}

enum class IndexMode { Nominal, Observed };

/// O(1) index lookup over a series: nominal averages and observed values are
/// tabulated once per day / per 3-hour slot.
class IndexProvider {
 public:
  explicit IndexProvider(std::shared_ptr<const IndexSeries> series) : series_(std::move(series)) {
    if (!series_ || series_->empty()) throw CoverageError("index provider: empty series");
    first_day_ = series_->first_day();
    const long n = series_->last_day() - first_day_ + 1;
    f_obs_.assign(static_cast<std::size_t>(n), kMissing);
    f_nom_.assign(static_cast<std::size_t>(n), kMissing);
    ap_obs_.assign(static_cast<std::size_t>(8 * n), kMissing);
    ap_nom_.assign(static_cast<std::size_t>(8 * n), kMissing);
    for (long d = 0; d < n; ++d) {
      const long day = first_day_ + d;
      if (!series_->covers(day)) continue;
      const auto& rec = series_->day(day);
      f_obs_[d] = rec.f107;
      for (int j = 0; j < 8; ++j) ap_obs_[8 * d + j] = rec.ap[j];
      try {
        f_nom_[d] = nominal_f107(*series_, Epoch{static_cast<double>(day)});
      } catch (const CoverageError&) {
      }
      for (int j = 0; j < 8; ++j) {
        try {
          const Epoch slot_mid{static_cast<double>(day) - 0.5 + (j + 0.5) / 8.0};
          ap_nom_[8 * d + j] = nominal_ap(*series_, slot_mid);
        } catch (const CoverageError&) {
        }
      }
    }
  }

  const IndexSeries& series() const { return *series_; }

  double f107(const Epoch& t, IndexMode mode) const {
    const long d = civil_day(t) - first_day_;
    const auto& tab = mode == IndexMode::Nominal ? f_nom_ : f_obs_;
    if (d < 0 || d >= static_cast<long>(tab.size()) || tab[d] == kMissing) {
      throw CoverageError("index provider: F10.7 not available for " + format_date(civil_day(t)));
    }
    return tab[d];
  }

  double ap(const Epoch& t, IndexMode mode) const {
    const long s = ap_slot(t) - 8 * first_day_;
    const auto& tab = mode == IndexMode::Nominal ? ap_nom_ : ap_obs_;
    if (s < 0 || s >= static_cast<long>(tab.size()) || tab[s] == kMissing) {
      throw CoverageError("index provider: Ap not available for " + format_date(civil_day(t)));
    }
    return tab[s];
  }

 private:
  static constexpr double kMissing = -1.0;
  std::shared_ptr<const IndexSeries> series_;
  long first_day_ = 0;
  std::vector<double> f_obs_, f_nom_, ap_obs_, ap_nom_;
};

/// Everything the equations of motion need: gravity, atmosphere, index source,
/// drag multiplier and the case epoch.
struct Environment {
  GravityModel gravity = GravityModel::nominal();
  AtmosphereModel atmosphere = AtmosphereModel::standard();
  std::shared_ptr<const IndexProvider> indices;  // null: reference indices
  IndexMode mode = IndexMode::Nominal;
  double c_drag = 1.0;
  Epoch epoch;
  // Optional extra density multiplier as a function of elapsed time (test storms).
  std::function<double(double)> density_scale;

  double f107_at(double t) const {
    return indices ? indices->f107(epoch.plus_seconds(t), mode) : atmosphere.f107_ref;
  }
  double ap_at(double t) const {
    return indices ? indices->ap(epoch.plus_seconds(t), mode) : atmosphere.ap_ref;
  }

  double density_at_altitude(double alt, double t) const {
    double rho = atmosphere.base_density(alt) * atmosphere.modulation(f107_at(t), ap_at(t));
    if (density_scale) rho *= density_scale(t);
    return rho;
  }

  double density_at(const Vec3& r_eci, double t) const {
    return density_at_altitude(altitude_eci(r_eci), t);
  }

  /// Total acceleration for ballistic coefficient cb.
  Vec3 acceleration(const StateECI& s, double cb) const {
    Vec3 a = gravity_accel(s.r, gravity);
    if (cb != 0.0) {
      const double rho = density_at(s.r, s.t);
      a += drag_accel(s, rho, DragConfig{cb, c_drag});
    }
    return a;
  }
};

}  // namespace dragdeorbit
