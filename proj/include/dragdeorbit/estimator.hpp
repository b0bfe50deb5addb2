#pragma once

// Extended Kalman filter on the relative state augmented with the normalised
// density prediction error c (density error = c * rho_nom).

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "error.hpp"
#include "frames.hpp"
#include "relmodel.hpp"

namespace dragdeorbit {

using Mat3x3 = Eigen::Matrix3d;
using Mat5x3 = Eigen::Matrix<double, 5, 3>;

struct FilterState {
  Vec5 x = Vec5::Zero();  // [radial, in-track, radial rate, in-track rate, c]
  Mat5 P = Mat5::Identity();

  double c() const { return x(4); }
  Vec4 dynamic() const { return x.head<4>(); }
};

struct NoiseConfig {
  Mat3x3 W;  // process noise on (radial rate, in-track rate, c)
  Mat4 V;    // measurement noise
  Mat5x3 L;  // noise injection

  static NoiseConfig defaults(double sigma_pos = 5.0, double sigma_vel = 0.05) {
    NoiseConfig n;
    n.W = Eigen::Vector3d(1e-5, 1e-6, 2e-5).asDiagonal();
    n.V = Vec4(sigma_pos * sigma_pos, sigma_pos * sigma_pos, sigma_vel * sigma_vel, sigma_vel * sigma_vel)
              .asDiagonal();
    n.L.setZero();
    n.L.bottomRows<3>().setIdentity();
    return n;
  }
};

struct Measurement {
  Vec4 y = Vec4::Zero();
  double t = 0.0;
};

inline Eigen::Matrix<double, 4, 5> measurement_matrix() {
  Eigen::Matrix<double, 4, 5> h = Eigen::Matrix<double, 4, 5>::Zero();
  h.leftCols<4>().setIdentity();
  return h;
}

inline Mat5 symmetrize(const Mat5& p) { return 0.5 * (p + p.transpose()); }

/// Symmetric within 1e-12 and minimum eigenvalue above -1e-9 trace.
inline bool covariance_valid(const Mat5& p) {
  if (!p.allFinite()) return false;
  if ((p - p.transpose()).cwiseAbs().maxCoeff() >= 1e-12 * std::max(1.0, p.cwiseAbs().maxCoeff())) return false;
  Eigen::SelfAdjointEigenSolver<Mat5> es(p, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() > -1e-9 * std::abs(p.trace());
}

/// Starts from a measured relative state with zero density error.
inline FilterState initialize_filter(const Measurement& m, const NoiseConfig& noise, double c_variance = 0.25) {
  FilterState s;
  s.x.head<4>() = m.y;
  s.x(4) = 0.0;
  s.P.setZero();
  s.P.topLeftCorner<4, 4>() = noise.V;
  s.P(4, 4) = c_variance;
  return s;
}

inline FilterState time_update(const FilterState& s, const DiscreteModel<5, 1>& model, double dcb,
                               const NoiseConfig& noise) {
  FilterState out;
  out.x = model.ad * s.x + model.bd * dcb;
  out.P = symmetrize(model.ad * s.P * model.ad.transpose() + noise.L * noise.W * noise.L.transpose());
  return out;
}

/// Joseph-form update. `innovation`, when given, receives y - H x-.
inline FilterState measurement_update(const FilterState& s, const Measurement& m, const NoiseConfig& noise,
                                      Vec4* innovation = nullptr) {
  const auto h = measurement_matrix();
  const Vec4 nu = m.y - h * s.x;
  const Mat4 sm = h * s.P * h.transpose() + noise.V;
  Eigen::LLT<Mat4> llt(sm);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrixError("measurement_update: innovation covariance is not positive definite");
  }
  const Eigen::Matrix<double, 5, 4> k = llt.solve(h * s.P).transpose();
  FilterState out;
  out.x = s.x + k * nu;
  const Mat5 ikh = Mat5::Identity() - k * h;
  out.P = symmetrize(ikh * s.P * ikh.transpose() + k * noise.V * k.transpose());
  if (innovation) *innovation = nu;
  return out;
}

inline double extract_delta_rho(const FilterState& s, double rho_nom) {
  if (rho_nom < 0.0) throw RangeError("extract_delta_rho: negative nominal density");
  return s.c() * rho_nom;
}

inline constexpr const char* kFilterTraceHeader =
    "T_S,X_R_M,X_T_M,X_RDOT_M_S,X_TDOT_M_S,C_DRHO,P_R,P_T,P_RDOT,P_TDOT,P_C,NU_R_M,NU_T_M,NU_RDOT_M_S,NU_TDOT_M_S";

inline void write_filter_trace_row(std::ostream& out, double t, const FilterState& s, const Vec4& nu) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n",
                t, s.x(0), s.x(1), s.x(2), s.x(3), s.x(4), s.P(0, 0), s.P(1, 1), s.P(2, 2), s.P(3, 3), s.P(4, 4),
                nu(0), nu(1), nu(2), nu(3));
  out << buf;
}

}  // namespace dragdeorbit
