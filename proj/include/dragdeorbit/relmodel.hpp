#pragma once

// Schweighart-Sedwick linearised radial/in-track relative motion with drag
// input channels, and zero-order-hold discretisation with substeps.

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "constants.hpp"

namespace dragdeorbit {

using Mat5 = Eigen::Matrix<double, 5, 5>;
using Vec5 = Eigen::Matrix<double, 5, 1>;

/// Parameters the linear model is evaluated at (sampled from the guidance).
struct LTVContext {
  double a = 6853e3;        // guidance semi-major axis [m]
  double i = 0.0;           // inclination [rad]
  double rho_nom = 0.0;     // nominal density [kg/m^3]
  double v = 7.6e3;         // atmosphere-relative speed [m/s]
  double cb_nom = 0.05;     // guidance ballistic coefficient [m^2/kg]
  double dcb = 0.0;         // control [m^2/kg]
  double drho = 0.0;        // density error [kg/m^3]
  double mu = constants::kMu;
  double j2 = constants::kJ2;
  double re = constants::kReGravity;
};

struct SsCoefficients {
  double n, c, d, b;
};

inline SsCoefficients ss_coefficients(const LTVContext& ctx) {
  SsCoefficients k;
  k.n = std::sqrt(ctx.mu / (ctx.a * ctx.a * ctx.a));
  k.c = std::sqrt(1.0 + 3.0 * ctx.j2 * ctx.re * ctx.re / (8.0 * ctx.a * ctx.a) * (1.0 + 3.0 * std::cos(2.0 * ctx.i)));
  k.d = 2.0 * k.n * k.c;
  k.b = (5.0 * k.c * k.c - 2.0) * k.n * k.n;
  return k;
}

/// Continuous relative-motion matrix for x = [radial, in-track, radial rate, in-track rate].
inline Eigen::Matrix4d a_matrix(const LTVContext& ctx) {
  const auto k = ss_coefficients(ctx);
  Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
  a(0, 2) = 1.0;
  a(1, 3) = 1.0;
  a(2, 0) = k.b;
  a(2, 3) = k.d;
  a(3, 2) = -k.d;
  return a;
}

/// Filter form: state augmented with the normalised density error c.
inline std::pair<Mat5, Vec5> kf_continuous(const LTVContext& ctx) {
  Mat5 a = Mat5::Zero();
  a.topLeftCorner<4, 4>() = a_matrix(ctx);
  const double q = ctx.rho_nom * ctx.v * ctx.v;
  a(3, 4) = -q * (ctx.cb_nom + ctx.dcb);
  Vec5 b = Vec5::Zero();
  b(3) = -q;
  return {a, b};
}

struct MpcContinuous {
  Eigen::Matrix4d a;
  Eigen::Vector4d b_control;      // multiplies dCb
  Eigen::Vector4d b_disturbance;  // multiplies drho
};

/// Controller form: dCb channel carries (rho_nom + drho) v^2, drho channel v^2 Cb_nom.
inline MpcContinuous mpc_continuous(const LTVContext& ctx) {
  MpcContinuous m;
  m.a = a_matrix(ctx);
  m.b_control.setZero();
  m.b_control(3) = -(ctx.rho_nom + ctx.drho) * ctx.v * ctx.v;
  m.b_disturbance.setZero();
  m.b_disturbance(3) = -ctx.v * ctx.v * ctx.cb_nom;
  return m;
}

/// Matrix exponential by scaling and squaring with a [6/6] Pade approximant.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime> expm(
    const Eigen::MatrixBase<Derived>& m) {
  using Mat = Eigen::Matrix<typename Derived::Scalar, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime>;
  static constexpr double c[] = {1.0,          1.0 / 2.0,      5.0 / 44.0,       1.0 / 66.0,
                                 1.0 / 792.0,  1.0 / 15840.0,  1.0 / 665280.0};
  const double norm = m.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / 0.5))));
  const Mat x = m / std::ldexp(1.0, squarings);
  const Mat ident = Mat::Identity(m.rows(), m.cols());
  Mat xk = ident;
  Mat num = ident;
  Mat den = ident;
  double sign = 1.0;
  for (int k = 1; k <= 6; ++k) {
    xk = xk * x;
    sign = -sign;
    num += c[k] * xk;
    den += sign * c[k] * xk;
  }
  Mat r = den.partialPivLu().solve(num);
  for (int k = 0; k < squarings; ++k) r = r * r;
  return r;
}

/// Discrete model x+ = Ad x + Bd u with inputs held over dt.
template <int Nx, int Nu>
struct DiscreteModel {
  Eigen::Matrix<double, Nx, Nx> ad;
  Eigen::Matrix<double, Nx, Nu> bd;
  double dt = 0.0;
};

/// Exact ZOH of (A, B) over dt via the augmented exponential of [[A, B], [0, 0]].
template <int Nx, int Nu>
DiscreteModel<Nx, Nu> zoh_exact(const Eigen::Matrix<double, Nx, Nx>& a,
                                const Eigen::Matrix<double, Nx, Nu>& b, double dt) {
  Eigen::Matrix<double, Nx + Nu, Nx + Nu> m = Eigen::Matrix<double, Nx + Nu, Nx + Nu>::Zero();
  m.template topLeftCorner<Nx, Nx>() = a * dt;
  m.template topRightCorner<Nx, Nu>() = b * dt;
  const auto phi = expm(m);
  DiscreteModel<Nx, Nu> out;
  out.ad = phi.template topLeftCorner<Nx, Nx>();
  out.bd = phi.template topRightCorner<Nx, Nu>();
  out.dt = dt;
  return out;
}

/// Composes substep models (earliest first) with the input held across all of them.
template <int Nx, int Nu>
DiscreteModel<Nx, Nu> compose(const DiscreteModel<Nx, Nu>& first, const DiscreteModel<Nx, Nu>& second) {
  DiscreteModel<Nx, Nu> out;
  out.ad = second.ad * first.ad;
  out.bd = second.ad * first.bd + second.bd;
  out.dt = first.dt + second.dt;
  return out;
}

/// ZOH over dt split into n_substeps, re-evaluating (A, B) at each substep start.
/// `model_at(j)` returns the continuous pair for substep j.
template <int Nx, int Nu, typename ModelAt>
DiscreteModel<Nx, Nu> zoh_substeps(ModelAt&& model_at, double dt, int n_substeps) {
  const double delta = dt / n_substeps;
  DiscreteModel<Nx, Nu> acc;
  acc.ad.setIdentity();
  acc.bd.setZero();
  acc.dt = 0.0;
  for (int j = 0; j < n_substeps; ++j) {
    const auto [a, b] = model_at(j);
    acc = compose(acc, zoh_exact<Nx, Nu>(a, b, delta));
  }
  return acc;
}

/// Constant-parameter ZOH with substeps.
template <int Nx, int Nu>
DiscreteModel<Nx, Nu> zoh(const Eigen::Matrix<double, Nx, Nx>& a, const Eigen::Matrix<double, Nx, Nu>& b,
                          double dt, int n_substeps = 1) {
  return zoh_substeps<Nx, Nu>([&](int) { return std::make_pair(a, b); }, dt, n_substeps);
}

}  // namespace dragdeorbit
