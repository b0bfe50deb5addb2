#pragma once

// Linear time-varying MPC tracking the guidance trajectory with the ballistic
// coefficient as the single input.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <vector>

#include "elements.hpp"
#include "environment.hpp"
#include "error.hpp"
#include "propagator.hpp"
#include "qpsolve.hpp"
#include "relmodel.hpp"

namespace dragdeorbit {

struct MPCConfig {
  int horizon = 36;
  int substeps = 5;
  Mat4 q_stage = Vec4(10.0, 1.0, 0.0, 0.0).asDiagonal();
  double r_input = 1e10;
  double cb_min = 0.025;
  double cb_max = 0.1;
  double nominal_dt = 600.0;  // the actual step divides the guidance duration evenly
  double qp_tol = 1e-8;
  int qp_max_iter = -1;       // -1: 10 n

  void validate() const {
    if (horizon < 1) throw RangeError("MPCConfig: horizon must be >= 1");
    if (substeps < 1) throw RangeError("MPCConfig: substeps must be >= 1");
    if (!(r_input >= 0.0)) throw RangeError("MPCConfig: input weight must be >= 0");
    if (!(cb_min > 0.0 && cb_min < cb_max)) throw RangeError("MPCConfig: need 0 < cb_min < cb_max");
    if (!(nominal_dt > 0.0)) throw RangeError("MPCConfig: step must be positive");
    Eigen::SelfAdjointEigenSolver<Mat4> es(q_stage);
    if (es.eigenvalues().minCoeff() < -1e-12 * std::max(1.0, q_stage.norm())) {
      throw RangeError("MPCConfig: stage weight must be PSD");
    }
  }
};

/// Number of control steps over a guidance duration: the nearest integer to duration / nominal_dt.
inline int control_step_count(double duration, double nominal_dt) {
  return std::max(1, static_cast<int>(std::lround(duration / nominal_dt)));
}

/// Linearisation context at time t along the guidance.
inline LTVContext guidance_context(const Trajectory& guidance, const Environment& nominal, double t) {
  const StateECI g = guidance.state_at(t);
  const auto el = state_to_elements(g, nominal.gravity.mu);
  LTVContext ctx;
  ctx.a = el.a;
  ctx.i = el.i;
  ctx.rho_nom = nominal.density_at(g.r, t);
  ctx.v = atmosphere_relative_speed(g);
  ctx.cb_nom = guidance.cb_at(t);
  ctx.mu = nominal.gravity.mu;
  ctx.re = nominal.gravity.re;
  ctx.j2 = nominal.gravity.j2();
  return ctx;
}

/// Discretised dynamics for one control step, split by input channel. Because
/// every input enters through the in-track rate only, the substep ZOH is linear
/// in the per-substep input gains, so one pass yields all channels exactly.
struct StepModel {
  double t0 = 0.0;
  double dt = 0.0;
  Mat4 ad = Mat4::Identity();
  Vec4 g_rho = Vec4::Zero();    // response to a held dCb (gain -rho_nom v^2 per substep)
  Vec4 g_rhocb = Vec4::Zero();  // response to a held c (gain -rho_nom v^2 Cb_g per substep)
  double rho_nom = 0.0;         // at step start
  double cb_g_start = 0.0;      // guidance Cb just after t0
  double cb_g_min = 0.0;        // guidance Cb range over the step
  double cb_g_max = 0.0;

  /// Controller form: x+ = Ad x + B1d dCb + B2d drho, with drho = c rho_nom(t0).
  DiscreteModel<4, 1> control_model(double c) const {
    DiscreteModel<4, 1> m;
    m.ad = ad;
    m.bd = (1.0 + c) * g_rho;
    m.dt = dt;
    return m;
  }
  Vec4 disturbance_column() const { return rho_nom > 0.0 ? Vec4(g_rhocb / rho_nom) : Vec4::Zero(); }

  /// Filter form for the augmented state [x; c] with dCb held over the step.
  DiscreteModel<5, 1> kf_model(double dcb) const {
    DiscreteModel<5, 1> m;
    m.ad.setIdentity();
    m.ad.topLeftCorner<4, 4>() = ad;
    m.ad.topRightCorner<4, 1>() = g_rhocb + dcb * g_rho;
    m.bd.setZero();
    m.bd.topRows<4>() = g_rho;
    m.dt = dt;
    return m;
  }
};

inline StepModel build_step_model(const Trajectory& guidance, const Environment& nominal, double t0, double dt,
                                  int substeps) {
  StepModel sm;
  sm.t0 = t0;
  sm.dt = dt;
  const double delta = dt / substeps;
  const Vec4 e4 = Vec4::UnitW();
  sm.cb_g_start = sm.cb_g_min = sm.cb_g_max = guidance.cb_at(t0);
  for (int j = 0; j < substeps; ++j) {
    const double ts = t0 + j * delta;
    const LTVContext ctx = guidance_context(guidance, nominal, ts);
    if (j == 0) sm.rho_nom = ctx.rho_nom;
    sm.cb_g_min = std::min(sm.cb_g_min, ctx.cb_nom);
    sm.cb_g_max = std::max(sm.cb_g_max, ctx.cb_nom);
    const auto sub = zoh_exact<4, 1>(a_matrix(ctx), Eigen::Matrix<double, 4, 1>(e4), delta);
    const double q = ctx.rho_nom * ctx.v * ctx.v;
    sm.ad = sub.ad * sm.ad;
    sm.g_rho = sub.ad * sm.g_rho - q * sub.bd;
    sm.g_rhocb = sub.ad * sm.g_rhocb - q * ctx.cb_nom * sub.bd;
  }
  // A swap strictly inside the step also constrains the command held across it.
  const double cb_end = guidance.cb_at(std::nextafter(t0 + dt, t0));
  sm.cb_g_min = std::min(sm.cb_g_min, cb_end);
  sm.cb_g_max = std::max(sm.cb_g_max, cb_end);
  return sm;
}

/// Per-step models over the whole guidance span, computed once per guidance trajectory.
struct TrackingModel {
  double dt = 0.0;
  std::vector<StepModel> steps;

  int size() const { return static_cast<int>(steps.size()); }
  double t_end() const { return steps.back().t0 + steps.back().dt; }

  static TrackingModel build(const Trajectory& guidance, const Environment& nominal, const MPCConfig& cfg) {
    TrackingModel tm;
    const int k_total = control_step_count(guidance.duration(), cfg.nominal_dt);
    tm.dt = guidance.duration() / k_total;
    tm.steps.reserve(static_cast<std::size_t>(k_total));
    for (int k = 0; k < k_total; ++k) {
      tm.steps.push_back(build_step_model(guidance, nominal, guidance.t0() + k * tm.dt, tm.dt, cfg.substeps));
    }
    return tm;
  }
};

struct HorizonModel {
  std::vector<Mat4> ad;
  std::vector<Vec4> b1d;
  std::vector<Vec4> b2d;
  std::vector<double> drho;
  std::vector<double> lb;
  std::vector<double> ub;

  int size() const { return static_cast<int>(ad.size()); }
};

/// Input bounds for a step over which the guidance Cb spans [cb_g_min, cb_g_max].
inline std::pair<double, double> input_bounds(double cb_g_min, double cb_g_max, const MPCConfig& cfg) {
  return {cfg.cb_min - cb_g_min, cfg.cb_max - cb_g_max};
}

/// Prediction model from step k with the density error c held constant (so the
/// predicted density error follows the nominal density). Shrinks at guidance end.
inline HorizonModel build_horizon(const TrackingModel& tm, int k, double c, const MPCConfig& cfg) {
  if (k < 0 || k >= tm.size()) throw RangeError("build_horizon: step outside the guidance span");
  const int n = std::min(cfg.horizon, tm.size() - k);
  HorizonModel hm;
  hm.ad.reserve(n);
  for (int j = 0; j < n; ++j) {
    const StepModel& s = tm.steps[static_cast<std::size_t>(k + j)];
    hm.ad.push_back(s.ad);
    hm.b1d.push_back((1.0 + c) * s.g_rho);
    hm.b2d.push_back(s.disturbance_column());
    hm.drho.push_back(c * s.rho_nom);
    const auto [lo, hi] = input_bounds(s.cb_g_min, s.cb_g_max, cfg);
    hm.lb.push_back(lo);
    hm.ub.push_back(std::max(lo, hi));
  }
  return hm;
}

struct TerminalWeight {
  int n_eff = 0;
  Mat4 q_terminal = Mat4::Zero();
  bool riccati = false;       // true when the DARE solution is in use
  bool dare_failed = false;   // fell back to the stage weight
};

/// Effective horizon and terminal weight: DARE solution while the full horizon
/// ends before the guidance does, the stage weight once it reaches the end.
inline TerminalWeight shrink_and_terminal(const TrackingModel& tm, int k, const HorizonModel& hm,
                                          const MPCConfig& cfg) {
  TerminalWeight tw;
  tw.n_eff = hm.size();
  tw.q_terminal = cfg.q_stage;
  if (tw.n_eff == cfg.horizon && k + cfg.horizon < tm.size()) {
    const Eigen::MatrixXd r = Eigen::MatrixXd::Constant(1, 1, cfg.r_input);
    const auto res = solve_dare(hm.ad.front(), hm.b1d.front(), cfg.q_stage, r);
    if (res.converged) {
      tw.q_terminal = res.P;
      tw.riccati = true;
    } else {
      tw.dare_failed = true;
    }
  }
  return tw;
}

/// Condensed QP. The stored problem is scaled by `scale` (unit largest Hessian
/// diagonal); the physical cost is qp.objective(U) / scale + constant.
struct CondensedQP {
  BoxQP qp;
  double scale = 1.0;
  double constant = 0.0;

  double physical_objective(const Eigen::VectorXd& u) const { return qp.objective(u) / scale + constant; }
};

namespace detail {

/// Rows R with R'R = Q for a PSD 4x4 weight.
inline Eigen::MatrixXd weight_factor(const Mat4& q) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(0.5 * (q + q.transpose()));
  const double cut = 1e-14 * std::max(1e-300, es.eigenvalues().cwiseAbs().maxCoeff());
  int rank = 0;
  for (int i = 0; i < 4; ++i) rank += es.eigenvalues()(i) > cut ? 1 : 0;
  Eigen::MatrixXd f(rank, 4);
  int row = 0;
  for (int i = 0; i < 4; ++i) {
    if (es.eigenvalues()(i) > cut) f.row(row++) = std::sqrt(es.eigenvalues()(i)) * es.eigenvectors().col(i).transpose();
  }
  return f;
}

}  // namespace detail

/// Eliminates the states: stage cost x'Q x for steps 0..N-1, terminal x_N' Q_N x_N,
/// and r_input * sum (u_{k+1} - u_k)^2.
inline CondensedQP condense(const Vec4& x0, const HorizonModel& hm, const MPCConfig& cfg, const Mat4& q_terminal) {
  const int n = hm.size();
  const Eigen::MatrixXd fs = detail::weight_factor(cfg.q_stage);
  const Eigen::MatrixXd ft = detail::weight_factor(q_terminal);
  const Eigen::Index rows = fs.rows() * n + ft.rows();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(rows, n);
  Eigen::VectorXd s0(rows);
  Eigen::Matrix<double, 4, Eigen::Dynamic> gamma = Eigen::Matrix<double, 4, Eigen::Dynamic>::Zero(4, n);
  Vec4 xf = x0;
  Eigen::Index r = 0;
  for (int j = 0; j <= n; ++j) {
    const Eigen::MatrixXd& f = j < n ? fs : ft;
    if (f.rows() > 0) {
      s.block(r, 0, f.rows(), j) = f * gamma.leftCols(j);
      s0.segment(r, f.rows()) = f * xf;
      r += f.rows();
    }
    if (j < n) {
      gamma.leftCols(j) = hm.ad[j] * gamma.leftCols(j);
      gamma.col(j) = hm.b1d[j];
      xf = hm.ad[j] * xf + hm.b2d[j] * hm.drho[j];
    }
  }
  CondensedQP out;
  Eigen::MatrixXd h = 2.0 * s.transpose() * s;
  Eigen::VectorXd f = 2.0 * s.transpose() * s0;
  for (int j = 0; j + 1 < n; ++j) {
    h(j, j) += 2.0 * cfg.r_input;
    h(j + 1, j + 1) += 2.0 * cfg.r_input;
    h(j, j + 1) -= 2.0 * cfg.r_input;
    h(j + 1, j) -= 2.0 * cfg.r_input;
  }
  const double dmax = h.diagonal().maxCoeff();
  out.scale = dmax > 0.0 ? 1.0 / dmax : 1.0;
  out.constant = s0.squaredNorm();
  out.qp.H = out.scale * 0.5 * (h + h.transpose());
  out.qp.f = out.scale * f;
  out.qp.lb = Eigen::Map<const Eigen::VectorXd>(hm.lb.data(), n);
  out.qp.ub = Eigen::Map<const Eigen::VectorXd>(hm.ub.data(), n);
  return out;
}

/// Predicted state trajectory x_0..x_N for an input sequence (rollout reference).
inline std::vector<Vec4> rollout(const Vec4& x0, const HorizonModel& hm, const Eigen::VectorXd& u) {
  std::vector<Vec4> xs{x0};
  for (int j = 0; j < hm.size(); ++j) xs.push_back(hm.ad[j] * xs.back() + hm.b1d[j] * u(j) + hm.b2d[j] * hm.drho[j]);
  return xs;
}

struct Command {
  double dcb = 0.0;
  double cb_total = 0.0;  // guidance Cb at step start plus dcb, clamped
  double t_apply = 0.0;
  int qp_iterations = 0;
  QPStatus qp_status = QPStatus::Optimal;
  int n_eff = 0;
  bool dare_failed = false;
};

/// Receding-horizon controller; owns its warm start.
class MpcController {
 public:
  explicit MpcController(MPCConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const MPCConfig& config() const { return cfg_; }

  /// Command for step k from the estimated relative state and density error c.
  Command step(const Vec4& x_hat, double c, const TrackingModel& tm, int k) {
    const HorizonModel hm = build_horizon(tm, k, c, cfg_);
    const TerminalWeight tw = shrink_and_terminal(tm, k, hm, cfg_);
    const CondensedQP cq = condense(x_hat, hm, cfg_, tw.q_terminal);
    std::optional<Eigen::VectorXd> warm;
    if (warm_.size() > 1) {
      Eigen::VectorXd w(hm.size());
      for (int j = 0; j < hm.size(); ++j) w(j) = warm_(std::min<Eigen::Index>(j + 1, warm_.size() - 1));
      warm = w;
    }
    const QPSolution sol = solve_box_qp(cq.qp, cfg_.qp_tol, cfg_.qp_max_iter, warm);
    warm_ = sol.x;
    last_plan_ = sol.x;

    const StepModel& s = tm.steps[static_cast<std::size_t>(k)];
    Command cmd;
    cmd.t_apply = s.t0;
    cmd.dcb = sol.x(0);
    cmd.cb_total = std::clamp(s.cb_g_start + cmd.dcb, cfg_.cb_min, cfg_.cb_max);
    cmd.qp_iterations = sol.iterations;
    cmd.qp_status = sol.status;
    cmd.n_eff = tw.n_eff;
    cmd.dare_failed = tw.dare_failed;
    return cmd;
  }

  const Eigen::VectorXd& last_plan() const { return last_plan_; }
  void reset() { warm_.resize(0); }

 private:
  MPCConfig cfg_;
  Eigen::VectorXd warm_;
  Eigen::VectorXd last_plan_;
};

/// Total Cb applied at time t within a step: guidance value plus the held command, clamped.
inline double applied_cb(double cb_g, double dcb, const MPCConfig& cfg) {
  return std::clamp(cb_g + dcb, cfg.cb_min, cfg.cb_max);
}

inline constexpr const char* kControlTraceHeader =
    "T_S,X_R_M,X_T_M,X_RDOT_M_S,X_TDOT_M_S,C_DRHO,DCB_M2_KG,CB_TOTAL_M2_KG,QP_ITER,QP_STATUS,N_EFF";

inline void write_control_trace_row(std::ostream& out, const Vec4& x_hat, double c, const Command& cmd) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d,%s,%d\n", cmd.t_apply,
                x_hat(0), x_hat(1), x_hat(2), x_hat(3), c, cmd.dcb, cmd.cb_total, cmd.qp_iterations,
                cmd.qp_status == QPStatus::Optimal ? "optimal" : "max-iter", cmd.n_eff);
  out << buf;
}

}  // namespace dragdeorbit
