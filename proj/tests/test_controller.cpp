#include <gtest/gtest.h>

#include <random>

#include "dragdeorbit/controller.hpp"
#include "dragdeorbit/elements.hpp"
#include "oracles.hpp"

using namespace dragdeorbit;

namespace {

LTVContext base_ctx(double rho = 2e-11, double cb = 0.05) {
  LTVContext c;
  c.a = 6.7e6;
  c.i = 0.9;
  c.rho_nom = rho;
  c.v = 7.7e3;
  c.cb_nom = cb;
  return c;
}

StepModel synthetic_step(double t0, double dt, const LTVContext& ctx) {
  StepModel s;
  s.t0 = t0;
  s.dt = dt;
  const auto d = zoh<4, 1>(a_matrix(ctx), Eigen::Matrix<double, 4, 1>(Vec4::UnitW()), dt, 1);
  const double q = ctx.rho_nom * ctx.v * ctx.v;
  s.ad = d.ad;
  s.g_rho = -q * d.bd;
  s.g_rhocb = -q * ctx.cb_nom * d.bd;
  s.rho_nom = ctx.rho_nom;
  s.cb_g_start = s.cb_g_min = s.cb_g_max = ctx.cb_nom;
  return s;
}

TrackingModel synthetic_tm(int n, double dt = 600.0, double cb = 0.05) {
  TrackingModel tm;
  tm.dt = dt;
  for (int k = 0; k < n; ++k) {
    auto ctx = base_ctx(2e-11 * (1.0 + 0.002 * k), cb);
    tm.steps.push_back(synthetic_step(k * dt, dt, ctx));
  }
  return tm;
}

double rollout_cost(const Vec4& x0, const HorizonModel& hm, const Eigen::VectorXd& u, const MPCConfig& cfg,
                    const Mat4& qn) {
  const auto xs = rollout(x0, hm, u);
  double j = 0.0;
  for (int k = 0; k < hm.size(); ++k) j += xs[k].dot(cfg.q_stage * xs[k]);
  j += xs.back().dot(qn * xs.back());
  for (int k = 0; k + 1 < hm.size(); ++k) j += cfg.r_input * (u(k + 1) - u(k)) * (u(k + 1) - u(k));
  return j;
}

}  // namespace

TEST(Controller, InputBounds) {
  MPCConfig cfg;
  auto [lo, hi] = input_bounds(0.05, 0.05, cfg);
  EXPECT_NEAR(lo, -0.025, 1e-15);
  EXPECT_NEAR(hi, 0.05, 1e-15);
  std::tie(lo, hi) = input_bounds(0.04, 0.06, cfg);
  EXPECT_NEAR(lo, -0.015, 1e-15);
  EXPECT_NEAR(hi, 0.04, 1e-15);
}

TEST(Controller, SwapInsideStepUsesTighterBounds) {
  // Short guidance with a swap at mid-step: the step containing it sees both values.
  OrbitalElements el;
  el.a = constants::kWgs84A + 300e3;
  el.i = 0.9;
  const auto s0 = elements_to_state(el);
  Environment env;
  const auto traj = propagate(s0, CbProfile::swap(0.04, 0.06, 900.0), env, 1800.0);
  const auto sm = build_step_model(traj, env, 600.0, 600.0, 5);
  EXPECT_DOUBLE_EQ(sm.cb_g_min, 0.04);
  EXPECT_DOUBLE_EQ(sm.cb_g_max, 0.06);
  MPCConfig cfg;
  const auto [lo, hi] = input_bounds(sm.cb_g_min, sm.cb_g_max, cfg);
  EXPECT_NEAR(lo, -0.015, 1e-15);
  EXPECT_NEAR(hi, 0.04, 1e-15);
}

TEST(Controller, StepModelMatchesSubstepZoh) {
  OrbitalElements el;
  el.a = constants::kWgs84A + 250e3;
  el.i = 0.9;
  const auto s0 = elements_to_state(el);
  Environment env;
  const auto traj = propagate(s0, CbProfile(0.03), env, 4000.0);
  const double t0 = 1000.0, dt = 600.0, dcb = 0.004;
  const int nss = 5;
  const auto sm = build_step_model(traj, env, t0, dt, nss);
  const auto kf = zoh_substeps<5, 1>(
      [&](int j) {
        auto ctx = guidance_context(traj, env, t0 + j * dt / nss);
        ctx.dcb = dcb;
        return kf_continuous(ctx);
      },
      dt, nss);
  const auto mine = sm.kf_model(dcb);
  EXPECT_LT((mine.ad - kf.ad).norm(), 1e-9 * kf.ad.norm());
  EXPECT_LT((mine.bd - kf.bd).norm(), 1e-9 * kf.bd.norm());
  // Controller channels against the MPC continuous form with drho held at c * rho_nom.
  const double c = 0.2;
  const double rho0 = guidance_context(traj, env, t0).rho_nom;
  const auto b1 = zoh_substeps<4, 1>(
      [&](int j) {
        auto ctx = guidance_context(traj, env, t0 + j * dt / nss);
        ctx.drho = c * ctx.rho_nom;
        const auto m = mpc_continuous(ctx);
        return std::make_pair(m.a, Eigen::Matrix<double, 4, 1>(m.b_control));
      },
      dt, nss);
  EXPECT_LT((sm.control_model(c).bd - b1.bd).norm(), 1e-9 * b1.bd.norm());
  // Disturbance response to c * rho_nom(t) over the step equals B2d * (c rho_nom(t0)).
  Eigen::Matrix<double, 4, 1> resp = Eigen::Matrix<double, 4, 1>::Zero();
  for (int j = 0; j < nss; ++j) {
    const auto ctx = guidance_context(traj, env, t0 + j * dt / nss);
    const auto m = mpc_continuous(ctx);
    const auto sub = zoh_exact<4, 1>(m.a, Eigen::Matrix<double, 4, 1>(m.b_disturbance * c * ctx.rho_nom), dt / nss);
    resp = sub.ad * resp + sub.bd;
  }
  EXPECT_LT((sm.disturbance_column() * c * rho0 - resp).norm(), 1e-9 * resp.norm());
}

TEST(Controller, HorizonZeroDensityError) {
  const auto tm = synthetic_tm(50);
  MPCConfig cfg;
  const auto hm = build_horizon(tm, 0, 0.0, cfg);
  EXPECT_EQ(hm.size(), 36);
  for (double d : hm.drho) EXPECT_EQ(d, 0.0);
  const auto hm2 = build_horizon(tm, 0, 0.3, cfg);
  for (int k = 0; k < hm2.size(); ++k) EXPECT_NEAR(hm2.drho[k] / tm.steps[k].rho_nom, 0.3, 1e-15);
  EXPECT_THROW(build_horizon(tm, 50, 0.0, cfg), RangeError);
}

TEST(Controller, ShrinkAndTerminal) {
  const auto tm = synthetic_tm(100);
  MPCConfig cfg;
  auto hm = build_horizon(tm, 0, 0.0, cfg);
  auto tw = shrink_and_terminal(tm, 0, hm, cfg);
  EXPECT_EQ(tw.n_eff, 36);
  EXPECT_TRUE(tw.riccati);
  const Eigen::MatrixXd r = Eigen::MatrixXd::Constant(1, 1, cfg.r_input);
  EXPECT_LT(oracle::riccati_residual(hm.ad[0], hm.b1d[0], cfg.q_stage, r, tw.q_terminal),
            1e-8 * (1 + tw.q_terminal.cwiseAbs().rowwise().sum().maxCoeff()));
  hm = build_horizon(tm, 90, 0.0, cfg);
  tw = shrink_and_terminal(tm, 90, hm, cfg);
  EXPECT_EQ(tw.n_eff, 10);
  EXPECT_FALSE(tw.riccati);
  EXPECT_EQ(tw.q_terminal, cfg.q_stage);
  hm = build_horizon(tm, 99, 0.0, cfg);
  tw = shrink_and_terminal(tm, 99, hm, cfg);
  EXPECT_EQ(tw.n_eff, 1);
  EXPECT_EQ(tw.q_terminal, cfg.q_stage);
  // Horizon end exactly at the guidance end switches to the stage weight.
  hm = build_horizon(tm, 64, 0.0, cfg);
  EXPECT_FALSE(shrink_and_terminal(tm, 64, hm, cfg).riccati);
}

TEST(Controller, CondensedMatchesRollout) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0, 1);
  const auto tm = synthetic_tm(80);
  MPCConfig cfg;
  for (int t = 0; t < 30; ++t) {
    const int k = t * 2;
    const double c = 0.2 * g(rng);
    const auto hm = build_horizon(tm, k, c, cfg);
    const auto tw = shrink_and_terminal(tm, k, hm, cfg);
    const Vec4 x0(100 * g(rng), 1000 * g(rng), 0.1 * g(rng), 0.1 * g(rng));
    const auto cq = condense(x0, hm, cfg, tw.q_terminal);
    Eigen::VectorXd u(hm.size());
    for (int j = 0; j < hm.size(); ++j) u(j) = 0.01 * g(rng);
    const double ref = rollout_cost(x0, hm, u, cfg, tw.q_terminal);
    // The expanded form cancels large terms, so agreement is to rounding of those.
    EXPECT_NEAR(cq.physical_objective(u), ref, 1e-6 * std::abs(ref));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cq.qp.H);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(Controller, SingleStepClosedForm) {
  // N = 1, R = 0: u* = clamp(-(B'QB)^-1 B'QA x0) with Q_N = Q_c.
  MPCConfig cfg;
  cfg.horizon = 1;
  cfg.r_input = 0.0;
  HorizonModel hm;
  Mat4 a = Mat4::Identity();
  a(0, 2) = 600;
  a(1, 3) = 600;
  const Vec4 b(0.0, -5.0, 0.0, -0.01);
  hm.ad = {a};
  hm.b1d = {b};
  hm.b2d = {Vec4::Zero()};
  hm.drho = {0.0};
  hm.lb = {-1.0};
  hm.ub = {1.0};
  const Vec4 x0(10, -30, 0.01, 0.02);
  const auto cq = condense(x0, hm, cfg, cfg.q_stage);
  const auto s = solve_box_qp(cq.qp);
  const Mat4 q = cfg.q_stage;
  const double u = std::clamp(-(b.dot(q * (a * x0))) / b.dot(q * b), -1.0, 1.0);
  EXPECT_NEAR(s.x(0), u, 1e-9 * std::max(1.0, std::abs(u)));
}

TEST(Controller, OnTrajectoryEquilibrium) {
  const auto tm = synthetic_tm(60);
  MpcController mpc{MPCConfig{}};
  const auto cmd = mpc.step(Vec4::Zero(), 0.0, tm, 0);
  EXPECT_EQ(cmd.dcb, 0.0);
  EXPECT_DOUBLE_EQ(cmd.cb_total, 0.05);
  EXPECT_EQ(mpc.last_plan().norm(), 0.0);
}

TEST(Controller, FeedforwardCancellation) {
  const auto tm = synthetic_tm(80);
  MpcController mpc{MPCConfig{}};
  const double c = 0.3, cb = 0.05;
  const auto cmd = mpc.step(Vec4::Zero(), c, tm, 0);
  EXPECT_LT(cmd.dcb, 0.0);
  const auto& plan = mpc.last_plan();
  // Exact cancellation of (1 + c) rho (Cb + dCb) = rho Cb.
  const double cancel = -c / (1 + c) * cb;
  for (int j = 2; j < 20; ++j) {
    EXPECT_LT(plan(j), 0.0);
    EXPECT_NEAR(plan(j), cancel, 0.1 * std::abs(cancel)) << j;
  }
  EXPECT_GT(plan(10), -0.3 * cb - 1e-12);
}

TEST(Controller, SaturationRespected) {
  const auto tm = synthetic_tm(80);
  MPCConfig cfg;
  MpcController mpc{cfg};
  const auto cmd = mpc.step(Vec4(0.0, 50e3, 0.0, 0.0), 0.5, tm, 0);
  const auto hm = build_horizon(tm, 0, 0.5, cfg);
  EXPECT_TRUE(cmd.dcb == hm.lb[0] || cmd.dcb == hm.ub[0]) << cmd.dcb;
  EXPECT_GE(cmd.cb_total, cfg.cb_min);
  EXPECT_LE(cmd.cb_total, cfg.cb_max);
}

TEST(Controller, CommandAlwaysInRange) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 1);
  std::uniform_real_distribution<double> u(0.026, 0.099);
  MPCConfig cfg;
  for (int t = 0; t < 40; ++t) {
    const auto tm = synthetic_tm(50, 600.0, u(rng));
    MpcController mpc{cfg};
    for (int k = 0; k < 50; k += 7) {
      const auto cmd = mpc.step(Vec4(500 * g(rng), 5e4 * g(rng), 0.5 * g(rng), 0.5 * g(rng)), 0.4 * g(rng), tm, k);
      EXPECT_GE(cmd.cb_total, cfg.cb_min);
      EXPECT_LE(cmd.cb_total, cfg.cb_max);
    }
  }
}

TEST(Controller, LinearClosedLoopHoldsZero) {
  const auto tm = synthetic_tm(120);
  MpcController mpc{MPCConfig{}};
  Vec4 x = Vec4::Zero();
  for (int k = 0; k < tm.size(); ++k) {
    const auto cmd = mpc.step(x, 0.0, tm, k);
    x = tm.steps[k].ad * x + tm.steps[k].g_rho * cmd.dcb;
  }
  EXPECT_LT(x.norm(), 1e-9);
}

TEST(Controller, HigherInputWeightReducesActuation) {
  const auto tm = synthetic_tm(80);
  const Vec4 x0(50.0, 3000.0, 0.0, -0.05);
  auto actuation = [&](double r) {
    MPCConfig cfg;
    cfg.r_input = r;
    MpcController mpc{cfg};
    mpc.step(x0, 0.1, tm, 0);
    const auto& p = mpc.last_plan();
    // The penalised quantity (sum of squared moves) is nonincreasing along the weight path.
    double a = 0;
    for (int j = 0; j + 1 < p.size(); ++j) a += (p(j + 1) - p(j)) * (p(j + 1) - p(j));
    return a;
  };
  double prev = actuation(1e8);
  for (double r : {1e9, 1e10, 1e11, 1e12}) {
    const double a = actuation(r);
    EXPECT_LE(a, prev * (1 + 1e-6) + 1e-18) << r;
    prev = a;
  }
}

TEST(Controller, ConfigValidation) {
  MPCConfig cfg;
  cfg.horizon = 0;
  EXPECT_THROW(cfg.validate(), RangeError);
  cfg = MPCConfig{};
  cfg.cb_min = 0.2;
  EXPECT_THROW(cfg.validate(), RangeError);
  cfg = MPCConfig{};
  cfg.q_stage(0, 0) = -1;
  EXPECT_THROW(cfg.validate(), RangeError);
}
