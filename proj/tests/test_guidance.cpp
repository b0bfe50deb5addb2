#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "dragdeorbit/guidance.hpp"

using namespace dragdeorbit;

namespace {

// Low starting orbit keeps the decay short enough for unit tests.
StateECI low_orbit(double inc = 0.9, double u = 0.4) {
  OrbitalElements el;
  el.a = constants::kWgs84A + 260e3;
  el.e = 2e-4;
  el.i = inc;
  el.raan = 1.2;
  el.argp = 0.0;
  el.nu = u;
  return elements_to_state(el);
}

RetargetResult candidate(double cb1, double cb2, double t_swap) {
  RetargetResult r;
  r.feasible = true;
  r.params = {cb1, cb2, t_swap};
  return r;
}

}  // namespace

TEST(Guidance, ScaleLaw) {
  EXPECT_DOUBLE_EQ(scale_law(123.0, 0.05, 0.05), 123.0);
  EXPECT_DOUBLE_EQ(scale_law(123.0, 0.05, 0.1), 61.5);
  EXPECT_NEAR(scale_law(scale_law(123.0, 0.05, 0.07), 0.07, 0.05), 123.0, 1e-12);
  EXPECT_THROW(scale_law(1.0, 0.05, 0.0), RangeError);
}

TEST(Guidance, SwapShiftArithmetic) {
  EXPECT_EQ(swap_shift(0.0, 0.1, 0.025, 1.1068e-3), 0.0);
  const double expect = constants::kTwoPi * 0.025 / (1.1068e-3 * (0.025 - 0.1));
  EXPECT_NEAR(swap_shift(constants::kTwoPi, 0.1, 0.025, 1.1068e-3), expect, 1e-9);
  EXPECT_NEAR(expect, -1892.0, 1.0);
}

TEST(Guidance, EquatorialTargetNodes) {
  TargetSpec t;
  t.lat = 0.0;
  const auto u = target_arguments_of_latitude(t, 0.9);
  EXPECT_NEAR(u[0], 0.0, 1e-15);
  EXPECT_NEAR(u[1], constants::kPi, 1e-15);
  EXPECT_THROW(target_arguments_of_latitude(t, 0.0), DegenerateGeometryError);
}

TEST(Guidance, TargetArgumentsReachLatitude) {
  TargetSpec t;
  t.lat = 0.5;
  const double inc = 0.9;
  for (double u : target_arguments_of_latitude(t, inc)) {
    // Geocentric latitude of a point at argument of latitude u: asin(sin i sin u).
    EXPECT_NEAR(std::asin(std::sin(inc) * std::sin(u)), target_geocentric_latitude(t), 1e-12);
  }
  EXPECT_LT(target_geocentric_latitude(t), t.lat);
}

TEST(Guidance, LatitudeBound) {
  TargetSpec t;
  t.lat = 0.99 * 0.9 - 1e-6;
  EXPECT_NO_THROW(t.validate(0.9));
  t.lat = 0.991 * 0.9;
  EXPECT_THROW(t.validate(0.9), RangeError);
  t.lat = -0.991 * 0.9;
  EXPECT_THROW(t.validate(0.9), RangeError);
}

TEST(Guidance, PhaseSystemPlugBackAndClosedForms) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const double cb10 = 0.025 + 0.075 * u(rng), cb20 = 0.025 + 0.075 * u(rng);
    const double th1 = 300 * u(rng), t1 = 5e5 * u(rng), th2 = 300 * u(rng), t2 = 5e5 * u(rng);
    // Totals generated by a known pair of coefficients.
    const double cb1_true = 0.025 + 0.075 * u(rng), cb2_true = 0.025 + 0.075 * u(rng);
    const double tht = scale_law(th1, cb10, cb1_true) + scale_law(th2, cb20, cb2_true);
    const double tt = scale_law(t1, cb10, cb1_true) + scale_law(t2, cb20, cb2_true);
    double x, y;
    ASSERT_TRUE(solve_phase_system(th1, t1, th2, t2, tht, tt, x, y));
    const double cb1 = cb10 / x, cb2 = cb20 / y;
    EXPECT_NEAR(cb1, cb1_true, 1e-9);
    EXPECT_NEAR(cb2, cb2_true, 1e-9);
    EXPECT_NEAR(scale_law(th1, cb10, cb1) + scale_law(th2, cb20, cb2), tht, 1e-9 * tht);
    EXPECT_NEAR(scale_law(t1, cb10, cb1) + scale_law(t2, cb20, cb2), tt, 1e-9 * tt);
    const double cb2_cf = cb2_closed_form(cb20, th1, t1, th2, t2, tht, tt);
    EXPECT_NEAR(cb2_cf, cb2, 1e-12 * std::abs(cb2) * 1e3);
    EXPECT_NEAR(cb1_closed_form(cb10, cb20, cb2_cf, th1, th2, tht), cb1, 1e-12 * std::abs(cb1) * 1e3);
  }
  double x, y;
  EXPECT_FALSE(solve_phase_system(1.0, 2.0, 2.0, 4.0, 3.0, 6.0, x, y));
}

TEST(Guidance, SelectSwap) {
  GuidanceConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.cb_mid(), 0.05);
  std::vector<RetargetResult> c{candidate(0.03, 0.09, 100.0), candidate(0.05, 0.05, 200.0)};
  EXPECT_EQ(select_swap(c, 1000.0, cfg), 1u);
  std::vector<RetargetResult> single{candidate(0.1, 0.025, 5.0)};
  EXPECT_EQ(select_swap(single, 1000.0, cfg), 0u);
  EXPECT_THROW(select_swap({}, 1000.0, cfg), ControlAuthorityError);
  // Ties broken by swap time nearest mid-duration.
  std::vector<RetargetResult> tie{candidate(0.04, 0.06, 100.0), candidate(0.06, 0.04, 480.0)};
  EXPECT_EQ(select_swap(tie, 1000.0, cfg), 1u);
}

TEST(Guidance, SelectSwapPermutationInvariant) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.025, 0.1), ts(0, 1000);
  GuidanceConfig cfg;
  for (int t = 0; t < 50; ++t) {
    std::vector<RetargetResult> c;
    for (int k = 0; k < 7; ++k) c.push_back(candidate(u(rng), u(rng), ts(rng)));
    const auto chosen = c[select_swap(c, 1000.0, cfg)].params;
    std::shuffle(c.begin(), c.end(), rng);
    const auto again = c[select_swap(c, 1000.0, cfg)].params;
    EXPECT_EQ(chosen.cb1, again.cb1);
    EXPECT_EQ(chosen.cb2, again.cb2);
    EXPECT_EQ(chosen.t_swap, again.t_swap);
  }
}

class GuidanceLow : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    env_ = new Environment();
    env_->epoch = Epoch::from_calendar(2021, 3, 1);
    auto [p, traj] = initialize(low_orbit(), *env_, GuidanceConfig{});
    params_ = p;
    traj_ = new Trajectory(std::move(traj));
  }
  static void TearDownTestSuite() {
    delete traj_;
    delete env_;
  }
  static Environment* env_;
  static Trajectory* traj_;
  static GuidanceParams params_;
};
Environment* GuidanceLow::env_ = nullptr;
Trajectory* GuidanceLow::traj_ = nullptr;
GuidanceParams GuidanceLow::params_;

TEST_F(GuidanceLow, InitializeContract) {
  GuidanceConfig cfg;
  EXPECT_EQ(params_.cb1, cfg.cb_max);
  EXPECT_EQ(params_.cb2, cfg.cb_min);
  IntegratorOptions light;
  light.store_nodes = false;
  const auto fast = propagate(low_orbit(), CbProfile(cfg.cb_max), *env_, cfg.t_max, cfg.event, light);
  EXPECT_DOUBLE_EQ(params_.t_swap, 0.5 * fast.duration());
  EXPECT_EQ(params_.profile().segments().size(), 2u);
  int changes = 0;
  for (std::size_t k = 1; k < traj_->nodes.size(); ++k) changes += traj_->nodes[k].cb != traj_->nodes[k - 1].cb;
  EXPECT_EQ(changes, 1);
  EXPECT_TRUE(traj_->terminated_by_event);
  EXPECT_LT(std::abs(altitude_eci(traj_->final_state().r) - 100e3), 1.0);
  // More drag, faster decay.
  const auto faster = propagate(low_orbit(), CbProfile(0.15), *env_, cfg.t_max, cfg.event, light);
  EXPECT_LT(faster.duration(), fast.duration());
}

TEST_F(GuidanceLow, LatitudeCandidatesWithinWindow) {
  const auto pa = analyze_phases(*traj_, params_, *env_);
  TargetSpec t;
  t.lat = 0.3;
  t.lon = 1.0;
  GuidanceConfig cfg;
  const auto cands = latitude_candidates(pa, params_, t, cfg);
  ASSERT_FALSE(cands.empty());
  for (const auto& c : cands) {
    EXPECT_GE(c.t_swap, cfg.swap_window_lo * pa.duration);
    EXPECT_LE(c.t_swap, cfg.swap_window_hi * pa.duration);
    EXPECT_NEAR(c.t_swap - pa.t_swap, swap_shift(c.dphi, params_.cb1, params_.cb2, pa.omega2_avg), 1e-6);
  }
  GuidanceParams same = params_;
  same.cb2 = same.cb1;
  EXPECT_TRUE(latitude_candidates(pa, same, t, cfg).empty());
}

TEST_F(GuidanceLow, RetargetFixedPoint) {
  const auto pa = analyze_phases(*traj_, params_, *env_);
  TargetSpec t;
  t.lon = predicted_longitude(pa.u_final, pa.raan_final, pa.inc_final, env_->epoch, traj_->t_final());
  SwapCandidate c{pa.t_swap, 0.0};
  const auto r = longitude_retarget(pa, params_, c, t, env_->epoch, GuidanceConfig{});
  EXPECT_NEAR(r.e_long, 0.0, 1e-9);
  EXPECT_NEAR(r.params.cb1, params_.cb1, 1e-9);
  EXPECT_NEAR(r.params.cb2, params_.cb2, 1e-9);
  EXPECT_NEAR(r.params.t_swap, params_.t_swap, 1e-3);
  // Longitude prediction for the unchanged trajectory matches the propagated endpoint.
  const auto g = geodetic(eci_to_ecef(traj_->final_state(), env_->epoch).r);
  EXPECT_NEAR(wrap_pi(t.lon - g.lon), 0.0, 1e-6);
}

TEST_F(GuidanceLow, SelfTargetConvergesImmediately) {
  const auto end = geodetic(eci_to_ecef(traj_->final_state(), env_->epoch).r);
  TargetSpec t{end.lat, end.lon, 100e3};
  const auto g = generate(low_orbit(), t, *env_);
  EXPECT_EQ(g.status, GuidanceStatus::Converged);
  EXPECT_LE(g.iterations, 1);
  EXPECT_LT(g.targeting_error, 10e3);
}

TEST_F(GuidanceLow, GeneratesToTarget) {
  GuidanceConfig cfg;
  // Endpoint of a constant mid-range profile is reachable but not the initial guess.
  const auto mid = propagate(low_orbit(), CbProfile(0.04), *env_, cfg.t_max, cfg.event);
  const auto end = geodetic(eci_to_ecef(mid.final_state(), env_->epoch).r);
  TargetSpec t{end.lat, end.lon, 100e3};
  const auto g = generate(low_orbit(), t, *env_, cfg);
  EXPECT_EQ(g.status, GuidanceStatus::Converged) << g.targeting_error;
  EXPECT_LT(g.targeting_error, 10e3);
  EXPECT_LT(g.targeting_error, g.error_history.front());
  EXPECT_GE(g.params.cb1, cfg.cb_min);
  EXPECT_LE(g.params.cb1, cfg.cb_max);
  EXPECT_GE(g.params.cb2, cfg.cb_min);
  EXPECT_LE(g.params.cb2, cfg.cb_max);
  EXPECT_GE(g.params.t_swap, 0.0);
  EXPECT_LE(g.params.t_swap, g.trajectory.duration());
  EXPECT_NEAR(targeting_error(g.trajectory, t, env_->epoch), g.targeting_error, 1e-6);
  const auto sidecar = guidance_sidecar(g);
  EXPECT_EQ(sidecar["iterations"].get<int>(), g.iterations);
}
