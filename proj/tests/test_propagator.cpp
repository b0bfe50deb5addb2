#include <gtest/gtest.h>

#include <sstream>

#include "dragdeorbit/elements.hpp"
#include "dragdeorbit/propagator.hpp"

using namespace dragdeorbit;

namespace {

Environment two_body_env() {
  Environment env;
  env.gravity = GravityModel::two_body();
  return env;
}

StateECI circular(double alt, double inc_deg, double u = 0.0) {
  OrbitalElements el;
  el.a = constants::kWgs84A + alt;
  el.i = inc_deg * constants::kPi / 180.0;
  el.raan = 0.3;
  el.nu = u;
  return elements_to_state(el);
}

double energy(const StateECI& s) { return 0.5 * s.v.squaredNorm() - constants::kMu / s.r.norm(); }

}  // namespace

TEST(Propagator, TwoBodyPeriodReturn) {
  const auto s0 = circular(400e3, 51.6);
  const double a = s0.r.norm();
  const double period = constants::kTwoPi * std::sqrt(a * a * a / constants::kMu);
  const auto traj = propagate(s0, CbProfile(0.0), two_body_env(), period);
  const auto s1 = traj.final_state();
  EXPECT_LT((s1.r - s0.r).norm() / s0.r.norm(), 1e-6);
  EXPECT_LT((s1.v - s0.v).norm() / s0.v.norm(), 1e-6);
  const auto st = decay_stats(traj, 0.0);
  EXPECT_NEAR(st.swept_angle, constants::kTwoPi, 1e-6);
  EXPECT_NEAR(st.mean_rate, constants::kTwoPi / period, 1e-12);
}

TEST(Propagator, EquatorialSweptEqualsTrueLongitude) {
  OrbitalElements el;
  el.a = 6.9e6;
  el.e = 0.01;
  const auto s0 = elements_to_state(el);
  const auto traj = propagate(s0, CbProfile(0.0), two_body_env(), 2500.0);
  const auto s1 = traj.final_state();
  double dl = std::atan2(s1.r.y(), s1.r.x()) - std::atan2(s0.r.y(), s0.r.x());
  if (dl < 0) dl += constants::kTwoPi;
  EXPECT_NEAR(decay_stats(traj, 0.0).swept_angle, dl, 1e-9);
}

TEST(Propagator, PolarRaanRateZero) {
  const auto traj = propagate(circular(400e3, 90.0), CbProfile(0.0), Environment{}, 3000.0);
  EXPECT_NEAR(decay_stats(traj).raan_rate, 0.0, 1e-15);
  const auto t2 = propagate(circular(400e3, 51.6), CbProfile(0.0), Environment{}, 3000.0);
  EXPECT_LT(decay_stats(t2).raan_rate, 0.0);
}

TEST(Propagator, DragDissipatesEnergy) {
  Environment env;
  env.gravity = GravityModel::two_body();
  const auto traj = propagate(circular(250e3, 30.0), CbProfile(0.05), env, 20000.0);
  ASSERT_GT(traj.nodes.size(), 10u);
  for (std::size_t k = 1; k < traj.nodes.size(); ++k) {
    EXPECT_LT(energy(traj.node_state(k)), energy(traj.node_state(k - 1)));
  }
}

TEST(Propagator, AltitudeEvent) {
  Environment env;
  EventSpec ev;
  ev.altitude = 100e3;
  ev.tolerance = 1.0;
  const auto traj = propagate(circular(160e3, 51.6), CbProfile(0.05), env, 10 * 86400.0, ev);
  EXPECT_TRUE(traj.terminated_by_event);
  EXPECT_LT(std::abs(altitude_eci(traj.final_state().r) - 100e3), 1.0);

  // Independent of step history: different initial step and max step.
  IntegratorOptions opt;
  opt.h_initial = 3.0;
  opt.h_max = 120.0;
  const auto t2 = propagate(circular(160e3, 51.6), CbProfile(0.05), env, 10 * 86400.0, ev, opt);
  EXPECT_LT(std::abs(t2.t_final() - traj.t_final()), 1.0 / 100.0 * 1.0 + 0.05);

  EXPECT_THROW(propagate(circular(160e3, 51.6), CbProfile(0.05), env, 600.0, ev), PropagationError);
  EXPECT_THROW(propagate(circular(90e3, 51.6), CbProfile(0.05), env, 600.0, ev), PropagationError);
}

TEST(Propagator, ArtificialBreakpointIsInvisible) {
  Environment env;
  const auto s0 = circular(300e3, 45.0);
  const auto a = propagate(s0, CbProfile(0.02), env, 20000.0);
  const auto b = propagate(s0, CbProfile({{-1e300, 0.02}, {7777.0, 0.02}}), env, 20000.0);
  EXPECT_LT((a.final_state().r - b.final_state().r).norm(), 1e-3);
}

TEST(Propagator, SwapProfileApplied) {
  Environment env;
  const auto traj = propagate(circular(300e3, 45.0), CbProfile::swap(0.01, 0.03, 5000.0), env, 10000.0);
  EXPECT_DOUBLE_EQ(traj.cb_at(4999.0), 0.01);
  EXPECT_DOUBLE_EQ(traj.cb_at(5001.0), 0.03);
  bool has_node = false;
  for (const auto& n : traj.nodes) has_node |= n.t == 5000.0;
  EXPECT_TRUE(has_node);
}

TEST(Propagator, ToleranceConvergence) {
  Environment env;
  const auto s0 = circular(350e3, 60.0);
  IntegratorOptions loose, tight, ref;
  loose.rtol = 1e-8;
  loose.atol_pos = 1e-5;
  loose.atol_vel = 1e-8;
  tight.rtol = 0.5e-8;
  tight.atol_pos = 0.5e-5;
  tight.atol_vel = 0.5e-8;
  ref.rtol = 1e-12;
  ref.atol_pos = 1e-9;
  ref.atol_vel = 1e-12;
  const double T = 30000.0;
  const Vec3 rl = propagate(s0, CbProfile(0.02), env, T, std::nullopt, loose).final_state().r;
  const Vec3 rt = propagate(s0, CbProfile(0.02), env, T, std::nullopt, tight).final_state().r;
  const Vec3 rr = propagate(s0, CbProfile(0.02), env, T, std::nullopt, ref).final_state().r;
  EXPECT_LT((rt - rr).norm(), (rl - rr).norm() * 1.0 + 1e-6);
  // Global error after five orbits, well above the per-step tolerance but bounded.
  EXPECT_LT((rl - rr).norm(), 20.0);
}

TEST(Propagator, DenseOutputMatchesNodes) {
  Environment env;
  const auto traj = propagate(circular(300e3, 45.0), CbProfile(0.02), env, 8000.0);
  // Dense output at mid-interval vs a fresh propagation to that time.
  const std::size_t k = traj.nodes.size() / 2;
  const double tm = 0.5 * (traj.nodes[k].t + traj.nodes[k + 1].t);
  const auto direct = propagate(traj.initial(), CbProfile(0.02), env, tm).final_state();
  EXPECT_LT((traj.state_at(tm).r - direct.r).norm(), 1e-3);
  EXPECT_LT((traj.state_at(tm).v - direct.v).norm(), 1e-5);
}

TEST(Propagator, CsvRoundTrip) {
  Environment env;
  const auto traj = propagate(circular(300e3, 45.0), CbProfile::swap(0.01, 0.02, 2000.0), env, 4000.0);
  std::stringstream io;
  write_trajectory_csv(io, traj);
  std::string header;
  std::getline(io, header);
  EXPECT_EQ(header, kTrajectoryCsvHeader);
  io.seekg(0);
  const auto back = read_trajectory_csv(io, env);
  ASSERT_EQ(back.nodes.size(), traj.nodes.size());
  EXPECT_LT((back.state_at(1234.5).r - traj.state_at(1234.5).r).norm(), 1e-3);
  EXPECT_DOUBLE_EQ(back.cb_at(2500.0), 0.02);
}

TEST(Elements, RoundTrip) {
  OrbitalElements el;
  el.a = 6.9e6;
  el.e = 0.02;
  el.i = 0.9;
  el.raan = 1.1;
  el.argp = 2.0;
  el.nu = 0.4;
  const auto back = state_to_elements(elements_to_state(el));
  EXPECT_NEAR(back.a, el.a, 1e-4);
  EXPECT_NEAR(back.e, el.e, 1e-12);
  EXPECT_NEAR(back.i, el.i, 1e-12);
  EXPECT_NEAR(back.raan, el.raan, 1e-12);
  EXPECT_NEAR(back.argp, el.argp, 1e-9);
  EXPECT_NEAR(back.nu, el.nu, 1e-9);
}
