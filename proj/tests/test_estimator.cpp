#include <gtest/gtest.h>

#include <random>

#include "dragdeorbit/estimator.hpp"

using namespace dragdeorbit;

namespace {

DiscreteModel<5, 1> kf_model() {
  LTVContext c;
  c.a = 6.75e6;
  c.i = 0.9;
  c.rho_nom = 3e-11;
  c.v = 7.7e3;
  c.cb_nom = 0.04;
  auto [a, b] = kf_continuous(c);
  return zoh<5, 1>(a, b, 600.0, 3);
}

FilterState some_state() {
  FilterState s;
  s.x << 120.0, -800.0, 0.3, -0.1, 0.15;
  Eigen::Matrix<double, 5, 5> m;
  m << 2, 0.1, 0, 0, 0, 0.3, 1, 0, 0.2, 0, 0, 0, 0.5, 0, 0.1, 0, 0, 0.1, 0.7, 0, 0.05, 0, 0, 0, 0.4;
  s.P = m * m.transpose();
  return s;
}

}  // namespace

TEST(Estimator, TimeUpdateIdentity) {
  DiscreteModel<5, 1> id;
  id.ad.setIdentity();
  id.bd.setZero();
  auto noise = NoiseConfig::defaults();
  noise.W.setZero();
  const auto s = some_state();
  const auto out = time_update(s, id, 0.01, noise);
  EXPECT_EQ(out.x, s.x);
  EXPECT_LT((out.P - s.P).norm(), 1e-14);
}

TEST(Estimator, TimeUpdateOrthogonalPreservesTrace) {
  DiscreteModel<5, 1> rot;
  rot.ad = Eigen::HouseholderQR<Mat5>(Mat5::Random()).householderQ();
  rot.bd.setZero();
  auto noise = NoiseConfig::defaults();
  noise.W.setZero();
  const auto s = some_state();
  EXPECT_NEAR(time_update(s, rot, 0.0, noise).P.trace(), s.P.trace(), 1e-12);
}

TEST(Estimator, TimeUpdateNumeric) {
  const auto m = kf_model();
  const auto noise = NoiseConfig::defaults();
  const auto s = some_state();
  const auto out = time_update(s, m, 0.003, noise);
  Eigen::Matrix<double, 5, 5> lwl = Eigen::Matrix<double, 5, 5>::Zero();
  lwl(2, 2) = 1e-5;
  lwl(3, 3) = 1e-6;
  lwl(4, 4) = 2e-5;
  EXPECT_LT((out.x - (m.ad * s.x + m.bd * 0.003)).norm(), 1e-10);
  EXPECT_LT((out.P - (m.ad * s.P * m.ad.transpose() + lwl)).norm(), 1e-9 * out.P.norm());
  EXPECT_TRUE(covariance_valid(out.P));
}

TEST(Estimator, ZeroInnovation) {
  const auto s = some_state();
  Measurement m;
  m.y = s.x.head<4>();
  const auto out = measurement_update(s, m, NoiseConfig::defaults());
  EXPECT_LT((out.x - s.x).norm(), 1e-12);
}

TEST(Estimator, SmallNoiseLimit) {
  auto noise = NoiseConfig::defaults();
  noise.V = 1e-12 * Mat4::Identity();
  const auto s = some_state();
  Measurement m;
  m.y << 130.0, -790.0, 0.25, -0.12;
  const auto out = measurement_update(s, m, noise);
  EXPECT_LT((out.x.head<4>() - m.y).norm(), 1e-6);
}

TEST(Estimator, ScalarGain) {
  FilterState s;
  s.x.setZero();
  s.P = Vec5(4.0, 9.0, 0.5, 0.2, 0.3).asDiagonal();
  auto noise = NoiseConfig::defaults();
  Measurement m;
  m.y << 10.0, 10.0, 1.0, 1.0;
  const auto out = measurement_update(s, m, noise);
  for (int i = 0; i < 4; ++i) {
    const double p = s.P(i, i), v = noise.V(i, i);
    EXPECT_NEAR(out.x(i), p / (p + v) * m.y(i), 1e-12);
    EXPECT_NEAR(out.P(i, i), p * v / (p + v), 1e-12);
  }
  EXPECT_EQ(out.x(4), 0.0);
}

TEST(Estimator, SingularInnovationThrows) {
  FilterState s;
  s.P.setZero();
  auto noise = NoiseConfig::defaults();
  noise.V.setZero();
  EXPECT_THROW(measurement_update(s, Measurement{}, noise), SingularMatrixError);
}

TEST(Estimator, DeltaRho) {
  FilterState s;
  EXPECT_EQ(extract_delta_rho(s, 1e-12), 0.0);
  s.x(4) = 0.3;
  EXPECT_NEAR(extract_delta_rho(s, 1e-12), 3e-13, 1e-28);
  s.x(4) = -0.5;
  EXPECT_NEAR(extract_delta_rho(s, 2e-12), -1e-12, 1e-28);
  EXPECT_THROW(extract_delta_rho(s, -1.0), RangeError);
}

TEST(Estimator, CovarianceStaysValid) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> g(0, 1);
  const auto model = kf_model();
  const auto noise = NoiseConfig::defaults();
  FilterState s = initialize_filter(Measurement{}, noise);
  for (int k = 0; k < 10000; ++k) {
    s = time_update(s, model, 0.001 * g(rng), noise);
    Measurement m;
    for (int i = 0; i < 4; ++i) m.y(i) = s.x(i) + std::sqrt(noise.V(i, i)) * g(rng);
    s = measurement_update(s, m, noise);
    ASSERT_TRUE(covariance_valid(s.P)) << "step " << k;
  }
}

TEST(Estimator, RandomWalkConstantWithoutMeasurements) {
  auto noise = NoiseConfig::defaults();
  noise.W(2, 2) = 0.0;
  FilterState s = some_state();
  const double c0 = s.c();
  const auto model = kf_model();
  for (int k = 0; k < 50; ++k) s = time_update(s, model, 0.002, noise);
  EXPECT_EQ(s.c(), c0);
}

TEST(Estimator, ConvergesOnOwnModel) {
  const auto model = kf_model();
  auto noise = NoiseConfig::defaults();
  noise.V = Vec4(1e-6, 1e-6, 1e-10, 1e-10).asDiagonal();
  Vec5 truth;
  truth << 200.0, -1500.0, 0.2, -0.3, 0.25;
  Measurement m0;
  m0.y = truth.head<4>() + Vec4(3, -3, 0.01, 0.01);
  FilterState s = initialize_filter(m0, noise);
  for (int k = 0; k < 20; ++k) {
    const double u = 0.002 * std::sin(0.3 * k);
    truth = model.ad * truth + model.bd * u;
    s = time_update(s, model, u, noise);
    Measurement m;
    m.y = truth.head<4>();
    s = measurement_update(s, m, noise);
  }
  EXPECT_LT((s.x - truth).norm(), 1e-6);
}
