#include "cruise/reference.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace cruise;

TEST(Reference, UniformVelocity) {
  ReferenceProfile p{100.0, 20.0, 0.0, 30.0, {{50.0, 0.0}}};
  const auto r = evaluate(p, 12.5);
  EXPECT_DOUBLE_EQ(r.v, 20.0);
  EXPECT_DOUBLE_EQ(r.x, 100.0 + 250.0);
  EXPECT_EQ(r.u, 0.0);
}

TEST(Reference, ConstantJerkFromRest) {
  ReferenceProfile p{0.0, 0.0, 0.0, 10.0, {{10.0, 0.01}}};
  const auto r = evaluate(p, 10.0);
  EXPECT_NEAR(r.w, 0.1, 1e-15);
  EXPECT_NEAR(r.v, 0.5, 1e-15);
  EXPECT_NEAR(r.x, 10.0 / 6.0, 1e-12);
  EXPECT_EQ(r.u, 0.01);
}

TEST(Reference, DefaultProfilePeaksAtCap) {
  const auto p = default_profile(20115.0);
  EXPECT_NO_THROW(validate(p));
  EXPECT_DOUBLE_EQ(horizon(p), 2400.0);
  double vmax = 0.0;
  for (double t = 0.0; t <= 2400.0; t += 0.5) vmax = std::max(vmax, evaluate(p, t).v);
  EXPECT_DOUBLE_EQ(vmax, 92.0);
  EXPECT_DOUBLE_EQ(evaluate(p, 1000.0).v, 92.0);
  EXPECT_DOUBLE_EQ(evaluate(p, 0.0).x, 20115.0);
}

TEST(Reference, ContinuousAtPhaseBoundaries) {
  const auto p = default_profile(0.0);
  double t = 0.0;
  for (const auto& ph : p.phases) {
    t += ph.duration;
    if (t >= horizon(p)) break;
    const auto a = evaluate(p, t - 1e-9);
    const auto b = evaluate(p, t);
    EXPECT_NEAR(a.x, b.x, 1e-6);
    EXPECT_NEAR(a.v, b.v, 1e-8);
    EXPECT_NEAR(a.w, b.w, 1e-8);
  }
}

TEST(Reference, FiniteDifferencesReproduceDerivatives) {
  const auto p = default_profile(0.0);
  const double h = 1e-4;
  for (double t : {50.0, 120.0, 200.0, 1100.0, 1500.0, 1610.0, 1700.0}) {
    const auto lo = evaluate(p, t - h);
    const auto mid = evaluate(p, t);
    const auto hi = evaluate(p, t + h);
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    EXPECT_LT(rel((hi.x - lo.x) / (2 * h), mid.v), 1e-6);
    EXPECT_LT(rel((hi.v - lo.v) / (2 * h), mid.w), 1e-6);
    EXPECT_LT(rel((hi.w - lo.w) / (2 * h), mid.u), 1e-6);
  }
}

TEST(Reference, BeyondHorizonThrows) {
  const auto p = default_profile(0.0);
  EXPECT_THROW(evaluate(p, 2401.0), std::out_of_range);
  EXPECT_THROW(evaluate(p, -0.1), std::out_of_range);
}

TEST(Reference, OvershootRejectedAtInteriorExtremum) {
  // Velocity peaks inside the second phase (w crosses zero there).
  ReferenceProfile p{0.0, 10.0, 1.0, 10.4, {{1.0, 0.0}, {4.0, -0.5}}};
  EXPECT_THROW(validate(p), std::invalid_argument);
  p.v_max = 12.0;
  EXPECT_NO_THROW(validate(p));
}

TEST(Reference, NegativeVelocityRejected) {
  ReferenceProfile p{0.0, 1.0, -1.0, 5.0, {{3.0, 0.0}}};
  EXPECT_THROW(validate(p), std::invalid_argument);
}

TEST(Reference, ZeroDurationRejected) {
  ReferenceProfile p{0.0, 1.0, 0.0, 5.0, {{0.0, 0.0}}};
  EXPECT_THROW(validate(p), std::invalid_argument);
}
