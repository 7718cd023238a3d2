#include "cruise/faults.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <vector>

using namespace cruise;

namespace {

// Carriage (1,1) of the experiment.
FaultModel head_fault() {
  FaultModel m;
  m.omega = 1.0;
  m.upsilon = 2e5;
  m.nu = 2e5;
  m.const_amplitude = 1.0;
  m.periodic_amplitude = 1.0;
  m.phase = 8.0;
  m.const_window = {400.0, 1400.0};
  m.periodic_window = {500.0, 2300.0};
  return m;
}

}  // namespace

TEST(Exosystem, ZeroFrequencyIsZero) { EXPECT_TRUE(exosystem_matrix(0.0).isZero()); }

TEST(Exosystem, UnitFrequencyEntries) {
  const Eigen::Matrix3d s = exosystem_matrix(1.0);
  EXPECT_EQ(s(1, 2), 1.0);
  EXPECT_EQ(s(2, 1), -1.0);
  EXPECT_EQ(s.cwiseAbs().sum(), 2.0);
}

TEST(Exosystem, Spectrum) {
  Eigen::EigenSolver<Eigen::Matrix3d> es(exosystem_matrix(1.0));
  std::vector<std::complex<double>> ev(es.eigenvalues().begin(), es.eigenvalues().end());
  std::sort(ev.begin(), ev.end(), [](auto a, auto b) { return a.imag() < b.imag(); });
  EXPECT_NEAR(std::abs(ev[0] - std::complex<double>(0, -1)), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(ev[1]), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(ev[2] - std::complex<double>(0, 1)), 0.0, 1e-12);
}

TEST(FaultValue, OutsideWindowsIsZero) {
  EXPECT_TRUE(fault_value(100.0, head_fault()).isZero());
  EXPECT_TRUE(fault_value(2350.0, head_fault()).isZero());
}

TEST(FaultValue, InsideBothWindows) {
  const Eigen::Vector3d f = fault_value(500.0, head_fault());
  EXPECT_EQ(f(0), 1.0);
  EXPECT_DOUBLE_EQ(f(1), std::sin(508.0));
  EXPECT_DOUBLE_EQ(f(2), std::cos(508.0));
}

TEST(FaultValue, RotationInvariant) {
  for (double t = 500.0; t < 2300.0; t += 37.3) {
    const Eigen::Vector3d f = fault_value(t, head_fault());
    EXPECT_NEAR(f(1) * f(1) + f(2) * f(2), 1.0, 1e-12);
  }
}

TEST(FaultValue, NegativeTimeRejected) {
  EXPECT_THROW(fault_value(-1.0, head_fault()), std::domain_error);
}

TEST(FaultValue, SatisfiesExosystemInsideWindow) {
  const FaultModel m = head_fault();
  const double h = 1e-4;
  for (double t : {450.0, 700.0, 1200.0, 2000.0}) {
    const Eigen::Vector3d f = fault_value(t, m);
    const Eigen::Vector3d rate = (fault_value(t + h, m) - fault_value(t - h, m)) / (2.0 * h);
    const Eigen::Vector3d expected = exosystem_matrix(m.omega) * f;
    EXPECT_LT((rate - expected).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, f.cwiseAbs().maxCoeff()) / h);
    EXPECT_LT((rate - expected).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(Activity, SnappedToStepGrid) {
  FaultModel m = head_fault();
  m.const_window = {400.004, 1399.996};
  const double h = 0.01;
  EXPECT_FALSE(activity_for_step(m, 39999, h).constant);
  EXPECT_TRUE(activity_for_step(m, 40000, h).constant);
  EXPECT_TRUE(activity_for_step(m, 139999, h).constant);
  EXPECT_FALSE(activity_for_step(m, 140000, h).constant);
}

TEST(EffectiveFault, Zero) {
  const auto e = effective_fault(Eigen::Vector3d::Zero(), head_fault(), 8e4);
  EXPECT_EQ(e.force_rate, 0.0);
  EXPECT_EQ(e.jerk, 0.0);
}

TEST(EffectiveFault, TableGains) {
  const auto e = effective_fault(Eigen::Vector3d(1.0, 0.0, 1.0), head_fault(), 8e4);
  EXPECT_DOUBLE_EQ(e.force_rate, 4e5);
  EXPECT_DOUBLE_EQ(e.jerk, 5.0);
}

TEST(EffectiveFault, Linear) {
  const Eigen::Vector3d a(0.3, -1.2, 2.0), b(-0.7, 0.5, 0.25);
  const auto fa = effective_fault(a, head_fault(), 8e4);
  const auto fb = effective_fault(b, head_fault(), 8e4);
  const auto fab = effective_fault(2.0 * a - 3.0 * b, head_fault(), 8e4);
  EXPECT_NEAR(fab.force_rate, 2.0 * fa.force_rate - 3.0 * fb.force_rate, 1e-9);
}

TEST(FaultModel, RejectsInvertedWindow) {
  FaultModel m = head_fault();
  m.const_window = {10.0, 5.0};
  EXPECT_THROW(m.validate(), std::invalid_argument);
}
