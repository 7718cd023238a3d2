#include "cruise/observer.hpp"

#include <gtest/gtest.h>

#include <complex>
#include <vector>

using namespace cruise;

namespace {

LineParams table_line() { return {{0.01176, 0.00077616, 1.6e-5}, {1.6e5, 600.0, 26.0}}; }

CarriageParams table_carriage() {
  CarriageParams p;
  p.mass = 8e4;
  p.actuator_rate = 50.0;
  p.fault.omega = 1.0;
  p.fault.upsilon = 2e5;
  p.fault.nu = 2e5;
  return p;
}

std::vector<std::complex<double>> all_at(double lambda) {
  return std::vector<std::complex<double>>(5, lambda);
}

}  // namespace

TEST(AugmentedPair, DecoupledFaultLeavesSingleSuperdiagonal) {
  const auto pair = build_augmented_pair<double>(Eigen::RowVector3d::Zero(), Eigen::Matrix3d::Zero());
  Eigen::Matrix<double, 5, 5> expected = Eigen::Matrix<double, 5, 5>::Zero();
  expected(0, 1) = 1.0;
  EXPECT_EQ(pair.A, expected);
  EXPECT_EQ(pair.C(0), 1.0);
  EXPECT_EQ(pair.C.sum(), 1.0);
}

TEST(AugmentedPair, TableBlocks) {
  const auto pair = build_augmented_pair(table_carriage());
  EXPECT_DOUBLE_EQ(pair.A(1, 2), 2.5);
  EXPECT_DOUBLE_EQ(pair.A(1, 3), 0.0);
  EXPECT_DOUBLE_EQ(pair.A(1, 4), 2.5);
  EXPECT_EQ(pair.A(3, 4), 1.0);
  EXPECT_EQ(pair.A(4, 3), -1.0);
}

TEST(Observability, TablePairHasFullRank) {
  const auto pair = build_augmented_pair(table_carriage());
  Eigen::FullPivLU<Eigen::Matrix<double, 5, 5>> lu(observability_matrix(pair));
  EXPECT_EQ(lu.rank(), 5);
  EXPECT_TRUE(check_observability(pair));
}

TEST(Observability, DecoupledFaultIsUnobservable) {
  const auto pair = build_augmented_pair<double>(Eigen::RowVector3d::Zero(), exosystem_matrix(1.0));
  EXPECT_FALSE(check_observability(pair));
}

TEST(Observability, ZeroFrequencyDropsRank) {
  const Eigen::RowVector3d c(2e5 / 8e4, 0.0, 0.0);
  const auto pair = build_augmented_pair<double>(c, exosystem_matrix(0.0));
  EXPECT_FALSE(check_observability(pair));
  Eigen::FullPivLU<Eigen::Matrix<double, 5, 5>> lu(observability_matrix(pair));
  EXPECT_EQ(lu.rank(), 3);
}

TEST(CharacteristicPolynomial, CompanionRoundTrip) {
  Eigen::Matrix3d m;
  m << 0, 1, 0, 0, 0, 1, -6, -11, -6;  // (l+1)(l+2)(l+3)
  const auto p = characteristic_polynomial<double, 3>(m);
  EXPECT_NEAR(p[1], 6.0, 1e-12);
  EXPECT_NEAR(p[2], 11.0, 1e-12);
  EXPECT_NEAR(p[3], 6.0, 1e-12);
}

TEST(Synthesis, RepeatedEigenvalueMatchesBinomialCoefficients) {
  const auto pair = build_augmented_pair(table_carriage());
  const auto g = synthesize_gains(pair, all_at(-3.0));
  const auto p = characteristic_polynomial<double, 5>(error_matrix(pair, g));
  const double binomial[6] = {1, 15, 90, 270, 405, 243};
  for (int k = 0; k < 6; ++k) EXPECT_NEAR(p[k], binomial[k], 1e-9 * binomial[k]);
  EXPECT_EQ(g.k1, 3.0);
}

// Closed form from solving the coefficient equations symbolically.
TEST(Synthesis, TableGainsMatchSymbolicSolution) {
  const auto g = synthesize_gains(table_carriage(), all_at(-3.0));
  const double expected[5] = {-15.0, -89.0, -97.2, 126.4, -4.8};
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(g.K(k), expected[k], 1e-9);
}

TEST(Synthesis, DistinctComplexSpectrum) {
  const std::vector<std::complex<double>> desired{
      {-1.0, 2.0}, {-1.0, -2.0}, {-2.0, 0.0}, {-4.0, 0.0}, {-5.0, 0.0}};
  const auto pair = build_augmented_pair(table_carriage());
  const auto g = synthesize_gains(pair, desired);
  Eigen::EigenSolver<Eigen::Matrix<double, 5, 5>> es(error_matrix(pair, g));
  for (const auto& want : desired) {
    double best = 1e9;
    for (int i = 0; i < 5; ++i) best = std::min(best, std::abs(es.eigenvalues()(i) - want));
    EXPECT_LT(best, 1e-6);
  }
}

TEST(Synthesis, UnobservablePairRejected) {
  const auto pair = build_augmented_pair<double>(Eigen::RowVector3d::Zero(), exosystem_matrix(1.0));
  EXPECT_THROW(synthesize_gains(pair, all_at(-3.0)), PlacementError);
}

TEST(Synthesis, UnstableTargetRejected) {
  auto desired = all_at(-3.0);
  desired[2] = 0.5;
  EXPECT_THROW(synthesize_gains(table_carriage(), desired), std::invalid_argument);
}

TEST(Synthesis, UnpairedComplexRootRejected) {
  auto desired = all_at(-3.0);
  desired[0] = {-1.0, 1.0};
  EXPECT_THROW(synthesize_gains(table_carriage(), desired), std::invalid_argument);
}

TEST(AuxiliaryInputs, PerfectEstimatesGiveZero) {
  const auto p = table_carriage();
  const auto g = synthesize_gains(p, all_at(-3.0));
  ObserverSite s;
  s.j = 1;
  s.count = 3;
  s.x = 26.0;
  s.v = 21.0;
  s.est = {26.0, 21.0, 0.4, Eigen::Vector3d(1, 0.2, 0.3)};
  s.v_prev = s.v_hat_prev = 20.0;
  s.v_next = s.v_hat_next = 22.0;
  const auto aux = auxiliary_inputs(s, 0.0, 0.0, g, p, table_line());
  EXPECT_EQ(aux.mu1, 0.0);
  EXPECT_EQ(aux.mu2, 0.0);
  EXPECT_EQ(aux.mu3, 0.0);
  EXPECT_TRUE(aux.mu4.isZero());
}

TEST(AuxiliaryInputs, PositionErrorOnly) {
  const auto p = table_carriage();
  const auto g = synthesize_gains(p, all_at(-3.0));
  ObserverSite s;
  s.j = 0;
  s.count = 2;
  s.x = 10.0;
  s.v = 5.0;
  s.est = {11.0, 5.0, 0.0, Eigen::Vector3d::Zero()};
  s.v_next = s.v_hat_next = 5.0;
  EXPECT_DOUBLE_EQ(auxiliary_inputs(s, 0.0, 0.0, g, p, table_line()).mu1, -3.0);
}

// Scalar re-derivation of the auxiliary inputs for an interior carriage.
TEST(AuxiliaryInputs, NontrivialInteriorCase) {
  const auto p = table_carriage();
  const auto line = table_line();
  const auto g = synthesize_gains(p, all_at(-3.0));
  ObserverSite s;
  s.j = 1;
  s.count = 3;
  s.x = 26.0;
  s.v = 30.0;
  s.est = {26.4, 30.5, 0.7, Eigen::Vector3d(0.5, -0.1, 0.2)};
  s.v_prev = 29.0;
  s.v_hat_prev = 29.3;
  s.v_next = 31.0;
  s.v_hat_next = 30.6;
  const double mu2_prev = 0.11, mu2_next = -0.07;

  const double m = 8e4, b = 600.0, c1 = 0.00077616, c2 = 1.6e-5, r = 50.0;
  auto D1 = [&](double v) { return -2.0 * b / m * v - (c1 * v + c2 * v * v); };
  auto D2 = [&](double v) { return b / m * v; };
  auto B1 = [&](double v) { return -2.0 * b / m - (c1 + 2.0 * c2 * v) - r; };
  const double ev = 0.5;
  const double mu1 = -3.0 * 0.4 - ev;
  const double mu2 = D1(30.0) - D1(30.5) + (-15.0 + r) * ev + D2(29.0) - D2(29.3) + D2(31.0) - D2(30.6);
  const double mu3 = B1(30.0) * mu2 + (-89.0) * ev + (B1(30.5) - B1(30.0)) * (0.7 + mu2) +
                     b / m * mu2_prev + b / m * mu2_next;

  const auto aux = auxiliary_inputs(s, mu2_prev, mu2_next, g, p, line);
  EXPECT_NEAR(aux.mu1, mu1, 1e-12);
  EXPECT_NEAR(aux.mu2, mu2, 1e-10);
  EXPECT_NEAR(aux.mu3, mu3, 1e-8);
  EXPECT_NEAR(aux.mu4(0), -97.2 * ev, 1e-8);
  EXPECT_NEAR(aux.mu4(1), 126.4 * ev, 1e-8);
  EXPECT_NEAR(aux.mu4(2), -4.8 * ev, 1e-8);
}

TEST(ObserverRhs, ZeroEverything) {
  CarriageParams p = table_carriage();
  ObserverSite s;
  s.count = 2;
  const auto d = observer_rhs(s, AuxiliaryInputs{}, 0.0, 0.0, 0.0, p, table_line());
  EXPECT_EQ(d.x, 0.0);
  EXPECT_EQ(d.v, 0.0);
  EXPECT_EQ(d.w, 0.0);
  EXPECT_TRUE(d.f.isZero());
}

TEST(ObserverRhs, PerfectEstimateReproducesCompositeModel) {
  const auto p = table_carriage();
  const auto line = table_line();
  const std::vector<double> w{0.2, -0.1, 0.05};
  CompositeState truth{26.0, 40.0, w[1], Eigen::Vector3d(1.0, 0.3, -0.4)};
  ObserverSite s;
  s.j = 1;
  s.count = 3;
  s.x = truth.x;
  s.v = truth.v;
  s.est = {truth.x, truth.v, truth.w, truth.f};
  const auto od = observer_rhs(s, AuxiliaryInputs{}, 0.8, w[0], w[2], p, line);
  const auto cd = composite_rhs(1, w, truth, 0.8, p, line);
  EXPECT_DOUBLE_EQ(od.x, cd.x);
  EXPECT_DOUBLE_EQ(od.v, cd.v);
  EXPECT_NEAR(od.w, cd.w, 1e-14);
  EXPECT_TRUE(od.f.isApprox(cd.f));
}

TEST(LinearOracle, ZeroStaysZero) {
  const auto pair = build_augmented_pair(table_carriage());
  const auto g = synthesize_gains(pair, all_at(-3.0));
  const std::vector<double> times{0.0, 1.0, 5.0};
  for (const auto& s : linear_error_oracle(0.0, Vector5d::Zero(), g, pair, times)) {
    EXPECT_EQ(s.e_x, 0.0);
    EXPECT_TRUE(s.xi.isZero());
  }
}

TEST(LinearOracle, PositionErrorDecaysExponentially) {
  const auto pair = build_augmented_pair(table_carriage());
  const auto g = synthesize_gains(pair, all_at(-3.0));
  const std::vector<double> times{0.5, 2.0};
  const auto out = linear_error_oracle(1.0, Vector5d::Zero(), g, pair, times);
  EXPECT_NEAR(out[0].e_x, std::exp(-1.5), 1e-15);
  EXPECT_NEAR(out[1].e_x, std::exp(-6.0), 1e-15);
}

// Per-direction norm of exp(5 M) for the table design, from an independent
// matrix-exponential evaluation. The velocity direction is the slowest.
TEST(LinearOracle, UnitErrorsAtFiveSeconds) {
  const auto pair = build_augmented_pair(table_carriage());
  const auto g = synthesize_gains(pair, all_at(-3.0));
  const std::vector<double> times{5.0};
  const double expected[5] = {1.4238272e-2, 6.927534e-3, 8.085902e-3, 3.066396e-3, 6.725764e-3};
  for (int k = 0; k < 5; ++k) {
    const auto out = linear_error_oracle(0.0, Vector5d::Unit(k), g, pair, times);
    EXPECT_NEAR(out[0].xi.norm(), expected[k], 1e-8) << "unit direction " << k;
    if (k > 0) {
      EXPECT_LT(out[0].xi.norm(), 1e-2);
    }
  }
}

TEST(LinearOracle, PolynomialExponentialEnvelope) {
  const auto pair = build_augmented_pair(table_carriage());
  const auto g = synthesize_gains(pair, all_at(-3.0));
  const Eigen::Matrix<double, 5, 5> m = error_matrix(pair, g);
  for (double t = 0.0; t <= 30.0; t += 0.25) {
    const double envelope = 200.0 * (1.0 + std::pow(t, 4)) * std::exp(-3.0 * t);
    const double norm = Eigen::JacobiSVD<Eigen::Matrix<double, 5, 5>>((m * t).exp()).singularValues()(0);
    EXPECT_LE(norm, envelope) << "t = " << t;
  }
}

TEST(LinearOracle, XiAssembly) {
  ObserverGains g;
  g.K << -15, -89, 1, 2, 3;
  const Vector5d xi = assemble_xi(0.5, 0.25, 0.1, g, Eigen::Vector3d(1, 2, 3));
  EXPECT_DOUBLE_EQ(xi(0), 0.5);
  EXPECT_DOUBLE_EQ(xi(1), 0.25 + 0.1 + 15 * 0.5);
  EXPECT_EQ(xi(4), 3.0);
}
