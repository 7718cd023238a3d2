#include "cruise/io.hpp"
#include "cruise/monitor.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace cruise;

namespace {

RecordLayout two_by_two() { return RecordLayout{{2, 2}}; }

MonitorSpec spec_for(const RecordLayout& layout) {
  MonitorSpec s;
  s.layout = layout;
  s.bounds = {1947.0, 2351.0, 26.49, 30.53};
  s.sigma1 = 50.0;
  s.sigma2 = 50.0;
  s.d_p = 26.0;
  s.duration_s = 100.0;
  s.tail_window_s = 10.0;
  return s;
}

// Carriages at exact spacing, all pair errors set to `xt`, `vt`.
std::vector<double> row_at(const RecordLayout& L, double t, double xt, double vt) {
  std::vector<double> r(L.width(), 0.0);
  r[0] = t;
  for (std::size_t c = 0; c < L.carriage_count(); ++c) {
    r[L.carriage_column(c, CarriageField::x)] = 1000.0 - 26.0 * static_cast<double>(c);
    r[L.carriage_column(c, CarriageField::v)] = 20.0;
  }
  for (std::size_t i = 0; i < L.train_count(); ++i) {
    r[L.pair_column(i, PairField::xtilde)] = xt;
    r[L.pair_column(i, PairField::vtilde)] = vt;
    r[L.pair_column(i, PairField::qtilde)] = vt + 0.01 * xt;
  }
  return r;
}

}  // namespace

TEST(Layout, ColumnNames) {
  const auto L = two_by_two();
  const auto names = L.column_names();
  EXPECT_EQ(names.size(), L.width());
  EXPECT_EQ(names.size(), 1u + 40u + 8u);
  EXPECT_EQ(names[0], "t_s");
  EXPECT_EQ(names[L.carriage_column(3, CarriageField::e_w)], "c2_2_e_w_mps2");
  EXPECT_EQ(names[L.pair_column(1, PairField::qtilde)], "p2_qtilde_mps");
}

TEST(Layout, RecoveredFromHeader) {
  const RecordLayout L{{3, 2, 4}};
  EXPECT_EQ(RecordLayout::from_column_names(L.column_names()), L);
  auto names = L.column_names();
  std::swap(names[1], names[2]);
  EXPECT_THROW(RecordLayout::from_column_names(names), std::invalid_argument);
}

TEST(Monitor, QuietRunPassesEverything) {
  const auto L = two_by_two();
  SimulationRecord rec{L, {}};
  for (int k = 0; k <= 100; ++k) rec.append(row_at(L, k, 0.2, 0.01));
  const auto r = monitor_requirements(rec, spec_for(L));
  EXPECT_TRUE(r.verdicts.r1);
  EXPECT_TRUE(r.verdicts.r2);
  EXPECT_TRUE(r.verdicts.r3);
  EXPECT_TRUE(r.verdicts.r3_prime);
  EXPECT_TRUE(r.events.empty());
  EXPECT_NEAR(r.pairs[0].tail_mean_abs_xtilde, 0.2, 1e-12);
  EXPECT_EQ(r.samples, 101u);
}

TEST(Monitor, BoundCrossingRecordedOnceAtFirstSample) {
  const auto L = two_by_two();
  const double rho1 = 1947.0;
  RequirementMonitor m(spec_for(L));
  for (int k = 0; k <= 100; ++k) {
    const bool outside = k >= 40 && k < 45;
    auto row = row_at(L, k, 0.0, 0.0);
    if (outside) row[L.pair_column(1, PairField::xtilde)] = rho1 + 1.0;
    m.observe(row);
  }
  const auto r = m.finish();
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].t, 40.0);
  EXPECT_EQ(r.events[0].pair, 1u);
  EXPECT_EQ(r.events[0].quantity, "xtilde");
  EXPECT_EQ(r.events[0].value, rho1 + 1.0);
  EXPECT_FALSE(r.verdicts.r2);
  EXPECT_TRUE(r.verdicts.r3);
  EXPECT_EQ(r.pairs[1].xtilde_max, rho1 + 1.0);
}

TEST(Monitor, BoundaryValueIsAViolation) {
  const auto L = two_by_two();
  SimulationRecord rec{L, {}};
  for (int k = 0; k <= 100; ++k) rec.append(row_at(L, k, 0.0, k == 3 ? -50.0 : 0.0));
  const auto r = monitor_requirements(rec, spec_for(L));
  EXPECT_FALSE(r.verdicts.r3);
  EXPECT_EQ(r.events.front().quantity, "vtilde");
}

TEST(Monitor, LargeTailErrorFailsConvergence) {
  const auto L = two_by_two();
  SimulationRecord rec{L, {}};
  for (int k = 0; k <= 100; ++k) rec.append(row_at(L, k, k >= 90 ? 3.0 : 0.0, 0.0));
  const auto r = monitor_requirements(rec, spec_for(L));
  EXPECT_FALSE(r.verdicts.r2);
  EXPECT_TRUE(r.events.empty());
}

TEST(Monitor, GapErrorUsesAdjacentCarriages) {
  const auto L = two_by_two();
  SimulationRecord rec{L, {}};
  for (int k = 0; k <= 100; ++k) {
    auto row = row_at(L, k, 0.0, 0.0);
    row[L.carriage_column(1, CarriageField::x)] -= 0.1;  // gap 26.1 in train 1
    rec.append(row);
  }
  const auto r = monitor_requirements(rec, spec_for(L));
  EXPECT_NEAR(r.trains[0].tail_mean_gap_error_m, 0.1, 1e-9);
  EXPECT_NEAR(r.trains[1].tail_mean_gap_error_m, 0.0, 1e-12);
  EXPECT_FALSE(r.verdicts.r1);
}

TEST(Monitor, ObserverIntervalsFollowFaultEdges) {
  const auto L = two_by_two();
  auto spec = spec_for(L);
  spec.duration_s = 300.0;
  spec.transitions = {{150.0}, {50.0}, {}, {}};
  RequirementMonitor m(spec);
  for (int k = 0; k <= 300; ++k) {
    auto row = row_at(L, k, 0.0, 0.0);
    if (k >= 140 && k < 150) row[L.carriage_column(0, CarriageField::e_w)] = 1e-3;
    m.observe(row);
  }
  const auto r = m.finish();
  // carriage 1: [0,150) and [150,300); carriage 2: [50,300); 3 and 4: [0,300)
  ASSERT_EQ(r.observer.size(), 5u);
  EXPECT_FALSE(r.observer[0].pass);
  EXPECT_EQ(r.observer[0].end, 150.0);
  EXPECT_TRUE(r.observer[1].pass);
  EXPECT_EQ(r.observer[2].start, 50.0);
  EXPECT_FALSE(r.verdicts.observer);
}

TEST(Monitor, EventCapCountsDropped) {
  const auto L = two_by_two();
  SimulationRecord rec{L, {}};
  for (int k = 0; k <= 3000; ++k) rec.append(row_at(L, k * 0.03, k % 2 ? 5000.0 : 0.0, 0.0));
  const auto r = monitor_requirements(rec, spec_for(L));
  EXPECT_EQ(r.events.size(), RequirementMonitor::kMaxEvents);
  EXPECT_GT(r.dropped_events, 0u);
}

TEST(Csv, RoundTripIsExact) {
  const auto L = two_by_two();
  SimulationRecord rec{L, {}};
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1e3);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> row(L.width());
    for (auto& v : row) v = n(rng);
    row[0] = 0.01 * k;
    rec.append(row);
  }
  rec.data[5] = 1e-300;
  rec.data[6] = -0.0;
  std::stringstream ss;
  write_csv(ss, rec);
  const auto back = read_csv(ss);
  EXPECT_EQ(back.layout, L);
  ASSERT_EQ(back.data.size(), rec.data.size());
  for (std::size_t i = 0; i < rec.data.size(); ++i) EXPECT_EQ(back.data[i], rec.data[i]);
}

TEST(Csv, RederivedVerdictsMatchStreaming) {
  const auto L = two_by_two();
  SimulationRecord rec{L, {}};
  for (int k = 0; k <= 100; ++k) rec.append(row_at(L, k, 0.3 * std::sin(0.1 * k), 0.02));
  std::stringstream ss;
  write_csv(ss, rec);
  const auto a = monitor_requirements(rec, spec_for(L));
  const auto b = monitor_requirements(read_csv(ss), spec_for(L));
  EXPECT_EQ(a.pairs[0].tail_mean_abs_xtilde, b.pairs[0].tail_mean_abs_xtilde);
  EXPECT_EQ(a.verdicts.all(), b.verdicts.all());
}

TEST(Csv, MalformedNumberReportsLine) {
  const auto L = two_by_two();
  std::stringstream ss;
  const auto names = L.column_names();
  for (std::size_t i = 0; i < names.size(); ++i) ss << (i ? "," : "") << names[i];
  ss << "\n";
  for (std::size_t i = 0; i < L.width(); ++i) ss << (i ? "," : "") << (i == 3 ? "abc" : "1");
  ss << "\n";
  try {
    read_csv(ss);
    FAIL() << "expected parse failure";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}
