#pragma once

/// Simulation record layout and the R1/R2/R3 requirement monitor. The
/// monitor consumes rows one at a time, so verdicts can be computed while a
/// run streams to disk or re-derived later from a stored time series.

#include "cruise/controller.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cruise {

enum class CarriageField : std::size_t { x = 0, v, w, tau, u, f_eff, f_eff_hat, e_x, e_v, e_w };
enum class PairField : std::size_t { eps = 0, xtilde, vtilde, qtilde };

inline constexpr std::size_t kCarriageFields = 10;
inline constexpr std::size_t kPairFields = 4;

inline constexpr std::array<std::string_view, kCarriageFields> kCarriageSuffixes = {
    "x_m", "v_mps", "w_mps2", "tau_N", "u_mps3", "f_eff_Nps", "f_eff_hat_Nps", "e_x_m", "e_v_mps",
    "e_w_mps2"};
inline constexpr std::array<std::string_view, kPairFields> kPairSuffixes = {
    "eps_m", "xtilde_m", "vtilde_mps", "qtilde_mps"};

/// Column layout: t_s, then per carriage (train-major) the carriage fields,
/// then per train pair i (train i against the train ahead or the reference)
/// the pair fields.
struct RecordLayout {
  std::vector<std::size_t> carriages_per_train;

  std::size_t train_count() const { return carriages_per_train.size(); }
  std::size_t carriage_count() const {
    std::size_t n = 0;
    for (auto m : carriages_per_train) n += m;
    return n;
  }
  std::size_t width() const {
    return 1 + kCarriageFields * carriage_count() + kPairFields * train_count();
  }
  std::size_t carriage_column(std::size_t flat, CarriageField f) const {
    return 1 + kCarriageFields * flat + static_cast<std::size_t>(f);
  }
  std::size_t pair_column(std::size_t train, PairField f) const {
    return 1 + kCarriageFields * carriage_count() + kPairFields * train +
           static_cast<std::size_t>(f);
  }

  std::vector<std::string> column_names() const {
    std::vector<std::string> names{"t_s"};
    for (std::size_t i = 0; i < train_count(); ++i)
      for (std::size_t j = 0; j < carriages_per_train[i]; ++j)
        for (auto s : kCarriageSuffixes)
          names.push_back("c" + std::to_string(i + 1) + "_" + std::to_string(j + 1) + "_" +
                          std::string(s));
    for (std::size_t i = 0; i < train_count(); ++i)
      for (auto s : kPairSuffixes) names.push_back("p" + std::to_string(i + 1) + "_" + std::string(s));
    return names;
  }

  /// Recovers the topology from a header and checks it matches exactly.
  static RecordLayout from_column_names(const std::vector<std::string>& names) {
    RecordLayout layout;
    for (const auto& n : names) {
      if (n.size() < 2 || n[0] != 'c') continue;
      std::size_t i = 0, j = 0;
      const char* p = n.data() + 1;
      const char* end = n.data() + n.size();
      auto r1 = std::from_chars(p, end, i);
      if (r1.ec != std::errc() || r1.ptr == end || *r1.ptr != '_') continue;
      auto r2 = std::from_chars(r1.ptr + 1, end, j);
      if (r2.ec != std::errc() || i == 0 || j == 0) continue;
      if (layout.carriages_per_train.size() < i) layout.carriages_per_train.resize(i, 0);
      layout.carriages_per_train[i - 1] = std::max(layout.carriages_per_train[i - 1], j);
    }
    if (layout.column_names() != names)
      throw std::invalid_argument("record header does not match the fixed column layout");
    return layout;
  }

  bool operator==(const RecordLayout&) const = default;
};

/// Row-major sampled time series.
struct SimulationRecord {
  RecordLayout layout;
  std::vector<double> data;

  std::size_t rows() const { return layout.width() == 0 ? 0 : data.size() / layout.width(); }
  std::span<const double> row(std::size_t k) const {
    return {data.data() + k * layout.width(), layout.width()};
  }
  double at(std::size_t k, std::size_t column) const { return data[k * layout.width() + column]; }
  void append(std::span<const double> r) { data.insert(data.end(), r.begin(), r.end()); }
};

struct ToleranceSet {
  double xtilde_m = 1.0;
  double vtilde_mps = 0.05;
  double gap_m = 0.05;
  double gap_velocity_mps = 0.02;

  bool operator==(const ToleranceSet&) const = default;
};

struct ObserverTolerance {
  double settle_window_s = 10.0;
  double min_interval_s = 100.0;
  double fault_rel = 1e-3;
  double accel_abs = 1e-4;

  bool operator==(const ObserverTolerance&) const = default;
};

struct Tolerances {
  double tail_window_s = 100.0;
  ToleranceSet clean{1.0, 0.05, 0.05, 0.02};
  ToleranceSet noisy{5.0, 0.5, 0.5, 0.2};
  ObserverTolerance observer;

  bool operator==(const Tolerances&) const = default;
};

struct MonitorSpec {
  RecordLayout layout;
  BarrierBounds bounds;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  double d_p = 0.0;
  double duration_s = 0.0;
  double tail_window_s = 100.0;
  ToleranceSet tol;
  ObserverTolerance observer;
  std::vector<std::vector<double>> transitions;  // per carriage, fault-window edges
};

struct PairSummary {
  double xtilde_min = std::numeric_limits<double>::infinity();
  double xtilde_max = -std::numeric_limits<double>::infinity();
  double vtilde_min = std::numeric_limits<double>::infinity();
  double vtilde_max = -std::numeric_limits<double>::infinity();
  double qtilde_min = std::numeric_limits<double>::infinity();
  double qtilde_max = -std::numeric_limits<double>::infinity();
  double tail_mean_abs_xtilde = 0.0;
  double tail_mean_abs_vtilde = 0.0;
};

struct TrainSummary {
  double tail_mean_gap_error_m = 0.0;       // worst adjacent pair
  double tail_mean_gap_velocity_mps = 0.0;  // worst adjacent pair
};

struct ObserverInterval {
  std::size_t carriage = 0;
  double start = 0.0;
  double end = 0.0;
  double max_fault_error = 0.0;  // |E f - E f^| in the settle window
  double fault_scale = 1.0;      // max(1, |E f|) in the settle window
  double max_accel_error = 0.0;  // |e_w| in the settle window
  bool pass = false;
};

struct ViolationEvent {
  double t = 0.0;
  std::size_t pair = 0;  // zero-based train index
  std::string quantity;  // xtilde, vtilde or qtilde
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct Verdicts {
  bool r1 = false;
  bool r2 = false;
  bool r3 = false;
  bool r3_prime = false;  // q~ bounds, diagnostic
  bool observer = false;  // settling, diagnostic

  bool all() const { return r1 && r2 && r3; }
};

struct ComparisonSummary {
  double max_abs_dx_m = 0.0;
  double max_abs_dv_mps = 0.0;
};

struct SummaryReport {
  std::vector<PairSummary> pairs;
  std::vector<TrainSummary> trains;
  std::vector<ObserverInterval> observer;
  std::vector<ViolationEvent> events;
  std::size_t dropped_events = 0;
  Verdicts verdicts;
  ToleranceSet tolerances;
  ObserverTolerance observer_tolerance;
  double tail_window_s = 0.0;
  BarrierBounds bounds;
  double sigma1 = 0.0;
  double sigma2 = 0.0;
  std::size_t samples = 0;
  double final_time_s = 0.0;

  // Run metadata, filled by the runner.
  std::uint64_t seed = 0;
  bool noise = false;
  double step_s = 0.0;
  std::string representation;
  std::string config_hash;
  std::size_t saturated_evaluations = 0;
  std::optional<ComparisonSummary> comparison;
};

class RequirementMonitor {
 public:
  static constexpr std::size_t kMaxEvents = 1000;

  explicit RequirementMonitor(MonitorSpec spec) : spec_(std::move(spec)) {
    const std::size_t trains = spec_.layout.train_count();
    const std::size_t cars = spec_.layout.carriage_count();
    if (!spec_.transitions.empty() && spec_.transitions.size() != cars)
      throw std::invalid_argument("monitor: transitions must be given per carriage");
    report_.pairs.resize(trains);
    report_.trains.resize(trains);
    in_violation_.assign(trains * 3, false);
    pair_sums_.assign(trains * 2, 0.0);
    gap_sums_.assign(cars * 2, 0.0);
    tail_start_ = spec_.duration_s - spec_.tail_window_s;
    for (std::size_t c = 0; c < cars; ++c) {
      std::vector<double> edges{0.0};
      if (!spec_.transitions.empty())
        for (double e : spec_.transitions[c])
          if (e > 0.0 && e < spec_.duration_s) edges.push_back(e);
      edges.push_back(spec_.duration_s);
      std::sort(edges.begin(), edges.end());
      edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
      for (std::size_t k = 0; k + 1 < edges.size(); ++k)
        if (edges[k + 1] - edges[k] >= spec_.observer.min_interval_s)
          report_.observer.push_back({c, edges[k], edges[k + 1], 0.0, 1.0, 0.0, false});
    }
  }

  void observe(std::span<const double> row) {
    const RecordLayout& L = spec_.layout;
    if (row.size() != L.width()) throw std::invalid_argument("monitor: row width mismatch");
    const double t = row[0];
    const double slack = 1e-9 * std::max(1.0, std::abs(t));
    ++report_.samples;
    report_.final_time_s = t;
    const bool in_tail = t >= tail_start_ - slack;
    if (in_tail) ++tail_samples_;

    for (std::size_t i = 0; i < L.train_count(); ++i) {
      const double xt = row[L.pair_column(i, PairField::xtilde)];
      const double vt = row[L.pair_column(i, PairField::vtilde)];
      const double qt = row[L.pair_column(i, PairField::qtilde)];
      PairSummary& s = report_.pairs[i];
      s.xtilde_min = std::min(s.xtilde_min, xt);
      s.xtilde_max = std::max(s.xtilde_max, xt);
      s.vtilde_min = std::min(s.vtilde_min, vt);
      s.vtilde_max = std::max(s.vtilde_max, vt);
      s.qtilde_min = std::min(s.qtilde_min, qt);
      s.qtilde_max = std::max(s.qtilde_max, qt);
      check(t, i, 0, "xtilde", xt, -spec_.bounds.rho2, spec_.bounds.rho1);
      check(t, i, 1, "vtilde", vt, -spec_.sigma2, spec_.sigma1);
      check(t, i, 2, "qtilde", qt, -spec_.bounds.varrho2, spec_.bounds.varrho1);
      if (in_tail) {
        pair_sums_[2 * i] += std::abs(xt);
        pair_sums_[2 * i + 1] += std::abs(vt);
      }
    }

    if (in_tail) {
      for (std::size_t i = 0, off = 0; i < L.train_count(); off += L.carriages_per_train[i], ++i)
        for (std::size_t j = 1; j < L.carriages_per_train[i]; ++j) {
          const std::size_t c = off + j;
          const double gap = row[L.carriage_column(c - 1, CarriageField::x)] -
                             row[L.carriage_column(c, CarriageField::x)];
          const double dv = row[L.carriage_column(c - 1, CarriageField::v)] -
                            row[L.carriage_column(c, CarriageField::v)];
          gap_sums_[2 * c] += std::abs(gap - spec_.d_p);
          gap_sums_[2 * c + 1] += std::abs(dv);
        }
    }

    for (auto& iv : report_.observer) {
      const double from = iv.end - spec_.observer.settle_window_s;
      if (!(t >= from - slack && t < iv.end - slack)) continue;
      const double ef = row[L.carriage_column(iv.carriage, CarriageField::f_eff)];
      const double ef_hat = row[L.carriage_column(iv.carriage, CarriageField::f_eff_hat)];
      const double ew = row[L.carriage_column(iv.carriage, CarriageField::e_w)];
      iv.max_fault_error = std::max(iv.max_fault_error, std::abs(ef - ef_hat));
      iv.fault_scale = std::max(iv.fault_scale, std::abs(ef));
      iv.max_accel_error = std::max(iv.max_accel_error, std::abs(ew));
    }
  }

  SummaryReport finish() {
    const RecordLayout& L = spec_.layout;
    SummaryReport r = report_;
    r.tolerances = spec_.tol;
    r.observer_tolerance = spec_.observer;
    r.tail_window_s = spec_.tail_window_s;
    r.bounds = spec_.bounds;
    r.sigma1 = spec_.sigma1;
    r.sigma2 = spec_.sigma2;

    const double n = tail_samples_ == 0 ? std::numeric_limits<double>::quiet_NaN()
                                        : static_cast<double>(tail_samples_);
    bool hard_x = true, hard_v = true, hard_q = true;
    for (const auto& e : r.events) {
      if (e.quantity == "xtilde") hard_x = false;
      if (e.quantity == "vtilde") hard_v = false;
      if (e.quantity == "qtilde") hard_q = false;
    }
    if (r.dropped_events > 0) hard_x = hard_v = hard_q = false;

    bool tail_x = true, tail_v = true, r1 = true;
    for (std::size_t i = 0; i < L.train_count(); ++i) {
      r.pairs[i].tail_mean_abs_xtilde = pair_sums_[2 * i] / n;
      r.pairs[i].tail_mean_abs_vtilde = pair_sums_[2 * i + 1] / n;
      tail_x = tail_x && r.pairs[i].tail_mean_abs_xtilde < spec_.tol.xtilde_m;
      tail_v = tail_v && r.pairs[i].tail_mean_abs_vtilde < spec_.tol.vtilde_mps;
    }
    for (std::size_t i = 0, off = 0; i < L.train_count(); off += L.carriages_per_train[i], ++i) {
      TrainSummary& ts = r.trains[i];
      for (std::size_t j = 1; j < L.carriages_per_train[i]; ++j) {
        ts.tail_mean_gap_error_m = std::max(ts.tail_mean_gap_error_m, gap_sums_[2 * (off + j)] / n);
        ts.tail_mean_gap_velocity_mps =
            std::max(ts.tail_mean_gap_velocity_mps, gap_sums_[2 * (off + j) + 1] / n);
      }
      r1 = r1 && ts.tail_mean_gap_error_m < spec_.tol.gap_m &&
           ts.tail_mean_gap_velocity_mps < spec_.tol.gap_velocity_mps;
    }

    bool obs = true;
    for (auto& iv : r.observer) {
      iv.pass = iv.max_fault_error < spec_.observer.fault_rel * iv.fault_scale &&
                iv.max_accel_error < spec_.observer.accel_abs;
      obs = obs && iv.pass;
    }

    r.verdicts.r1 = r1 && tail_samples_ > 0;
    r.verdicts.r2 = hard_x && tail_x;
    r.verdicts.r3 = hard_v && tail_v;
    r.verdicts.r3_prime = hard_q;
    r.verdicts.observer = obs;
    return r;
  }

 private:
  void check(double t, std::size_t pair, std::size_t kind, const char* name, double value,
             double lower, double upper) {
    const bool bad = !(value > lower && value < upper);
    auto flag = in_violation_.begin() + static_cast<std::ptrdiff_t>(pair * 3 + kind);
    if (bad && !*flag) {
      if (report_.events.size() < kMaxEvents)
        report_.events.push_back({t, pair, name, value, lower, upper});
      else
        ++report_.dropped_events;
    }
    *flag = bad;
  }

  MonitorSpec spec_;
  SummaryReport report_;
  std::vector<bool> in_violation_;
  std::vector<double> pair_sums_;
  std::vector<double> gap_sums_;
  std::size_t tail_samples_ = 0;
  double tail_start_ = 0.0;
};

/// Verdicts from a complete record.
inline SummaryReport monitor_requirements(const SimulationRecord& record, MonitorSpec spec) {
  if (!(spec.layout == record.layout))
    throw std::invalid_argument("monitor: record layout does not match the spec");
  RequirementMonitor m(std::move(spec));
  for (std::size_t k = 0; k < record.rows(); ++k) m.observe(record.row(k));
  return m.finish();
}

}  // namespace cruise
