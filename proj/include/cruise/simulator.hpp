#pragma once

/// Fixed-step closed-loop simulation of N trains: true dynamics (composite
/// or plant form), one observer per carriage, follower and head controllers,
/// optional Gaussian disturbance and requirement monitoring.

#include "cruise/controller.hpp"
#include "cruise/faults.hpp"
#include "cruise/model.hpp"
#include "cruise/monitor.hpp"
#include "cruise/observer.hpp"
#include "cruise/reference.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cruise {

enum class Representation { composite, plant, both };

inline std::string to_string(Representation r) {
  switch (r) {
    case Representation::composite: return "composite";
    case Representation::plant: return "plant";
    case Representation::both: return "both";
  }
  return "composite";
}

inline Representation representation_from_string(const std::string& s) {
  if (s == "composite") return Representation::composite;
  if (s == "plant") return Representation::plant;
  if (s == "both") return Representation::both;
  throw ConfigError("unknown representation '" + s + "' (composite, plant, both)");
}

struct InitialCondition {
  double x = 0.0;
  double v = 0.0;
  double w = 0.0;

  bool operator==(const InitialCondition&) const = default;
};

struct ObserverDesign {
  std::vector<std::complex<double>> eigenvalues = std::vector<std::complex<double>>(5, -3.0);
  double k1_eigenvalue = -3.0;
  std::optional<ObserverGains> gains_override;  // same gains for every carriage

  bool operator==(const ObserverDesign& o) const {
    if (eigenvalues != o.eigenvalues || k1_eigenvalue != o.k1_eigenvalue) return false;
    if (gains_override.has_value() != o.gains_override.has_value()) return false;
    return !gains_override ||
           (gains_override->k1 == o.gains_override->k1 && gains_override->K == o.gains_override->K);
  }
};

struct NoiseSpec {
  bool enabled = false;
  double variance = 0.5;  // (m/s^3)^2
  std::uint64_t seed = 0;

  bool operator==(const NoiseSpec&) const = default;
};

struct ScenarioConfig {
  std::string name;
  Consist consist;
  ConstraintSpec constraints;
  FollowerGains follower;
  HeadGains head;
  ObserverDesign observer;
  ReferenceProfile reference;
  std::vector<InitialCondition> initial;
  std::vector<ObserverState> observer_initial;  // empty: x^=x, v^=v, w^=0, f^=0
  std::optional<double> step_s;
  double duration_s = 2400.0;
  std::size_t decimate = 1;
  NoiseSpec noise;
  Representation representation = Representation::composite;
  bool abort_on_violation = false;
  Tolerances tolerances;

  /// Explicit step, else 0.01 s for the composite form and 0.001 s otherwise.
  double step() const {
    if (step_s) return *step_s;
    return representation == Representation::composite ? 0.01 : 0.001;
  }

  bool operator==(const ScenarioConfig&) const = default;
};

/// Configuration rejected before any stepping; lists every failed check.
class ValidationError : public ConfigError {
 public:
  explicit ValidationError(std::vector<Violation> v)
      : ConfigError(describe(v)), violations_(std::move(v)) {}
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  static std::string describe(const std::vector<Violation>& v) {
    std::string s = "configuration invalid:";
    for (const auto& x : v) {
      s += "\n  " + x.name + " (value " + std::to_string(x.value) + ", bound " +
           std::to_string(x.bound) + ")";
      if (!x.context.empty()) s += " [" + x.context + "]";
    }
    return s;
  }
  std::vector<Violation> violations_;
};

inline std::vector<Violation> check_config(const ScenarioConfig& cfg) {
  std::vector<Violation> out;
  auto fail = [&out](std::string name, double value, double bound, std::string ctx = {}) {
    out.push_back({std::move(name), value, bound, std::move(ctx)});
  };
  try {
    cfg.consist.validate();
  } catch (const ConfigError& e) {
    fail(e.what(), 0.0, 0.0);
    return out;
  }
  const std::size_t n = cfg.consist.topology.total();
  if (!(cfg.step() > 0.0)) fail("step_s > 0", cfg.step(), 0.0);
  if (!(cfg.duration_s > 0.0)) fail("duration_s > 0", cfg.duration_s, 0.0);
  if (cfg.decimate < 1) fail("decimate >= 1", static_cast<double>(cfg.decimate), 1.0);
  if (cfg.noise.variance < 0.0) fail("noise variance >= 0", cfg.noise.variance, 0.0);
  try {
    validate(cfg.reference);
    if (cfg.duration_s > horizon(cfg.reference))
      fail("duration_s <= reference horizon", cfg.duration_s, horizon(cfg.reference));
  } catch (const std::invalid_argument& e) {
    fail(e.what(), 0.0, 0.0);
  }
  if (cfg.initial.size() != n)
    fail("one initial condition per carriage", static_cast<double>(cfg.initial.size()),
         static_cast<double>(n));
  if (!cfg.observer_initial.empty() && cfg.observer_initial.size() != n)
    fail("one observer initial state per carriage",
         static_cast<double>(cfg.observer_initial.size()), static_cast<double>(n));
  if (!cfg.observer.gains_override) {
    if (cfg.observer.eigenvalues.size() != 5)
      fail("five observer eigenvalues", static_cast<double>(cfg.observer.eigenvalues.size()), 5.0);
    for (const auto& e : cfg.observer.eigenvalues)
      if (!(e.real() < 0.0)) fail("observer eigenvalue real part < 0", e.real(), 0.0);
    if (!(cfg.observer.k1_eigenvalue < 0.0))
      fail("k1 eigenvalue < 0", cfg.observer.k1_eigenvalue, 0.0);
  } else if (!(cfg.observer.gains_override->k1 > 0.0)) {
    fail("k1 > 0", cfg.observer.gains_override->k1, 0.0);
  }
  for (auto& v : validate_parameters(cfg.follower, cfg.head, cfg.constraints)) out.push_back(v);

  if (cfg.initial.size() == n && !cfg.reference.phases.empty()) {
    std::vector<double> x(n), v(n);
    for (std::size_t c = 0; c < n; ++c) {
      x[c] = cfg.initial[c].x;
      v[c] = cfg.initial[c].v;
    }
    const ReferencePoint r0 = evaluate(cfg.reference, 0.0);
    for (auto& e : validate_initial(cfg.consist.topology, x, v, r0.x, r0.v, cfg.constraints,
                                    cfg.head.ell1))
      out.push_back(e);
  }
  return out;
}

inline void validate_config(const ScenarioConfig& cfg) {
  auto v = check_config(cfg);
  if (!v.empty()) throw ValidationError(std::move(v));
}

// ---------------------------------------------------------------------------
// Integration

class IntegrationFault : public std::runtime_error {
 public:
  IntegrationFault(double t, std::size_t component, const std::string& where)
      : std::runtime_error("non-finite state derivative at t=" + std::to_string(t) + " (" + where +
                           ")"),
        t_(t),
        component_(component) {}
  double time() const { return t_; }
  std::size_t component() const { return component_; }

 private:
  double t_;
  std::size_t component_;
};

namespace detail {

inline void require_finite(const Eigen::VectorXd& d, double t) {
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (!std::isfinite(d(i)))
      throw IntegrationFault(t, static_cast<std::size_t>(i),
                             "component " + std::to_string(i));
}

}  // namespace detail

/// Classical RK4 given the first stage k1 = rhs(t, y). `rhs(t, y, dy)`
/// writes the derivative into dy.
template <class F>
Eigen::VectorXd rk4_step_from(F&& rhs, const Eigen::VectorXd& y, const Eigen::VectorXd& k1,
                              double t, double h) {
  detail::require_finite(k1, t);
  Eigen::VectorXd k2(y.size()), k3(y.size()), k4(y.size());
  rhs(t + h / 2.0, Eigen::VectorXd(y + (h / 2.0) * k1), k2);
  detail::require_finite(k2, t + h / 2.0);
  rhs(t + h / 2.0, Eigen::VectorXd(y + (h / 2.0) * k2), k3);
  detail::require_finite(k3, t + h / 2.0);
  rhs(t + h, Eigen::VectorXd(y + h * k3), k4);
  detail::require_finite(k4, t + h);
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <class F>
Eigen::VectorXd rk4_step(F&& rhs, const Eigen::VectorXd& y, double t, double h) {
  Eigen::VectorXd k1(y.size());
  rhs(t, y, k1);
  return rk4_step_from(rhs, y, k1, t, h);
}

/// Zero-mean Gaussian samples, one per carriage per step.
class DisturbanceStream {
 public:
  DisturbanceStream(const NoiseSpec& spec, std::size_t carriages)
      : enabled_(spec.enabled && spec.variance > 0.0),
        rng_(spec.seed),
        dist_(0.0, std::sqrt(spec.variance)),
        sample_(carriages, 0.0) {}

  std::span<const double> next() {
    if (enabled_)
      for (double& s : sample_) s = dist_(rng_);
    return sample_;
  }

 private:
  bool enabled_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> dist_;
  std::vector<double> sample_;
};

// ---------------------------------------------------------------------------
// Closed loop

/// Optional replacement of the computed control: (flat carriage, t, nominal u) -> u.
using ControlOverride = std::function<double(std::size_t, double, double)>;

struct SimulationHooks {
  ControlOverride control_override;
  /// Head carriages use the front tail's control from the previous
  /// evaluation instead of the current one. Only for ordering tests.
  bool stale_cross_train = false;
};

/// State layout per carriage: x, v, w (composite) or tau (plant), then the
/// estimates x^, v^, w^, f^(3).
inline constexpr std::size_t kStateStride = 9;

struct CarriageDiagnostics {
  double w = 0.0;
  double tau = 0.0;
  double u = 0.0;
  double f_eff = 0.0;
  double f_eff_hat = 0.0;
};

struct EvaluationDiagnostics {
  std::vector<CarriageDiagnostics> carriages;
  std::vector<TrainPairErrors> pairs;
  std::size_t saturated = 0;
};

class ClosedLoop {
 public:
  ClosedLoop(const ScenarioConfig& cfg, Representation rep, double h, SimulationHooks hooks = {})
      : cfg_(cfg), rep_(rep), h_(h), hooks_(std::move(hooks)) {
    if (rep_ == Representation::both)
      throw std::invalid_argument("ClosedLoop runs a single representation");
    const auto& topo = cfg_.consist.topology;
    n_ = topo.total();
    bounds_ = derive_bounds(cfg_.constraints, cfg_.head.ell1);
    gains_.reserve(n_);
    for (const auto& p : cfg_.consist.carriages) {
      if (cfg_.observer.gains_override)
        gains_.push_back(*cfg_.observer.gains_override);
      else
        gains_.push_back(synthesize_gains(p, cfg_.observer.eigenvalues, cfg_.observer.k1_eigenvalue));
    }
    train_of_.resize(n_);
    pos_of_.resize(n_);
    for (std::size_t i = 0; i < topo.train_count(); ++i)
      for (std::size_t j = 0; j < topo.carriage_count(i); ++j) {
        train_of_[topo.index(i, j)] = i;
        pos_of_[topo.index(i, j)] = j;
      }
    last_u_.assign(n_, 0.0);
    x_.resize(n_);
    v_.resize(n_);
    w_.resize(n_);
    mu2_.resize(n_);
    u_.resize(n_);
    aux_.resize(n_);
    sites_.resize(n_);
    f_.resize(n_);
  }

  std::size_t carriages() const { return n_; }
  std::size_t size() const { return kStateStride * n_; }
  const std::vector<ObserverGains>& gains() const { return gains_; }
  Representation representation() const { return rep_; }

  Eigen::VectorXd initial_state() const {
    Eigen::VectorXd y(size());
    const auto& topo = cfg_.consist.topology;
    for (std::size_t i = 0; i < topo.train_count(); ++i) {
      const std::size_t off = topo.offset(i);
      const std::size_t m = topo.carriage_count(i);
      std::vector<double> xs(m), vs(m);
      for (std::size_t j = 0; j < m; ++j) {
        xs[j] = cfg_.initial[off + j].x;
        vs[j] = cfg_.initial[off + j].v;
      }
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t c = off + j;
        const InitialCondition& ic = cfg_.initial[c];
        const std::size_t b = kStateStride * c;
        y(b) = ic.x;
        y(b + 1) = ic.v;
        y(b + 2) = rep_ == Representation::composite
                       ? ic.w
                       : force_from_acceleration(j, xs, vs, ic.w, cfg_.consist.carriages[c],
                                                 cfg_.consist.line);
        ObserverState est;
        if (cfg_.observer_initial.empty()) {
          est.x = ic.x;
          est.v = ic.v;
        } else {
          est = cfg_.observer_initial[c];
        }
        y(b + 3) = est.x;
        y(b + 4) = est.v;
        y(b + 5) = est.w;
        y.segment<3>(static_cast<Eigen::Index>(b + 6)) = est.f;
      }
    }
    return y;
  }

  /// Full-system derivative at (t, y) within integration step `step`.
  /// `disturbance` holds one additive jerk per carriage (never seen by the
  /// observers).
  void derivative(double t, std::size_t step, const Eigen::VectorXd& y,
                  std::span<const double> disturbance, Eigen::VectorXd& dy,
                  EvaluationDiagnostics* diag = nullptr) {
    const auto& topo = cfg_.consist.topology;
    const auto& line = cfg_.consist.line;
    const double d_p = line.coupler.spacing;
    dy.resize(static_cast<Eigen::Index>(size()));

    // Reference and measured states.
    const ReferencePoint ref = evaluate(cfg_.reference, t);
    for (std::size_t c = 0; c < n_; ++c) {
      x_[c] = y(kStateStride * c);
      v_[c] = y(kStateStride * c + 1);
    }
    for (std::size_t i = 0; i < topo.train_count(); ++i) {
      const std::size_t off = topo.offset(i);
      const std::size_t m = topo.carriage_count(i);
      const std::span<const double> xs(x_.data() + off, m);
      const std::span<const double> vs(v_.data() + off, m);
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t c = off + j;
        const double third = y(kStateStride * c + 2);
        w_[c] = rep_ == Representation::composite
                    ? third
                    : acceleration_from_force(j, xs, vs, third, cfg_.consist.carriages[c], line);
      }
    }

    // True faults.
    for (std::size_t c = 0; c < n_; ++c) {
      const FaultModel& fm = cfg_.consist.carriages[c].fault;
      f_[c] = fault_value(t, fm, activity_for_step(fm, step, h_));
    }

    // Observer sites, then mu2 for all carriages, then the remaining inputs.
    for (std::size_t c = 0; c < n_; ++c) {
      const std::size_t b = kStateStride * c;
      const std::size_t j = pos_of_[c];
      const std::size_t m = topo.carriage_count(train_of_[c]);
      ObserverSite& s = sites_[c];
      s.j = j;
      s.count = m;
      s.x = x_[c];
      s.v = v_[c];
      s.est.x = y(b + 3);
      s.est.v = y(b + 4);
      s.est.w = y(b + 5);
      s.est.f = y.segment<3>(static_cast<Eigen::Index>(b + 6));
      s.v_prev = j > 0 ? v_[c - 1] : 0.0;
      s.v_hat_prev = j > 0 ? y(b + 4 - kStateStride) : 0.0;
      s.v_next = j + 1 < m ? v_[c + 1] : 0.0;
      s.v_hat_next = j + 1 < m ? y(b + 4 + kStateStride) : 0.0;
    }
    for (std::size_t c = 0; c < n_; ++c)
      mu2_[c] = velocity_injection(sites_[c], gains_[c], cfg_.consist.carriages[c], line);
    for (std::size_t c = 0; c < n_; ++c) {
      const std::size_t j = pos_of_[c];
      const std::size_t m = sites_[c].count;
      aux_[c] = auxiliary_inputs(sites_[c], j > 0 ? mu2_[c - 1] : 0.0,
                                 j + 1 < m ? mu2_[c + 1] : 0.0, gains_[c],
                                 cfg_.consist.carriages[c], line);
    }

    auto w_hat = [&](std::size_t c) { return sites_[c].est.w; };
    auto w_hat_prev = [&](std::size_t c) { return pos_of_[c] > 0 ? w_hat(c - 1) : 0.0; };
    auto w_hat_next = [&](std::size_t c) {
      return pos_of_[c] + 1 < sites_[c].count ? w_hat(c + 1) : 0.0;
    };
    auto jerk_hat = [&](std::size_t c, double u) {
      return estimated_jerk(sites_[c], aux_[c], u, w_hat_prev(c), w_hat_next(c),
                            cfg_.consist.carriages[c], line);
    };

    // Controls in chain order.
    std::size_t saturated = 0;
    if (diag) diag->pairs.assign(topo.train_count(), {});
    for (std::size_t i = 0; i < topo.train_count(); ++i) {
      const std::size_t off = topo.offset(i);
      const std::size_t m = topo.carriage_count(i);
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t c = off + j;
        const CarriageParams& p = cfg_.consist.carriages[c];
        const Slot slot = slot_of(j, m);
        const ObserverSite& s = sites_[c];
        const double cf_hat = p.fault_jerk_row().dot(s.est.f);
        double u = 0.0;
        if (j == 0) {
          HeadInputs in;
          if (i == 0) {
            in.front = {ref.x, ref.v, ref.w, ref.u};
          } else {
            const std::size_t tail = c - 1;
            const double u_tail = hooks_.stale_cross_train ? last_u_[tail] : u_[tail];
            in.front = {x_[tail], v_[tail], w_hat(tail), jerk_hat(tail, u_tail)};
          }
          in.x = x_[c];
          in.v = v_[c];
          in.w_hat = s.est.w;
          in.w_hat_next = w_hat(c + 1);
          in.b1 = coefficient_b1(slot, v_[c], p, line);
          in.b3 = coefficient_b3(slot, p, line);
          in.fault_jerk_hat = cf_hat;
          in.mu3 = aux_[c].mu3;
          const HeadControl hc = head_control(in, cfg_.head, bounds_, cfg_.constraints.service_distance);
          if (hc.x_saturated || hc.q_saturated) ++saturated;
          if (diag) diag->pairs[i] = hc.errors;
          u = hc.u;
        } else {
          const ObserverSite& sp = sites_[c - 1];
          FollowerInputs in;
          in.args = {s.est.x, sp.est.x, s.est.v, sp.est.v, sp.est.w};
          in.rates = {s.est.v + aux_[c].mu1, sp.est.v + aux_[c - 1].mu1, s.est.w + aux_[c].mu2,
                      sp.est.w + aux_[c - 1].mu2, jerk_hat(c - 1, u_[c - 1])};
          in.w_hat = s.est.w;
          in.w_hat_next = w_hat_next(c);
          in.b1 = coefficient_b1(slot, v_[c], p, line);
          in.b2 = coefficient_b2(slot, p, line);
          in.b3 = coefficient_b3(slot, p, line);
          in.fault_jerk_hat = cf_hat;
          in.mu3 = aux_[c].mu3;
          u = follower_control(in, cfg_.follower, d_p).u;
        }
        if (hooks_.control_override) u = hooks_.control_override(c, t, u);
        u_[c] = u;
      }
    }
    last_u_ = u_;

    // Derivatives.
    for (std::size_t i = 0; i < topo.train_count(); ++i) {
      const std::size_t off = topo.offset(i);
      const std::size_t m = topo.carriage_count(i);
      const std::span<const double> xs(x_.data() + off, m);
      const std::span<const double> vs(v_.data() + off, m);
      const std::span<const double> ws(w_.data() + off, m);
      for (std::size_t j = 0; j < m; ++j) {
        const std::size_t c = off + j;
        const std::size_t b = kStateStride * c;
        const CarriageParams& p = cfg_.consist.carriages[c];
        const double d = disturbance.empty() ? 0.0 : disturbance[c];
        const double ef = p.fault_input().dot(f_[c]);
        dy(b) = v_[c];
        dy(b + 1) = w_[c];
        if (rep_ == Representation::composite) {
          CompositeState self{x_[c], v_[c], w_[c], f_[c]};
          dy(b + 2) = composite_rhs(j, ws, self, u_[c], p, line).w + d;
        } else {
          const double varpi = preliminary_control(u_[c], j, xs, vs, p, line);
          const double tau = y(b + 2);
          dy(b + 2) = -p.actuator_rate * tau + varpi + ef + p.mass * d;
        }
        const ObserverState od = observer_rhs(sites_[c], aux_[c], u_[c], w_hat_prev(c),
                                              w_hat_next(c), p, line);
        dy(b + 3) = od.x;
        dy(b + 4) = od.v;
        dy(b + 5) = od.w;
        dy.segment<3>(static_cast<Eigen::Index>(b + 6)) = od.f;

        if (diag) {
          if (diag->carriages.size() != n_) diag->carriages.resize(n_);
          CarriageDiagnostics& cd = diag->carriages[c];
          cd.w = w_[c];
          cd.tau = rep_ == Representation::composite
                       ? force_from_acceleration(j, xs, vs, w_[c], p, line)
                       : y(b + 2);
          cd.u = u_[c];
          cd.f_eff = ef;
          cd.f_eff_hat = p.fault_input().dot(sites_[c].est.f);
        }
      }
    }
    if (diag) diag->saturated = saturated;
  }

 private:
  ScenarioConfig cfg_;
  Representation rep_;
  double h_;
  SimulationHooks hooks_;
  std::size_t n_ = 0;
  BarrierBounds bounds_;
  std::vector<ObserverGains> gains_;
  std::vector<std::size_t> train_of_, pos_of_;
  std::vector<double> last_u_, x_, v_, w_, mu2_, u_;
  std::vector<AuxiliaryInputs> aux_;
  std::vector<ObserverSite> sites_;
  std::vector<Eigen::Vector3d> f_;
};

/// Thrown when abort-on-violation is set and a hard bound is crossed.
class ConstraintAbort : public std::runtime_error {
 public:
  ConstraintAbort(double t, std::size_t pair, const std::string& quantity, double value)
      : std::runtime_error("constraint violated at t=" + std::to_string(t) + ": pair " +
                           std::to_string(pair + 1) + " " + quantity + "=" + std::to_string(value)),
        t_(t) {}
  double time() const { return t_; }

 private:
  double t_;
};

/// Steps one representation and produces one record row per integration step.
class Simulation {
 public:
  Simulation(const ScenarioConfig& cfg, Representation rep, double h, SimulationHooks hooks = {})
      : cfg_(cfg),
        loop_(cfg, rep, h, std::move(hooks)),
        h_(h),
        steps_(static_cast<std::size_t>(std::llround(cfg.duration_s / h))),
        noise_(cfg.noise, loop_.carriages()),
        layout_{cfg.consist.topology.carriages_per_train},
        y_(loop_.initial_state()),
        k1_(loop_.size()) {
    if (steps_ == 0) throw ConfigError("duration shorter than one step");
  }

  std::size_t steps() const { return steps_; }
  std::size_t index() const { return k_; }
  double time() const { return static_cast<double>(k_) * h_; }
  const Eigen::VectorXd& state() const { return y_; }
  const RecordLayout& layout() const { return layout_; }
  const ClosedLoop& loop() const { return loop_; }
  std::size_t saturated_evaluations() const { return saturated_; }

  /// Fills `row` with the sample at the current time and advances one step
  /// (no advance past the horizon). Returns false once the final sample has
  /// been produced.
  bool next(std::vector<double>& row) {
    if (k_ > steps_) return false;
    const double t = time();
    const std::span<const double> d =
        k_ < steps_ ? noise_.next() : std::span<const double>{};
    std::size_t step = k_;
    auto rhs = [this, &d, &step](double tt, const Eigen::VectorXd& yy, Eigen::VectorXd& dd) {
      loop_.derivative(tt, step, yy, d, dd);
    };
    loop_.derivative(t, step, y_, d, k1_, &diag_);
    saturated_ += diag_.saturated;
    fill_row(t, row);
    if (k_ < steps_) y_ = rk4_step_from(rhs, y_, k1_, t, h_);
    ++k_;
    return true;
  }

 private:
  void fill_row(double t, std::vector<double>& row) const {
    row.assign(layout_.width(), 0.0);
    row[0] = t;
    for (std::size_t c = 0; c < loop_.carriages(); ++c) {
      const std::size_t b = kStateStride * c;
      const CarriageDiagnostics& cd = diag_.carriages[c];
      auto put = [&](CarriageField f, double v) { row[layout_.carriage_column(c, f)] = v; };
      put(CarriageField::x, y_(b));
      put(CarriageField::v, y_(b + 1));
      put(CarriageField::w, cd.w);
      put(CarriageField::tau, cd.tau);
      put(CarriageField::u, cd.u);
      put(CarriageField::f_eff, cd.f_eff);
      put(CarriageField::f_eff_hat, cd.f_eff_hat);
      put(CarriageField::e_x, y_(b + 3) - y_(b));
      put(CarriageField::e_v, y_(b + 4) - y_(b + 1));
      put(CarriageField::e_w, y_(b + 5) - cd.w);
    }
    for (std::size_t i = 0; i < layout_.train_count(); ++i) {
      const TrainPairErrors& e = diag_.pairs[i];
      row[layout_.pair_column(i, PairField::eps)] = e.epsilon;
      row[layout_.pair_column(i, PairField::xtilde)] = e.x_tilde;
      row[layout_.pair_column(i, PairField::vtilde)] = e.v_tilde;
      row[layout_.pair_column(i, PairField::qtilde)] = e.q_tilde;
    }
  }

  ScenarioConfig cfg_;
  ClosedLoop loop_;
  double h_;
  std::size_t steps_;
  DisturbanceStream noise_;
  RecordLayout layout_;
  Eigen::VectorXd y_;
  Eigen::VectorXd k1_;
  EvaluationDiagnostics diag_;
  std::size_t k_ = 0;
  std::size_t saturated_ = 0;
};

/// Fault-window edges per carriage, snapped to the step grid.
inline std::vector<std::vector<double>> fault_transitions(const ScenarioConfig& cfg, double h) {
  std::vector<std::vector<double>> out;
  for (const auto& p : cfg.consist.carriages) {
    std::vector<double> edges;
    for (const Window& w : {p.fault.const_window, p.fault.periodic_window}) {
      if (!(w.end > w.start)) continue;
      edges.push_back(std::round(w.start / h) * h);
      edges.push_back(std::round(w.end / h) * h);
    }
    out.push_back(std::move(edges));
  }
  return out;
}

inline MonitorSpec monitor_spec(const ScenarioConfig& cfg, double h) {
  MonitorSpec m;
  m.layout = RecordLayout{cfg.consist.topology.carriages_per_train};
  m.bounds = derive_bounds(cfg.constraints, cfg.head.ell1);
  m.sigma1 = cfg.constraints.sigma1;
  m.sigma2 = cfg.constraints.sigma2;
  m.d_p = cfg.consist.line.coupler.spacing;
  m.duration_s = static_cast<double>(std::llround(cfg.duration_s / h)) * h;
  m.tail_window_s = cfg.tolerances.tail_window_s;
  m.tol = cfg.noise.enabled ? cfg.tolerances.noisy : cfg.tolerances.clean;
  m.observer = cfg.tolerances.observer;
  m.transitions = fault_transitions(cfg, h);
  return m;
}

struct RunOptions {
  bool keep_record = true;
  /// Called with every emitted (decimated) row of the primary representation.
  std::function<void(std::span<const double>)> sink;
  /// Same for the plant-form twin of representation "both".
  std::function<void(std::span<const double>)> plant_sink;
  SimulationHooks hooks;
};

struct SimulationResult {
  SimulationRecord record;                      // primary (composite unless plant-only)
  std::optional<SimulationRecord> plant_record;  // representation "both"
  SummaryReport summary;
};

namespace detail {

inline void check_abort(const ScenarioConfig& cfg, const RecordLayout& L,
                        std::span<const double> row) {
  const BarrierBounds b = derive_bounds(cfg.constraints, cfg.head.ell1);
  for (std::size_t i = 0; i < L.train_count(); ++i) {
    const double xt = row[L.pair_column(i, PairField::xtilde)];
    const double vt = row[L.pair_column(i, PairField::vtilde)];
    if (!(xt > -b.rho2 && xt < b.rho1)) throw ConstraintAbort(row[0], i, "xtilde", xt);
    if (!(vt > -cfg.constraints.sigma2 && vt < cfg.constraints.sigma1))
      throw ConstraintAbort(row[0], i, "vtilde", vt);
  }
}

}  // namespace detail

/// Validates, runs and monitors a scenario. For representation "both" the
/// composite and plant forms run in lockstep at the same step; the summary
/// carries their maximum position and velocity discrepancy.
inline SimulationResult run_scenario(const ScenarioConfig& cfg, RunOptions opts = {}) {
  validate_config(cfg);
  const double h = cfg.step();
  const bool both = cfg.representation == Representation::both;
  const Representation primary =
      cfg.representation == Representation::plant ? Representation::plant : Representation::composite;

  Simulation sim(cfg, primary, h, opts.hooks);
  std::optional<Simulation> twin;
  if (both) twin.emplace(cfg, Representation::plant, h, opts.hooks);

  RequirementMonitor monitor(monitor_spec(cfg, h));
  SimulationResult result;
  result.record.layout = sim.layout();
  if (both) result.plant_record = SimulationRecord{sim.layout(), {}};
  ComparisonSummary cmp;

  std::vector<double> row, twin_row;
  std::size_t k = 0;
  while (sim.next(row)) {
    if (twin) {
      twin->next(twin_row);
      for (std::size_t c = 0; c < sim.loop().carriages(); ++c) {
        const std::size_t cx = sim.layout().carriage_column(c, CarriageField::x);
        const std::size_t cv = sim.layout().carriage_column(c, CarriageField::v);
        cmp.max_abs_dx_m = std::max(cmp.max_abs_dx_m, std::abs(row[cx] - twin_row[cx]));
        cmp.max_abs_dv_mps = std::max(cmp.max_abs_dv_mps, std::abs(row[cv] - twin_row[cv]));
      }
    }
    if (cfg.abort_on_violation) detail::check_abort(cfg, sim.layout(), row);
    if (k % cfg.decimate == 0) {
      monitor.observe(row);
      if (opts.keep_record) {
        result.record.append(row);
        if (twin) result.plant_record->append(twin_row);
      }
      if (opts.sink) opts.sink(row);
      if (twin && opts.plant_sink) opts.plant_sink(twin_row);
    }
    ++k;
  }

  result.summary = monitor.finish();
  result.summary.seed = cfg.noise.seed;
  result.summary.noise = cfg.noise.enabled;
  result.summary.step_s = h;
  result.summary.representation = to_string(cfg.representation);
  result.summary.saturated_evaluations = sim.saturated_evaluations();
  if (both) result.summary.comparison = cmp;
  return result;
}

}  // namespace cruise
