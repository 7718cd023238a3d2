#pragma once

/// Actuator fault signals: windowed constant and sinusoidal modes, and the
/// exosystem the observer assumes for them.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace cruise {

/// Closed time interval [start, end] in seconds.
struct Window {
  double start = 0.0;
  double end = 0.0;

  bool contains(double t) const { return start <= t && t <= end; }
  bool operator==(const Window&) const = default;
};

/// Per-carriage fault parameterisation. The fault state f = (f1, f2, f3)
/// holds a constant mode f1 and a rotation pair (f2, f3) at frequency omega.
struct FaultModel {
  double omega = 0.0;               // rad/s
  double upsilon = 0.0;             // gain on f1, N/s per unit
  double nu = 0.0;                  // gain on omega*f3, N/s per unit
  double const_amplitude = 0.0;     // F_c
  double periodic_amplitude = 0.0;  // F_p
  double phase = 0.0;               // F_phi, rad
  Window const_window;
  Window periodic_window;

  void validate() const {
    if (!(omega >= 0.0)) throw std::invalid_argument("fault omega must be >= 0");
    if (!(const_window.start <= const_window.end))
      throw std::invalid_argument("constant fault window start > end");
    if (!(periodic_window.start <= periodic_window.end))
      throw std::invalid_argument("periodic fault window start > end");
  }

  bool operator==(const FaultModel&) const = default;
};

inline Eigen::Matrix3d exosystem_matrix(double omega) {
  Eigen::Matrix3d s = Eigen::Matrix3d::Zero();
  s(1, 2) = omega;
  s(2, 1) = -omega;
  return s;
}

/// E = [upsilon, 0, nu*omega].
inline Eigen::RowVector3d fault_input_row(const FaultModel& model) {
  return {model.upsilon, 0.0, model.nu * model.omega};
}

/// Which fault modes are switched on during an integration step.
struct WindowActivity {
  bool constant = false;
  bool periodic = false;
};

/// Windows snapped to the integration grid: a mode is on for step k
/// (covering [k h, (k+1) h]) iff round(start/h) <= k < round(end/h).
inline WindowActivity activity_for_step(const FaultModel& model, std::int64_t step, double h) {
  auto on = [&](const Window& w) {
    const auto first = static_cast<std::int64_t>(std::llround(w.start / h));
    const auto last = static_cast<std::int64_t>(std::llround(w.end / h));
    return first <= step && step < last;
  };
  return {on(model.const_window), on(model.periodic_window)};
}

inline Eigen::Vector3d fault_value(double t, const FaultModel& model, WindowActivity active) {
  Eigen::Vector3d f = Eigen::Vector3d::Zero();
  if (active.constant) f(0) = model.const_amplitude;
  if (active.periodic) {
    const double angle = model.omega * t + model.phase;
    // (f2, f3) rotate so that f2' = omega f3 and f3' = -omega f2.
    f(1) = model.periodic_amplitude * std::sin(angle);
    f(2) = model.periodic_amplitude * std::cos(angle);
  }
  return f;
}

inline Eigen::Vector3d fault_value(double t, const FaultModel& model) {
  if (t < 0.0) throw std::domain_error("fault_value: negative time");
  return fault_value(t, model,
                     {model.const_window.contains(t), model.periodic_window.contains(t)});
}

/// Fault as it enters the actuator (E f, N/s) and the jerk channel (C f = E f / m, m/s^3).
struct EffectiveFault {
  double force_rate = 0.0;
  double jerk = 0.0;
};

inline EffectiveFault effective_fault(const Eigen::Vector3d& f, const FaultModel& model,
                                      double mass) {
  if (!(mass > 0.0)) throw std::invalid_argument("effective_fault: mass must be > 0");
  const double ef = fault_input_row(model).dot(f);
  return {ef, ef / mass};
}

inline EffectiveFault effective_fault(double t, const FaultModel& model, double mass) {
  return effective_fault(fault_value(t, model), model, mass);
}

}  // namespace cruise
