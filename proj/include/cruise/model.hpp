#pragma once

/// Multi-carriage train dynamics: the physical plant (position, velocity,
/// traction force) and the equivalent third-order composite model
/// (position, velocity, acceleration) driven by the new input u.
///
/// Carriage indices are zero-based: j = 0 is the head carriage, j = M-1 the
/// tail. Every train must have at least two carriages.

#include "cruise/faults.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cruise {

struct DavisCoefficients {
  double c0 = 0.0;  // N/kg
  double c1 = 0.0;  // N s/(m kg)
  double c2 = 0.0;  // N s^2/(m^2 kg)

  bool operator==(const DavisCoefficients&) const = default;
};

struct CouplerParams {
  double stiffness = 0.0;  // a, N/m
  double damping = 0.0;    // b, N s/m
  double spacing = 0.0;    // d_p, m (includes carriage length)

  bool operator==(const CouplerParams&) const = default;
};

/// Parameters shared by every carriage on the line.
struct LineParams {
  DavisCoefficients davis;
  CouplerParams coupler;

  bool operator==(const LineParams&) const = default;
};

struct CarriageParams {
  double mass = 0.0;           // kg
  double actuator_rate = 0.0;  // r, 1/s
  FaultModel fault;

  Eigen::RowVector3d fault_input() const { return fault_input_row(fault); }
  /// C = E / m.
  Eigen::RowVector3d fault_jerk_row() const { return fault_input() / mass; }

  bool operator==(const CarriageParams&) const = default;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ConsistTopology {
  std::vector<std::size_t> carriages_per_train;

  std::size_t train_count() const { return carriages_per_train.size(); }
  std::size_t carriage_count(std::size_t train) const { return carriages_per_train.at(train); }
  std::size_t total() const {
    return std::accumulate(carriages_per_train.begin(), carriages_per_train.end(), std::size_t{0});
  }
  /// Flat index of the head carriage of `train`.
  std::size_t offset(std::size_t train) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < train; ++i) off += carriages_per_train.at(i);
    return off;
  }
  std::size_t index(std::size_t train, std::size_t carriage) const {
    if (carriage >= carriage_count(train)) throw std::out_of_range("carriage index out of range");
    return offset(train) + carriage;
  }

  void validate() const {
    if (carriages_per_train.empty()) throw ConfigError("topology: at least one train required");
    for (std::size_t i = 0; i < carriages_per_train.size(); ++i)
      if (carriages_per_train[i] < 2)
        throw ConfigError("topology: train " + std::to_string(i + 1) +
                          " needs at least 2 carriages");
  }

  bool operator==(const ConsistTopology&) const = default;
};

/// Physical state of one carriage.
struct PlantState {
  double x = 0.0;    // m
  double v = 0.0;    // m/s
  double tau = 0.0;  // N
  Eigen::Vector3d f = Eigen::Vector3d::Zero();
};

/// Composite (third-order) state of one carriage.
struct CompositeState {
  double x = 0.0;  // m
  double v = 0.0;  // m/s
  double w = 0.0;  // m/s^2
  Eigen::Vector3d f = Eigen::Vector3d::Zero();
};

enum class Slot { head, interior, tail };

inline Slot slot_of(std::size_t j, std::size_t count) {
  if (count < 2) throw std::invalid_argument("a train needs at least 2 carriages");
  if (j >= count) throw std::out_of_range("carriage index out of range");
  if (j == 0) return Slot::head;
  if (j + 1 == count) return Slot::tail;
  return Slot::interior;
}

inline double davis_resistance(double v, const DavisCoefficients& c) {
  return c.c0 + c.c1 * v + c.c2 * v * v;
}

/// Coupler force B_ij acting against the motion of carriage j.
inline double coupling_force(std::size_t j, std::span<const double> x, std::span<const double> v,
                             const CouplerParams& coupler) {
  if (x.size() != v.size()) throw std::invalid_argument("position/velocity size mismatch");
  const double a = coupler.stiffness;
  const double b = coupler.damping;
  const std::size_t last = x.size() - 1;
  switch (slot_of(j, x.size())) {
    case Slot::head:
      return a * (x[0] - x[1] - coupler.spacing) + b * (v[0] - v[1]);
    case Slot::tail:
      return a * (x[last] - x[last - 1] + coupler.spacing) + b * (v[last] - v[last - 1]);
    case Slot::interior:
      break;
  }
  return a * (2.0 * x[j] - x[j - 1] - x[j + 1]) + b * (2.0 * v[j] - v[j - 1] - v[j + 1]);
}

/// Coefficients of the acceleration dynamics
///   w' = B1 w_j + B2 w_{j-1} + B3 w_{j+1} + ... + B4.
struct BCoefficients {
  double b1 = 0.0;
  double b2 = 0.0;
  double b3 = 0.0;
  double b4 = 0.0;
};

inline double coefficient_b1(Slot slot, double v, const CarriageParams& p, const LineParams& line) {
  const double coupling = (slot == Slot::interior ? 2.0 : 1.0) * line.coupler.damping / p.mass;
  return -coupling - (line.davis.c1 + 2.0 * line.davis.c2 * v) - p.actuator_rate;
}

inline double coefficient_b2(Slot slot, const CarriageParams& p, const LineParams& line) {
  return slot == Slot::head ? 0.0 : line.coupler.damping / p.mass;
}

inline double coefficient_b3(Slot slot, const CarriageParams& p, const LineParams& line) {
  return slot == Slot::tail ? 0.0 : line.coupler.damping / p.mass;
}

inline double coefficient_b4(std::size_t j, std::span<const double> v, const CarriageParams& p,
                             const LineParams& line) {
  const double a = line.coupler.stiffness;
  const std::size_t last = v.size() - 1;
  switch (slot_of(j, v.size())) {
    case Slot::head:
      return -a * (v[0] - v[1]) / p.mass;
    case Slot::tail:
      return -a * (v[last] - v[last - 1]) / p.mass;
    case Slot::interior:
      break;
  }
  return -a * (2.0 * v[j] - v[j - 1] - v[j + 1]) / p.mass;
}

inline BCoefficients coefficient_b(std::size_t j, std::span<const double> v,
                                   const CarriageParams& p, const LineParams& line) {
  const Slot slot = slot_of(j, v.size());
  return {coefficient_b1(slot, v[j], p, line), coefficient_b2(slot, p, line),
          coefficient_b3(slot, p, line), coefficient_b4(j, v, p, line)};
}

/// D-functions used by the observer's velocity injection, each evaluated at `v`.
struct DCoefficients {
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

inline DCoefficients coefficient_d(std::size_t j, std::size_t count, double v,
                                   const CarriageParams& p, const LineParams& line) {
  const Slot slot = slot_of(j, count);
  const double b_over_m = line.coupler.damping / p.mass;
  const double coupling = (slot == Slot::interior ? 2.0 : 1.0) * b_over_m;
  DCoefficients d;
  d.d1 = -coupling * v - (line.davis.c1 * v + line.davis.c2 * v * v);
  d.d2 = slot == Slot::head ? 0.0 : b_over_m * v;
  d.d3 = slot == Slot::tail ? 0.0 : b_over_m * v;
  return d;
}

/// Acceleration implied by the force balance, v' = (tau - B - m R(v)) / m.
inline double acceleration_from_force(std::size_t j, std::span<const double> x,
                                      std::span<const double> v, double tau,
                                      const CarriageParams& p, const LineParams& line) {
  return (tau - coupling_force(j, x, v, line.coupler) - p.mass * davis_resistance(v[j], line.davis)) /
         p.mass;
}

/// Inverse of acceleration_from_force: tau = m w + B + m R(v).
inline double force_from_acceleration(std::size_t j, std::span<const double> x,
                                      std::span<const double> v, double w,
                                      const CarriageParams& p, const LineParams& line) {
  return p.mass * w + coupling_force(j, x, v, line.coupler) +
         p.mass * davis_resistance(v[j], line.davis);
}

/// Desired force rate that turns the plant into the composite model with input u.
inline double preliminary_control(double u, std::size_t j, std::span<const double> x,
                                  std::span<const double> v, const CarriageParams& p,
                                  const LineParams& line) {
  const double r = p.actuator_rate;
  return p.mass * u + r * coupling_force(j, x, v, line.coupler) +
         p.mass * r * davis_resistance(v[j], line.davis) - p.mass * coefficient_b4(j, v, p, line);
}

/// Time derivative of the physical state of carriage j. `x`, `v` are the
/// train-wide measurement vectors; `self.x`, `self.v` must equal x[j], v[j].
inline PlantState plant_rhs(std::size_t j, std::span<const double> x, std::span<const double> v,
                            const PlantState& self, double varpi, const CarriageParams& p,
                            const LineParams& line) {
  PlantState d;
  d.x = self.v;
  d.v = acceleration_from_force(j, x, v, self.tau, p, line);
  d.tau = -p.actuator_rate * self.tau + varpi + p.fault_input().dot(self.f);
  d.f = exosystem_matrix(p.fault.omega) * self.f;
  return d;
}

/// Time derivative of the composite state of carriage j. `w` holds the
/// accelerations of the whole train; boundary neighbours are not read.
inline CompositeState composite_rhs(std::size_t j, std::span<const double> w,
                                    const CompositeState& self, double u,
                                    const CarriageParams& p, const LineParams& line) {
  const Slot slot = slot_of(j, w.size());
  double jerk = coefficient_b1(slot, self.v, p, line) * self.w + p.fault_jerk_row().dot(self.f) + u;
  if (slot != Slot::head) jerk += coefficient_b2(slot, p, line) * w[j - 1];
  if (slot != Slot::tail) jerk += coefficient_b3(slot, p, line) * w[j + 1];
  CompositeState d;
  d.x = self.v;
  d.v = self.w;
  d.w = jerk;
  d.f = exosystem_matrix(p.fault.omega) * self.f;
  return d;
}

/// Full description of N trains on one line.
struct Consist {
  ConsistTopology topology;
  LineParams line;
  std::vector<CarriageParams> carriages;  // flattened, train-major

  const CarriageParams& carriage(std::size_t train, std::size_t j) const {
    return carriages.at(topology.index(train, j));
  }

  void validate() const {
    topology.validate();
    if (carriages.size() != topology.total())
      throw ConfigError("consist: carriage parameter count does not match topology");
    const auto& d = line.davis;
    if (d.c0 < 0.0 || d.c1 < 0.0 || d.c2 < 0.0)
      throw ConfigError("consist: Davis coefficients must be >= 0");
    const auto& c = line.coupler;
    if (!(c.stiffness > 0.0) || !(c.damping > 0.0) || !(c.spacing > 0.0))
      throw ConfigError("consist: coupler stiffness, damping and spacing must be > 0");
    for (const auto& p : carriages) {
      if (!(p.mass > 0.0)) throw ConfigError("consist: carriage mass must be > 0");
      if (!(p.actuator_rate > 0.0)) throw ConfigError("consist: actuator rate must be > 0");
      try {
        p.fault.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("consist: ") + e.what());
      }
    }
  }

  bool operator==(const Consist&) const = default;
};

}  // namespace cruise
