#pragma once

/// Distributed state-fault observer for one carriage, its gain synthesis,
/// and the linear error dynamics the observer is designed to produce.
///
/// Gain synthesis is templated on the scalar type so the same code runs in
/// double for simulation and in extended precision for verification: a
/// five-fold eigenvalue is perturbed by about eps^(1/5), i.e. ~1e-3 in double.

#include "cruise/faults.hpp"
#include "cruise/model.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cruise {

struct ObserverState {
  double x = 0.0;
  double v = 0.0;
  double w = 0.0;
  Eigen::Vector3d f = Eigen::Vector3d::Zero();

  bool operator==(const ObserverState& o) const {
    return x == o.x && v == o.v && w == o.w && f == o.f;
  }
};

using Vector5d = Eigen::Matrix<double, 5, 1>;

/// k1 drives the position error; K = [k2, k3, k4^T]^T places eig(A + K C).
struct ObserverGains {
  double k1 = 0.0;
  Vector5d K = Vector5d::Zero();
};

struct AuxiliaryInputs {
  double mu1 = 0.0;
  double mu2 = 0.0;
  double mu3 = 0.0;
  Eigen::Vector3d mu4 = Eigen::Vector3d::Zero();
};

class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Gain synthesis

template <class S>
struct AugmentedPair {
  Eigen::Matrix<S, 5, 5> A;
  Eigen::Matrix<S, 1, 5> C;
};

/// A = [0 1 0; 0 0 c_row; 0 0 S], C = [1 0 0].
template <class S>
AugmentedPair<S> build_augmented_pair(const Eigen::Matrix<S, 1, 3>& c_row,
                                      const Eigen::Matrix<S, 3, 3>& exo) {
  AugmentedPair<S> pair;
  pair.A.setZero();
  pair.A(0, 1) = S(1);
  pair.A.template block<1, 3>(1, 2) = c_row;
  pair.A.template block<3, 3>(2, 2) = exo;
  pair.C.setZero();
  pair.C(0, 0) = S(1);
  return pair;
}

inline AugmentedPair<double> build_augmented_pair(const CarriageParams& p) {
  return build_augmented_pair<double>(p.fault_jerk_row(), exosystem_matrix(p.fault.omega));
}

template <class S>
Eigen::Matrix<S, 5, 5> observability_matrix(const AugmentedPair<S>& pair) {
  Eigen::Matrix<S, 5, 5> o;
  Eigen::Matrix<S, 1, 5> row = pair.C;
  for (int k = 0; k < 5; ++k) {
    o.row(k) = row;
    row = row * pair.A;
  }
  return o;
}

/// Full numerical rank: smallest singular value > 1e-8 x largest.
template <class S>
bool check_observability(const AugmentedPair<S>& pair, double rel_threshold = 1e-8) {
  const Eigen::Matrix<S, 5, 5> o = observability_matrix(pair);
  Eigen::JacobiSVD<Eigen::Matrix<S, 5, 5>> svd(o);
  const auto& sv = svd.singularValues();
  const S largest = sv(0);
  if (largest == S(0)) return false;
  return sv(4) > S(rel_threshold) * largest;
}

/// Monic characteristic polynomial det(lambda I - M), coefficients in
/// descending powers: {1, a1, ..., an}. Faddeev-LeVerrier recursion.
template <class S, int N>
std::vector<S> characteristic_polynomial(const Eigen::Matrix<S, N, N>& m) {
  const auto n = m.rows();
  std::vector<S> a(static_cast<std::size_t>(n) + 1, S(0));
  a[0] = S(1);
  Eigen::Matrix<S, N, N> aux = Eigen::Matrix<S, N, N>::Identity(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    const Eigen::Matrix<S, N, N> prod = m * aux;
    a[static_cast<std::size_t>(k)] = -prod.trace() / S(static_cast<int>(k));
    aux = prod;
    aux.diagonal().array() += a[static_cast<std::size_t>(k)];
  }
  return a;
}

/// Monic polynomial with the given roots (descending powers). Complex roots
/// must come in conjugate pairs.
template <class S>
std::vector<S> polynomial_from_roots(std::span<const std::complex<double>> roots) {
  std::vector<S> poly{S(1)};
  auto multiply = [&poly](const std::vector<S>& factor) {
    std::vector<S> out(poly.size() + factor.size() - 1, S(0));
    for (std::size_t i = 0; i < poly.size(); ++i)
      for (std::size_t k = 0; k < factor.size(); ++k) out[i + k] += poly[i] * factor[k];
    poly = std::move(out);
  };
  std::vector<bool> used(roots.size(), false);
  for (std::size_t i = 0; i < roots.size(); ++i) {
    if (used[i]) continue;
    used[i] = true;
    const auto r = roots[i];
    if (r.imag() == 0.0) {
      multiply({S(1), S(-r.real())});
      continue;
    }
    std::size_t mate = roots.size();
    for (std::size_t k = i + 1; k < roots.size(); ++k)
      if (!used[k] && roots[k] == std::conj(r)) {
        mate = k;
        break;
      }
    if (mate == roots.size())
      throw std::invalid_argument("complex eigenvalues must come in conjugate pairs");
    used[mate] = true;
    const S re(r.real());
    const S im(r.imag());
    multiply({S(1), S(-2) * re, re * re + im * im});
  }
  return poly;
}

/// Output injection K with det(lambda I - (A + K C)) equal to `target`
/// (monic, descending). The characteristic polynomial is affine in K for a
/// single output row, so the coefficients are matched by one linear solve.
template <class S>
Eigen::Matrix<S, 5, 1> place_output_injection(const AugmentedPair<S>& pair,
                                              const std::vector<S>& target) {
  if (target.size() != 6) throw std::invalid_argument("target polynomial must have degree 5");
  using Mat5 = Eigen::Matrix<S, 5, 5>;
  const std::vector<S> base = characteristic_polynomial<S, 5>(pair.A);
  Mat5 jac;
  Eigen::Matrix<S, 5, 1> rhs;
  for (int i = 0; i < 5; ++i) {
    Mat5 probe = pair.A;
    probe.col(0) += Mat5::Identity().col(i);  // C selects the first state
    const std::vector<S> p = characteristic_polynomial<S, 5>(probe);
    for (int k = 0; k < 5; ++k) jac(k, i) = p[k + 1] - base[k + 1];
    rhs(i) = target[i + 1] - base[i + 1];
  }
  Eigen::FullPivLU<Mat5> lu(jac);
  lu.setThreshold(S(1e-12));
  if (!lu.isInvertible())
    throw PlacementError("pole placement: coefficient map is singular (pair not observable)");
  return lu.solve(rhs);
}

/// Observer gains: eig(A + K C) = `desired` and k1 = -k1_eigenvalue.
inline ObserverGains synthesize_gains(const AugmentedPair<double>& pair,
                                      std::span<const std::complex<double>> desired,
                                      double k1_eigenvalue = -3.0) {
  if (desired.size() != 5) throw std::invalid_argument("need exactly 5 desired eigenvalues");
  for (const auto& e : desired)
    if (!(e.real() < 0.0)) throw std::invalid_argument("desired eigenvalues must be stable");
  if (!(k1_eigenvalue < 0.0)) throw std::invalid_argument("k1 eigenvalue must be negative");
  if (!check_observability(pair)) throw PlacementError("pair (A, C) is not observable");
  const std::vector<double> target = polynomial_from_roots<double>(desired);
  ObserverGains gains;
  gains.k1 = -k1_eigenvalue;
  gains.K = place_output_injection(pair, target);

  const Eigen::Matrix<double, 5, 5> closed = pair.A + gains.K * pair.C;
  const std::vector<double> achieved = characteristic_polynomial<double, 5>(closed);
  for (std::size_t k = 1; k < achieved.size(); ++k)
    if (std::abs(achieved[k] - target[k]) > 1e-8 * std::max(1.0, std::abs(target[k])))
      throw PlacementError("pole placement: ill-conditioned, coefficient " + std::to_string(k) +
                           " off by " + std::to_string(achieved[k] - target[k]));
  return gains;
}

inline ObserverGains synthesize_gains(const CarriageParams& p,
                                      std::span<const std::complex<double>> desired,
                                      double k1_eigenvalue = -3.0) {
  return synthesize_gains(build_augmented_pair(p), desired, k1_eigenvalue);
}

// ---------------------------------------------------------------------------
// Observer equations

/// Measurements and estimates around carriage j. Neighbour fields are read
/// only where the neighbour exists.
struct ObserverSite {
  std::size_t j = 0;
  std::size_t count = 2;
  double x = 0.0;  // measured
  double v = 0.0;  // measured
  ObserverState est;
  double v_prev = 0.0;
  double v_hat_prev = 0.0;
  double v_next = 0.0;
  double v_hat_next = 0.0;
};

/// The actuator pole r enters the velocity-error channel through D1 (whose
/// slope is B1 + r). Offsetting k2 by r keeps the error dynamics at A + K C.
inline double effective_velocity_gain(const ObserverGains& g, const CarriageParams& p) {
  return g.K(0) + p.actuator_rate;
}

/// mu2. Computed for every carriage before any mu3.
inline double velocity_injection(const ObserverSite& s, const ObserverGains& g,
                                 const CarriageParams& p, const LineParams& line) {
  const Slot slot = slot_of(s.j, s.count);
  double mu2 = coefficient_d(s.j, s.count, s.v, p, line).d1 -
               coefficient_d(s.j, s.count, s.est.v, p, line).d1 +
               effective_velocity_gain(g, p) * (s.est.v - s.v);
  if (slot != Slot::head)
    mu2 += coefficient_d(s.j, s.count, s.v_prev, p, line).d2 -
           coefficient_d(s.j, s.count, s.v_hat_prev, p, line).d2;
  if (slot != Slot::tail)
    mu2 += coefficient_d(s.j, s.count, s.v_next, p, line).d3 -
           coefficient_d(s.j, s.count, s.v_hat_next, p, line).d3;
  return mu2;
}

/// All four auxiliary inputs; `mu2_prev`, `mu2_next` are the neighbours'
/// velocity injections (ignored at the train ends).
inline AuxiliaryInputs auxiliary_inputs(const ObserverSite& s, double mu2_prev, double mu2_next,
                                        const ObserverGains& g, const CarriageParams& p,
                                        const LineParams& line) {
  const Slot slot = slot_of(s.j, s.count);
  const double ev = s.est.v - s.v;
  AuxiliaryInputs aux;
  aux.mu1 = -g.k1 * (s.est.x - s.x) - ev;
  aux.mu2 = velocity_injection(s, g, p, line);
  const double b1 = coefficient_b1(slot, s.v, p, line);
  const double b1_hat = coefficient_b1(slot, s.est.v, p, line);
  aux.mu3 = b1 * aux.mu2 + g.K(1) * ev + (b1_hat - b1) * (s.est.w + aux.mu2);
  if (slot != Slot::head) aux.mu3 += coefficient_b2(slot, p, line) * mu2_prev;
  if (slot != Slot::tail) aux.mu3 += coefficient_b3(slot, p, line) * mu2_next;
  aux.mu4 = g.K.tail<3>() * ev;
  return aux;
}

/// Rate of the acceleration estimate (third observer equation).
inline double estimated_jerk(const ObserverSite& s, const AuxiliaryInputs& aux, double u,
                             double w_hat_prev, double w_hat_next, const CarriageParams& p,
                             const LineParams& line) {
  const Slot slot = slot_of(s.j, s.count);
  double jerk = coefficient_b1(slot, s.v, p, line) * s.est.w + p.fault_jerk_row().dot(s.est.f) +
                u + aux.mu3;
  if (slot != Slot::head) jerk += coefficient_b2(slot, p, line) * w_hat_prev;
  if (slot != Slot::tail) jerk += coefficient_b3(slot, p, line) * w_hat_next;
  return jerk;
}

inline ObserverState observer_rhs(const ObserverSite& s, const AuxiliaryInputs& aux, double u,
                                  double w_hat_prev, double w_hat_next, const CarriageParams& p,
                                  const LineParams& line) {
  ObserverState d;
  d.x = s.est.v + aux.mu1;
  d.v = s.est.w + aux.mu2;
  d.w = estimated_jerk(s, aux, u, w_hat_prev, w_hat_next, p, line);
  d.f = exosystem_matrix(p.fault.omega) * s.est.f + aux.mu4;
  return d;
}

// ---------------------------------------------------------------------------
// Linear error dynamics

inline Eigen::Matrix<double, 5, 5> error_matrix(const AugmentedPair<double>& pair,
                                                const ObserverGains& g) {
  return pair.A + g.K * pair.C;
}

/// Block-diagonal diag(-k1, A + K C) governing (e_x, xi).
inline Eigen::Matrix<double, 6, 6> full_error_matrix(const AugmentedPair<double>& pair,
                                                     const ObserverGains& g) {
  Eigen::Matrix<double, 6, 6> d = Eigen::Matrix<double, 6, 6>::Zero();
  d(0, 0) = -g.k1;
  d.block<5, 5>(1, 1) = error_matrix(pair, g);
  return d;
}

/// xi = [e_v, zeta, e_f] with zeta = e_w + mu2 - k2 e_v.
inline Vector5d assemble_xi(double e_v, double e_w, double mu2, const ObserverGains& g,
                            const Eigen::Vector3d& e_f) {
  Vector5d xi;
  xi << e_v, e_w + mu2 - g.K(0) * e_v, e_f;
  return xi;
}

struct LinearErrorSample {
  double t = 0.0;
  double e_x = 0.0;
  Vector5d xi = Vector5d::Zero();

  double e_v() const { return xi(0); }
  Eigen::Vector3d e_f() const { return xi.tail<3>(); }
};

/// Exact solution of e_x' = -k1 e_x, xi' = (A + K C) xi at the requested
/// times, via the matrix exponential.
inline std::vector<LinearErrorSample> linear_error_oracle(double e_x0, const Vector5d& xi0,
                                                          const ObserverGains& g,
                                                          const AugmentedPair<double>& pair,
                                                          std::span<const double> times) {
  const Eigen::Matrix<double, 5, 5> m = error_matrix(pair, g);
  std::vector<LinearErrorSample> out;
  out.reserve(times.size());
  for (double t : times) {
    const Eigen::Matrix<double, 5, 5> phi = (m * t).exp();
    out.push_back({t, e_x0 * std::exp(-g.k1 * t), phi * xi0});
  }
  return out;
}

}  // namespace cruise
