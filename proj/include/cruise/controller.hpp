#pragma once

/// Distributed fault-tolerant control: backstepping for follower carriages
/// and a barrier-transformed law for head carriages, plus feasibility checks
/// on gains and initial conditions.

#include "cruise/dual.hpp"
#include "cruise/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cruise {

struct FollowerGains {
  double l1 = 0.0;
  double l2 = 0.0;
  double l3 = 0.0;

  bool operator==(const FollowerGains&) const = default;
};

struct HeadGains {
  double ell1 = 0.0;
  double ell2 = 0.0;
  double ell3 = 0.0;
  double ell4 = 0.0;

  bool operator==(const HeadGains&) const = default;
};

/// Inter-train distance and velocity-difference limits.
struct ConstraintSpec {
  double gamma1 = 0.0;            // max communication radius, m
  double gamma2 = 0.0;            // emergency braking distance, m
  double service_distance = 0.0;  // d_s, m
  double sigma1 = 0.0;            // m/s
  double sigma2 = 0.0;            // m/s

  double rho1() const { return gamma1 - service_distance; }
  double rho2() const { return service_distance - gamma2; }

  bool operator==(const ConstraintSpec&) const = default;
};

/// Open intervals (-rho2, rho1) for x~ and (-varrho2, varrho1) for q~.
struct BarrierBounds {
  double rho1 = 0.0;
  double rho2 = 0.0;
  double varrho1 = 0.0;
  double varrho2 = 0.0;
};

inline BarrierBounds derive_bounds(const ConstraintSpec& c, double ell1) {
  return {c.rho1(), c.rho2(), -ell1 * c.rho2() + c.sigma1, -ell1 * c.rho1() + c.sigma2};
}

/// Errors between train i and the tail of the train in front (or the
/// reference for the first train).
struct TrainPairErrors {
  double epsilon = 0.0;  // inter-train distance
  double x_tilde = 0.0;  // epsilon - d_s
  double v_tilde = 0.0;
  double q_tilde = 0.0;  // v~ + ell1 x~
};

inline TrainPairErrors pair_errors(double front_x, double front_v, double x, double v,
                                   double service_distance, double ell1) {
  TrainPairErrors e;
  e.epsilon = front_x - x;
  e.x_tilde = e.epsilon - service_distance;
  e.v_tilde = front_v - v;
  e.q_tilde = e.v_tilde + ell1 * e.x_tilde;
  return e;
}

// ---------------------------------------------------------------------------
// Follower carriages

/// Arguments of alpha2, in order: x^_j, x^_{j-1}, v^_j, v^_{j-1}, w^_{j-1}.
template <class T>
using FollowerArgs = std::array<T, 5>;

enum FollowerArg : std::size_t { kXHat = 0, kXHatPrev, kVHat, kVHatPrev, kWHatPrev };

template <class T>
T spacing_error(const T& x_hat, const T& x_hat_prev, double d_p) {
  return x_hat - x_hat_prev + d_p;
}

template <class T>
T alpha1(const T& x_hat, const T& x_hat_prev, const T& v_hat_prev, double l1, double d_p) {
  return v_hat_prev - (l1 + 1.0) * spacing_error(x_hat, x_hat_prev, d_p);
}

/// Partials of alpha1 w.r.t. (x^_j, x^_{j-1}, v^_{j-1}), by forward sweeps.
template <class T>
std::array<T, 3> alpha1_partials(const T& x_hat, const T& x_hat_prev, const T& v_hat_prev,
                                 double l1, double d_p) {
  using D = Dual<T>;
  const T one(1.0);
  const T zero(0.0);
  return {alpha1(D(x_hat, one), D(x_hat_prev, zero), D(v_hat_prev, zero), l1, d_p).deriv,
          alpha1(D(x_hat, zero), D(x_hat_prev, one), D(v_hat_prev, zero), l1, d_p).deriv,
          alpha1(D(x_hat, zero), D(x_hat_prev, zero), D(v_hat_prev, one), l1, d_p).deriv};
}

template <class T>
T alpha2(const FollowerArgs<T>& a, const FollowerGains& g, double d_p) {
  const T z1 = spacing_error(a[kXHat], a[kXHatPrev], d_p);
  const T z2 = a[kVHat] - alpha1(a[kXHat], a[kXHatPrev], a[kVHatPrev], g.l1, d_p);
  const auto [dx, dxp, dvp] = alpha1_partials(a[kXHat], a[kXHatPrev], a[kVHatPrev], g.l1, d_p);
  return -g.l2 * z2 - z1 - 0.5 * z2                      //
         + dx * a[kVHat] - 0.5 * (dx * dx) * z2          //
         + dxp * a[kVHatPrev] - 0.5 * (dxp * dxp) * z2   //
         + dvp * a[kWHatPrev] - 0.5 * (dvp * dvp) * z2;
}

/// Gradient of alpha2 over its five arguments.
inline std::array<double, 5> alpha2_gradient(const FollowerArgs<double>& a, const FollowerGains& g,
                                             double d_p) {
  std::array<double, 5> grad{};
  for (std::size_t k = 0; k < 5; ++k) {
    FollowerArgs<Dual<double>> seeded;
    for (std::size_t i = 0; i < 5; ++i) seeded[i] = Dual<double>(a[i], i == k ? 1.0 : 0.0);
    grad[k] = alpha2(seeded, g, d_p).deriv;
  }
  return grad;
}

struct BacksteppingErrors {
  double z1 = 0.0;
  double z2 = 0.0;
  double z3 = 0.0;
};

inline BacksteppingErrors z_errors(const FollowerArgs<double>& a, double w_hat,
                                   const FollowerGains& g, double d_p) {
  BacksteppingErrors z;
  z.z1 = spacing_error(a[kXHat], a[kXHatPrev], d_p);
  z.z2 = a[kVHat] - alpha1(a[kXHat], a[kXHatPrev], a[kVHatPrev], g.l1, d_p);
  z.z3 = w_hat - alpha2(a, g, d_p);
  return z;
}

/// `rates` are the observer's time derivatives of the five alpha2 arguments.
inline double alpha3(const FollowerArgs<double>& a, double w_hat, const FollowerArgs<double>& rates,
                     const FollowerGains& g, double d_p) {
  const BacksteppingErrors z = z_errors(a, w_hat, g, d_p);
  const auto grad = alpha2_gradient(a, g, d_p);
  double feedforward = 0.0;
  for (std::size_t k = 0; k < 5; ++k) feedforward += grad[k] * rates[k];
  return -g.l3 * z.z3 - z.z2 + feedforward;
}

/// Everything carriage j (j >= 1) needs to compute its control.
struct FollowerInputs {
  FollowerArgs<double> args{};   // x^_j, x^_{j-1}, v^_j, v^_{j-1}, w^_{j-1}
  FollowerArgs<double> rates{};  // their observer derivatives
  double w_hat = 0.0;
  double w_hat_next = 0.0;  // unused for the tail carriage (b3 = 0)
  double b1 = 0.0;          // B1 at the measured velocity
  double b2 = 0.0;
  double b3 = 0.0;
  double fault_jerk_hat = 0.0;  // C f^
  double mu3 = 0.0;
};

struct FollowerControl {
  double u = 0.0;
  double alpha3 = 0.0;
  BacksteppingErrors z;
};

inline FollowerControl follower_control(const FollowerInputs& in, const FollowerGains& g,
                                        double d_p) {
  FollowerControl out;
  out.z = z_errors(in.args, in.w_hat, g, d_p);
  out.alpha3 = alpha3(in.args, in.w_hat, in.rates, g, d_p);
  const double known = in.b1 * in.w_hat + in.b2 * in.args[kWHatPrev] + in.b3 * in.w_hat_next +
                       in.fault_jerk_hat + in.mu3;
  out.u = -known + out.alpha3;
  return out;
}

// ---------------------------------------------------------------------------
// Head carriages

class BarrierDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// ln((upper*lower + upper*e) / (upper*lower - lower*e)) on (-lower, upper).
template <class T>
T barrier_log(const T& e, double upper, double lower) {
  using std::log;
  const double e0 = primal(e);
  if (!(e0 > -lower && e0 < upper))
    throw BarrierDomainError("barrier argument " + std::to_string(e0) + " outside (" +
                             std::to_string(-lower) + ", " + std::to_string(upper) + ")");
  return log((upper * lower + upper * e) / (upper * lower - lower * e));
}

/// d/de of barrier_log, in the cancellation-free form 1/(lower+e) + 1/(upper-e).
template <class T>
T barrier_slope(const T& e, double upper, double lower) {
  return 1.0 / (lower + e) + 1.0 / (upper - e);
}

struct BarrierValue {
  double value = 0.0;  // phi or psi
  double slope = 0.0;  // Phi or Psi
};

inline BarrierValue barrier_phi(double x_tilde, double rho1, double rho2) {
  return {barrier_log(x_tilde, rho1, rho2), barrier_slope(x_tilde, rho1, rho2)};
}

inline BarrierValue barrier_psi(double q_tilde, double varrho1, double varrho2) {
  return {barrier_log(q_tilde, varrho1, varrho2), barrier_slope(q_tilde, varrho1, varrho2)};
}

template <class T>
T beta1(const T& x_tilde, const T& v_tilde, const HeadGains& g, const BarrierBounds& b) {
  const T q = v_tilde + g.ell1 * x_tilde;
  return -barrier_log(x_tilde, b.rho1, b.rho2) * barrier_slope(x_tilde, b.rho1, b.rho2) -
         g.ell2 * q -
         g.ell3 * barrier_log(q, b.varrho1, b.varrho2) * barrier_slope(q, b.varrho1, b.varrho2);
}

struct BetaValues {
  double beta1 = 0.0;
  double beta2 = 0.0;
  double dbeta1_dx = 0.0;  // d beta1 / d x~
  double dbeta1_dv = 0.0;  // d beta1 / d v~
};

inline BetaValues beta_functions(double x_tilde, double v_tilde, double w_hat_tilde,
                                 const HeadGains& g, const BarrierBounds& b) {
  using D = Dual<double>;
  const D along_x = beta1(D(x_tilde, 1.0), D(v_tilde, 0.0), g, b);
  const D along_v = beta1(D(x_tilde, 0.0), D(v_tilde, 1.0), g, b);
  BetaValues out;
  out.beta1 = along_x.value;
  out.dbeta1_dx = along_x.deriv;
  out.dbeta1_dv = along_v.deriv;
  out.beta2 = w_hat_tilde + g.ell1 * v_tilde - out.beta1;
  return out;
}

/// What the head carriage of train i receives from the train ahead: tail
/// position/velocity, tail acceleration estimate and its rate g_{i-1}. For
/// the first train these are the reference x0, v0, w0, u0.
struct FrontSignals {
  double x = 0.0;
  double v = 0.0;
  double w_hat = 0.0;
  double rate = 0.0;
};

struct HeadInputs {
  FrontSignals front;
  double x = 0.0;
  double v = 0.0;
  double w_hat = 0.0;
  double w_hat_next = 0.0;
  double b1 = 0.0;
  double b3 = 0.0;
  double fault_jerk_hat = 0.0;
  double mu3 = 0.0;
};

struct HeadControl {
  double u = 0.0;
  TrainPairErrors errors;
  BetaValues beta;
  bool x_saturated = false;  // x~ left (-rho2, rho1); barrier evaluated at the edge
  bool q_saturated = false;
};

/// Margin used when a barrier argument is pushed back inside its interval.
inline constexpr double kBarrierMargin = 1e-9;

/// Head-carriage control law. Out-of-domain barrier arguments are saturated
/// to the boundary (flagged) so the law stays defined.
inline HeadControl head_control(const HeadInputs& in, const HeadGains& g, const BarrierBounds& b,
                                double service_distance) {
  HeadControl out;
  out.errors = pair_errors(in.front.x, in.front.v, in.x, in.v, service_distance, g.ell1);
  const TrainPairErrors& e = out.errors;
  const double w_hat_tilde = in.front.w_hat - in.w_hat;

  double xs = e.x_tilde;
  if (!(xs > -b.rho2 && xs < b.rho1)) {
    out.x_saturated = true;
    xs = std::clamp(xs, -b.rho2 + kBarrierMargin, b.rho1 - kBarrierMargin);
  }
  double vs = e.v_tilde;
  const double qs = vs + g.ell1 * xs;
  if (!(qs > -b.varrho2 && qs < b.varrho1)) {
    out.q_saturated = true;
    vs = std::clamp(qs, -b.varrho2 + kBarrierMargin, b.varrho1 - kBarrierMargin) - g.ell1 * xs;
  }
  out.beta = beta_functions(xs, vs, w_hat_tilde, g, b);
  const BetaValues& beta = out.beta;

  const double known = in.b1 * in.w_hat + in.b3 * in.w_hat_next + in.fault_jerk_hat + in.mu3;
  // The ell4 term enters with a positive sign: it is the damping that makes
  // beta2' contain -ell4 beta2.
  out.u = in.front.rate - known + g.ell1 * w_hat_tilde + g.ell1 * g.ell1 * beta.beta2 -
          beta.dbeta1_dx * e.v_tilde - beta.dbeta1_dv * w_hat_tilde +
          beta.dbeta1_dv * beta.dbeta1_dv * beta.beta2 + e.q_tilde + g.ell4 * beta.beta2;
  return out;
}

/// Rate of the tail acceleration estimate of the train ahead:
/// g = B1 w^ + B2 w^_prev + C f^ + u + mu3 (the tail has no rear neighbour).
inline double tail_rate(double b1, double w_hat, double b2, double w_hat_prev,
                        double fault_jerk_hat, double u, double mu3) {
  return b1 * w_hat + b2 * w_hat_prev + fault_jerk_hat + u + mu3;
}

// ---------------------------------------------------------------------------
// Dual evaluation of the registered virtual-control forms

enum class DualForm { alpha1, alpha2, beta1 };

struct DualFormParams {
  FollowerGains follower;
  HeadGains head;
  BarrierBounds bounds;
  double d_p = 0.0;
};

/// Value and exact directional derivative of a registered form. Inputs:
/// alpha1 (x^_j, x^_{j-1}, v^_{j-1}); alpha2 the five FollowerArgs; beta1 (x~, v~).
inline std::pair<double, double> dual_eval(DualForm form, std::span<const double> inputs,
                                           std::span<const double> seed,
                                           const DualFormParams& p) {
  using D = Dual<double>;
  auto expect = [&](std::size_t n) {
    if (inputs.size() != n) throw std::invalid_argument("dual_eval: wrong input count");
  };
  switch (form) {
    case DualForm::alpha1:
      expect(3);
      return directional_derivative(
          [&](std::span<const D> a) { return alpha1(a[0], a[1], a[2], p.follower.l1, p.d_p); },
          inputs, seed);
    case DualForm::alpha2:
      expect(5);
      return directional_derivative(
          [&](std::span<const D> a) {
            return alpha2(FollowerArgs<D>{a[0], a[1], a[2], a[3], a[4]}, p.follower, p.d_p);
          },
          inputs, seed);
    case DualForm::beta1:
      expect(2);
      return directional_derivative(
          [&](std::span<const D> a) { return beta1(a[0], a[1], p.head, p.bounds); }, inputs,
          seed);
  }
  throw std::invalid_argument("dual_eval: unknown form");
}

// ---------------------------------------------------------------------------
// Feasibility

/// One violated inequality: `name` is the inequality as written, `value`
/// the offending quantity and `bound` the limit it had to respect.
struct Violation {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  std::string context;
};

inline std::vector<Violation> validate_parameters(const FollowerGains& f, const HeadGains& h,
                                                  const ConstraintSpec& c) {
  std::vector<Violation> out;
  auto require = [&out](bool ok, const char* name, double value, double bound) {
    if (!ok) out.push_back({name, value, bound, {}});
  };
  require(f.l1 > 0.0, "l1 > 0", f.l1, 0.0);
  require(f.l2 > 0.0, "l2 > 0", f.l2, 0.0);
  require(f.l3 > 0.0, "l3 > 0", f.l3, 0.0);
  require(c.sigma1 > 0.0, "sigma1 > 0", c.sigma1, 0.0);
  require(c.sigma2 > 0.0, "sigma2 > 0", c.sigma2, 0.0);
  require(c.gamma2 > 0.0, "gamma2 > 0", c.gamma2, 0.0);
  require(c.gamma2 < c.service_distance, "gamma2 < d_s", c.gamma2, c.service_distance);
  require(c.service_distance < c.gamma1, "d_s < gamma1", c.service_distance, c.gamma1);
  require(h.ell1 > 0.0, "ell1 > 0", h.ell1, 0.0);
  if (c.rho1() > 0.0 && c.rho2() > 0.0) {
    const double cap = std::min(c.sigma2 / c.rho1(), c.sigma1 / c.rho2());
    require(h.ell1 < cap, "ell1 < min(sigma2/rho1, sigma1/rho2)", h.ell1, cap);
    const BarrierBounds b = derive_bounds(c, h.ell1);
    require(b.varrho1 > 0.0, "varrho1 > 0", b.varrho1, 0.0);
    require(b.varrho2 > 0.0, "varrho2 > 0", b.varrho2, 0.0);
  }
  require(h.ell2 > 2.0, "ell2 > 2", h.ell2, 2.0);
  const double ell3_bound = 2.0 + h.ell2 * h.ell2 / 2.0;
  require(h.ell3 > ell3_bound, "ell3 > 2 + ell2^2/2", h.ell3, ell3_bound);
  require(h.ell4 > 0.5, "ell4 > 1/2", h.ell4, 0.5);
  return out;
}

/// Initial feasibility for every train: x~_i(0) in (-rho2, rho1) and
/// q~_i(0) in (-varrho2, varrho1). `x`, `v` are flattened train-major
/// measurements; the first train is compared against (ref_x, ref_v).
inline std::vector<Violation> validate_initial(const ConsistTopology& topo,
                                               std::span<const double> x,
                                               std::span<const double> v, double ref_x,
                                               double ref_v, const ConstraintSpec& c,
                                               double ell1) {
  if (x.size() != topo.total() || v.size() != topo.total())
    throw std::invalid_argument("validate_initial: state size does not match topology");
  const BarrierBounds b = derive_bounds(c, ell1);
  std::vector<Violation> out;
  for (std::size_t i = 0; i < topo.train_count(); ++i) {
    const std::size_t head = topo.offset(i);
    const double fx = i == 0 ? ref_x : x[head - 1];
    const double fv = i == 0 ? ref_v : v[head - 1];
    const TrainPairErrors e = pair_errors(fx, fv, x[head], v[head], c.service_distance, ell1);
    const std::string ctx = "train " + std::to_string(i + 1);
    if (!(e.x_tilde > -b.rho2))
      out.push_back({"-rho2 < xtilde(0)", e.x_tilde, -b.rho2, ctx});
    if (!(e.x_tilde < b.rho1)) out.push_back({"xtilde(0) < rho1", e.x_tilde, b.rho1, ctx});
    if (!(e.q_tilde > -b.varrho2))
      out.push_back({"-varrho2 < qtilde(0)", e.q_tilde, -b.varrho2, ctx});
    if (!(e.q_tilde < b.varrho1))
      out.push_back({"qtilde(0) < varrho1", e.q_tilde, b.varrho1, ctx});
  }
  return out;
}

}  // namespace cruise
