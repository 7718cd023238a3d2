#pragma once

/// Desired motion (x0, v0, w0, u0) generated as a piecewise-constant-jerk
/// trajectory: x0 is piecewise cubic, v0 quadratic, w0 linear, u0 constant.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace cruise {

struct ReferencePhase {
  double duration = 0.0;  // s
  double jerk = 0.0;      // m/s^3

  bool operator==(const ReferencePhase&) const = default;
};

struct ReferencePoint {
  double x = 0.0;
  double v = 0.0;
  double w = 0.0;
  double u = 0.0;
};

struct ReferenceProfile {
  double x0 = 0.0;
  double v0 = 0.0;
  double w0 = 0.0;
  double v_max = 0.0;
  std::vector<ReferencePhase> phases;

  bool operator==(const ReferenceProfile&) const = default;
};

namespace detail {

inline ReferencePoint advance(const ReferencePoint& s, double jerk, double dt) {
  return {s.x + s.v * dt + s.w * dt * dt / 2.0 + jerk * dt * dt * dt / 6.0,
          s.v + s.w * dt + jerk * dt * dt / 2.0, s.w + jerk * dt, jerk};
}

}  // namespace detail

inline double horizon(const ReferenceProfile& profile) {
  double total = 0.0;
  for (const auto& p : profile.phases) total += p.duration;
  return total;
}

/// Throws std::invalid_argument unless every phase has positive duration and
/// v0 stays inside [0, v_max] (checked at each phase's closed-form extrema).
inline void validate(const ReferenceProfile& profile) {
  if (profile.phases.empty()) throw std::invalid_argument("reference: no phases");
  constexpr double slack = 1e-9;
  auto check_v = [&](double v, double t) {
    if (v < -slack || v > profile.v_max + slack)
      throw std::invalid_argument("reference: velocity " + std::to_string(v) + " at t=" +
                                  std::to_string(t) + " outside [0, v_max]");
  };
  ReferencePoint s{profile.x0, profile.v0, profile.w0, 0.0};
  double t = 0.0;
  check_v(s.v, t);
  for (const auto& p : profile.phases) {
    if (!(p.duration > 0.0)) throw std::invalid_argument("reference: phase duration must be > 0");
    if (p.jerk != 0.0) {
      const double tau = -s.w / p.jerk;
      if (tau > 0.0 && tau < p.duration) check_v(detail::advance(s, p.jerk, tau).v, t + tau);
    }
    s = detail::advance(s, p.jerk, p.duration);
    t += p.duration;
    check_v(s.v, t);
  }
}

/// Reference at time t in [0, horizon]. Phase boundaries belong to the later phase.
inline ReferencePoint evaluate(const ReferenceProfile& profile, double t) {
  const double end = horizon(profile);
  if (t < 0.0 || t > end * (1.0 + 1e-12) + 1e-9)
    throw std::out_of_range("reference: t=" + std::to_string(t) + " outside [0, " +
                            std::to_string(end) + "]");
  ReferencePoint s{profile.x0, profile.v0, profile.w0, 0.0};
  double start = 0.0;
  for (std::size_t k = 0; k < profile.phases.size(); ++k) {
    const auto& p = profile.phases[k];
    const bool last = k + 1 == profile.phases.size();
    if (t < start + p.duration || last) return detail::advance(s, p.jerk, t - start);
    s = detail::advance(s, p.jerk, p.duration);
    start += p.duration;
  }
  return s;
}

/// Shipped profile over 2400 s: cruise at 20 m/s, accelerate to 92 m/s,
/// cruise, brake to 60 m/s, cruise, accelerate to 80 m/s, cruise. Jerk
/// magnitude 1/64 m/s^3 and 32 s ramps keep every plateau exactly representable.
inline ReferenceProfile default_profile(double x0) {
  constexpr double j = 1.0 / 64.0;
  ReferenceProfile p;
  p.x0 = x0;
  p.v0 = 20.0;
  p.w0 = 0.0;
  p.v_max = 92.0;
  p.phases = {
      {100.0, 0.0},                                     // cruise at 20
      {32.0, j},  {112.0, 0.0}, {32.0, -j},             // +72 m/s
      {924.0, 0.0},                                     // cruise at 92
      {32.0, -j}, {32.0, 0.0},  {32.0, j},              // -32 m/s
      {304.0, 0.0},                                     // cruise at 60
      {32.0, j},  {8.0, 0.0},   {32.0, -j},             // +20 m/s
      {728.0, 0.0},                                     // cruise at 80
  };
  return p;
}

}  // namespace cruise
