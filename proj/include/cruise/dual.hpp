#pragma once

/// Forward-mode automatic differentiation with dual numbers. Dual<T> nests,
/// so Dual<Dual<double>> carries mixed second derivatives.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <vector>

namespace cruise {

template <class T>
struct Dual {
  T value{};
  T deriv{};

  constexpr Dual() = default;
  constexpr Dual(double v) : value(v), deriv(0.0) {}  // NOLINT: implicit constant lift
  constexpr Dual(T v, T d) : value(std::move(v)), deriv(std::move(d)) {}

  Dual& operator+=(const Dual& o) { value += o.value; deriv += o.deriv; return *this; }
  Dual& operator-=(const Dual& o) { value -= o.value; deriv -= o.deriv; return *this; }
  Dual& operator*=(const Dual& o) { return *this = *this * o; }
  Dual& operator/=(const Dual& o) { return *this = *this / o; }

  friend Dual operator+(const Dual& a, const Dual& b) { return {a.value + b.value, a.deriv + b.deriv}; }
  friend Dual operator-(const Dual& a, const Dual& b) { return {a.value - b.value, a.deriv - b.deriv}; }
  friend Dual operator-(const Dual& a) { return {-a.value, -a.deriv}; }
  friend Dual operator*(const Dual& a, const Dual& b) {
    return {a.value * b.value, a.deriv * b.value + a.value * b.deriv};
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    return {a.value / b.value, (a.deriv * b.value - a.value * b.deriv) / (b.value * b.value)};
  }

  friend Dual operator+(const Dual& a, double s) { return {a.value + s, a.deriv}; }
  friend Dual operator+(double s, const Dual& a) { return {s + a.value, a.deriv}; }
  friend Dual operator-(const Dual& a, double s) { return {a.value - s, a.deriv}; }
  friend Dual operator-(double s, const Dual& a) { return {s - a.value, -a.deriv}; }
  friend Dual operator*(const Dual& a, double s) { return {a.value * s, a.deriv * s}; }
  friend Dual operator*(double s, const Dual& a) { return {s * a.value, s * a.deriv}; }
  friend Dual operator/(const Dual& a, double s) { return {a.value / s, a.deriv / s}; }
  friend Dual operator/(double s, const Dual& a) {
    return {s / a.value, -(s * a.deriv) / (a.value * a.value)};
  }

  friend Dual log(const Dual& a) {
    using std::log;
    return {log(a.value), a.deriv / a.value};
  }
  friend Dual exp(const Dual& a) {
    using std::exp;
    const T e = exp(a.value);
    return {e, e * a.deriv};
  }
};

template <class>
struct is_dual : std::false_type {};
template <class T>
struct is_dual<Dual<T>> : std::true_type {};

/// Innermost primal value.
inline double primal(double x) { return x; }
template <class T>
double primal(const Dual<T>& x) {
  return primal(x.value);
}

/// Value and directional derivative of f at x along `seed`.
/// f must accept std::span<const Dual<double>> and return Dual<double>.
template <class F>
std::pair<double, double> directional_derivative(F&& f, std::span<const double> x,
                                                 std::span<const double> seed) {
  if (x.size() != seed.size()) throw std::invalid_argument("seed size mismatch");
  std::vector<Dual<double>> args(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) args[i] = Dual<double>(x[i], seed[i]);
  const Dual<double> out = f(std::span<const Dual<double>>(args));
  return {out.value, out.deriv};
}

/// Full gradient by one forward sweep per input.
template <class F>
std::vector<double> gradient(F&& f, std::span<const double> x) {
  std::vector<double> g(x.size());
  std::vector<double> seed(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    seed[i] = 1.0;
    g[i] = directional_derivative(f, x, seed).second;
    seed[i] = 0.0;
  }
  return g;
}

}  // namespace cruise
