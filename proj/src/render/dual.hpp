#pragma once

#include <array>

namespace splatflow::render::detail {

/// Forward-mode dual number with three tangent directions.
struct Dual3 {
  double v = 0.0;
  std::array<double, 3> d{};

  Dual3() = default;
  explicit Dual3(double value) : v(value) {}
  Dual3(double value, int axis) : v(value) { d[axis] = 1.0; }

  friend Dual3 operator+(const Dual3& a, const Dual3& b) {
    Dual3 r(a.v + b.v);
    for (int i = 0; i < 3; ++i) r.d[i] = a.d[i] + b.d[i];
    return r;
  }
  friend Dual3 operator-(const Dual3& a, const Dual3& b) {
    Dual3 r(a.v - b.v);
    for (int i = 0; i < 3; ++i) r.d[i] = a.d[i] - b.d[i];
    return r;
  }
  friend Dual3 operator-(const Dual3& a) {
    Dual3 r(-a.v);
    for (int i = 0; i < 3; ++i) r.d[i] = -a.d[i];
    return r;
  }
  friend Dual3 operator*(const Dual3& a, const Dual3& b) {
    Dual3 r(a.v * b.v);
    for (int i = 0; i < 3; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    return r;
  }
  friend Dual3 operator*(double s, const Dual3& a) {
    Dual3 r(s * a.v);
    for (int i = 0; i < 3; ++i) r.d[i] = s * a.d[i];
    return r;
  }
  friend Dual3 operator*(const Dual3& a, double s) { return s * a; }
};

}  // namespace splatflow::render::detail
