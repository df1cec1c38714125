#pragma once

#include <cmath>

namespace ldg {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2() = default;
  Vec2(double x_, double y_) : x(x_), y(y_) {}

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

/// 2x2 tensor with entries a(row, column).
struct Tensor2 {
  double a11 = 0.0, a12 = 0.0;
  double a21 = 0.0, a22 = 0.0;

  Tensor2() = default;
  Tensor2(double a11_, double a12_, double a21_, double a22_)
      : a11(a11_), a12(a12_), a21(a21_), a22(a22_) {}

  static Tensor2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static Tensor2 outer(const Vec2& a, const Vec2& b) {
    return {a.x * b.x, a.x * b.y, a.y * b.x, a.y * b.y};
  }

  Tensor2 operator+(const Tensor2& o) const {
    return {a11 + o.a11, a12 + o.a12, a21 + o.a21, a22 + o.a22};
  }
  Tensor2 operator-(const Tensor2& o) const {
    return {a11 - o.a11, a12 - o.a12, a21 - o.a21, a22 - o.a22};
  }
  Tensor2 operator*(double s) const {
    return {a11 * s, a12 * s, a21 * s, a22 * s};
  }
  Tensor2& operator+=(const Tensor2& o) {
    a11 += o.a11;
    a12 += o.a12;
    a21 += o.a21;
    a22 += o.a22;
    return *this;
  }

  Tensor2 sym() const {
    const double off = 0.5 * (a12 + a21);
    return {a11, off, off, a22};
  }
  Tensor2 transpose() const { return {a11, a21, a12, a22}; }
  double trace() const { return a11 + a22; }
  double dot(const Tensor2& o) const {
    return a11 * o.a11 + a12 * o.a12 + a21 * o.a21 + a22 * o.a22;
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec2 apply(const Vec2& v) const {
    return {a11 * v.x + a12 * v.y, a21 * v.x + a22 * v.y};
  }
};

inline Tensor2 operator*(double s, const Tensor2& t) { return t * s; }

}  // namespace ldg
