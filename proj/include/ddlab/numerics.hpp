#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "ddlab/rng.hpp"

namespace ddlab {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  double dot(Vec2 o) const { return x * o.x + y * o.y; }
  double norm2() const { return x * x + y * y; }
  double norm() const { return std::sqrt(norm2()); }
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

// Row-major 2x2 matrix.
struct Mat2 {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;  // [[a, b], [c, d]]

  static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  double trace() const { return a + d; }
  double det() const { return a * d - b * c; }
  Mat2 operator+(const Mat2& o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
  Mat2 operator-(const Mat2& o) const { return {a - o.a, b - o.b, c - o.c, d - o.d}; }
  Mat2 operator*(double s) const { return {a * s, b * s, c * s, d * s}; }
  Mat2 mul(const Mat2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d,
            c * o.a + d * o.c, c * o.b + d * o.d};
  }
  Vec2 mul(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
};

// Two independent standard normal deviates via Box-Muller. Consumes exactly
// two u64 draws, which keeps counter arithmetic for stream splitting trivial.
Vec2 gaussian_pair(RngStream& rng);

// Principal square root of a symmetric positive semidefinite 2x2 matrix.
// Uses the closed form S = (M + sqrt(det M) I) / sqrt(tr M + 2 sqrt(det M));
// falls back to an eigendecomposition when the denominator degenerates.
// Throws NonPsdInput if the input is asymmetric beyond 1e-9 or has a
// meaningfully negative eigenvalue.
Mat2 psd_sqrt(const Mat2& m);

struct BatchStats {
  Vec2 mean;
  Mat2 cov;  // unbiased (n-1 divisor); zero matrix when n == 1
};

// Mean and covariance of a point batch. Throws TooFewPoints when empty.
BatchStats batch_stats(std::span<const Vec2> points);

}  // namespace ddlab
