#include "ddlab/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "ddlab/errors.hpp"

namespace ddlab {

Vec2 gaussian_pair(RngStream& rng) {
  double u1 = rng.uniform_pos();
  double u2 = rng.uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

Mat2 psd_sqrt(const Mat2& m) {
  if (std::abs(m.b - m.c) > 1e-9) {
    throw NonPsdInput("psd_sqrt: matrix is not symmetric");
  }
  double off = 0.5 * (m.b + m.c);
  double tr = m.a + m.d;
  double disc = std::sqrt(std::max(0.0, 0.25 * (m.a - m.d) * (m.a - m.d) + off * off));
  double lo = 0.5 * tr - disc;
  double hi = 0.5 * tr + disc;
  double tol = 1e-12 * std::max(1.0, std::abs(hi));
  if (lo < -tol) {
    throw NonPsdInput("psd_sqrt: matrix has a negative eigenvalue");
  }
  lo = std::max(lo, 0.0);
  hi = std::max(hi, 0.0);

  double det = lo * hi;
  double s = std::sqrt(det);
  double denom2 = tr + 2.0 * s;
  if (denom2 >= 1e-12) {
    double denom = std::sqrt(denom2);
    Mat2 sym{m.a, off, off, m.d};
    return (sym + Mat2::identity() * s) * (1.0 / denom);
  }

  // Nearly zero matrix or rank-deficient with tiny trace: take square roots
  // along the eigenvectors explicitly.
  double sl = std::sqrt(lo), sh = std::sqrt(hi);
  // Eigenvector for hi of [[a, off], [off, d]].
  double vx, vy;
  if (std::abs(off) > 0.0) {
    vx = hi - m.d;
    vy = off;
  } else if (m.a >= m.d) {
    vx = 1.0;
    vy = 0.0;
  } else {
    vx = 0.0;
    vy = 1.0;
  }
  double n = std::hypot(vx, vy);
  if (n == 0.0) return {0.0, 0.0, 0.0, 0.0};
  vx /= n;
  vy /= n;
  // S = sh * v v^T + sl * w w^T with w perpendicular to v.
  return {sh * vx * vx + sl * vy * vy, (sh - sl) * vx * vy,
          (sh - sl) * vx * vy, sh * vy * vy + sl * vx * vx};
}

BatchStats batch_stats(std::span<const Vec2> points) {
  if (points.empty()) throw TooFewPoints("batch_stats: empty batch");
  Vec2 mean;
  for (Vec2 p : points) mean += p;
  mean = mean / static_cast<double>(points.size());
  Mat2 cov;
  if (points.size() > 1) {
    for (Vec2 p : points) {
      Vec2 d = p - mean;
      cov.a += d.x * d.x;
      cov.b += d.x * d.y;
      cov.d += d.y * d.y;
    }
    double inv = 1.0 / static_cast<double>(points.size() - 1);
    cov.a *= inv;
    cov.b *= inv;
    cov.c = cov.b;
    cov.d *= inv;
  }
  return {mean, cov};
}

}  // namespace ddlab
