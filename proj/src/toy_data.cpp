#include "ddlab/toy_data.hpp"

#include <algorithm>
#include <cmath>

#include "ddlab/errors.hpp"

namespace ddlab {

std::string to_string(ToyKind k) {
  switch (k) {
    case ToyKind::gmm_ring: return "gmm_ring";
    case ToyKind::two_moons: return "two_moons";
    case ToyKind::spiral: return "spiral";
  }
  return "?";
}

ToyKind toy_kind_from_string(const std::string& s) {
  if (s == "gmm_ring") return ToyKind::gmm_ring;
  if (s == "two_moons") return ToyKind::two_moons;
  if (s == "spiral") return ToyKind::spiral;
  throw UnsupportedKind("unknown toy distribution kind: " + s);
}

ToyDistribution ToyDistribution::gmm_ring(int n_modes, double ring_radius,
                                          double mode_std) {
  if (n_modes < 1) throw UnsupportedKind("gmm_ring: n_modes must be >= 1");
  ToyDistribution d;
  d.kind = ToyKind::gmm_ring;
  d.n_modes = n_modes;
  d.ring_radius = ring_radius;
  d.mode_std = mode_std;
  return d;
}

ToyDistribution ToyDistribution::two_moons(double radius, double noise_std) {
  ToyDistribution d;
  d.kind = ToyKind::two_moons;
  d.moons_radius = radius;
  d.noise_std = noise_std;
  return d;
}

ToyDistribution ToyDistribution::spiral(double turns, double radius,
                                        double noise_std) {
  ToyDistribution d;
  d.kind = ToyKind::spiral;
  d.spiral_turns = turns;
  d.spiral_radius = radius;
  d.noise_std = noise_std;
  return d;
}

Vec2 ToyDistribution::mode_center(int j) const {
  if (kind != ToyKind::gmm_ring) {
    throw UnsupportedKind("mode_center: only gmm_ring has discrete modes");
  }
  if (j < 0 || j >= n_modes) throw IndexOutOfRange("mode_center: bad mode id");
  double ang = 2.0 * M_PI * static_cast<double>(j) / static_cast<double>(n_modes);
  return {ring_radius * std::cos(ang), ring_radius * std::sin(ang)};
}

std::vector<LabeledSample> sample_truth(const ToyDistribution& dist, int n,
                                        RngStream& rng) {
  if (n < 0) throw TooFewPoints("sample_truth: negative count");
  std::vector<LabeledSample> out;
  out.reserve(static_cast<std::size_t>(n));
  switch (dist.kind) {
    case ToyKind::gmm_ring: {
      for (int i = 0; i < n; ++i) {
        int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(dist.n_modes)));
        Vec2 g = gaussian_pair(rng);
        out.push_back({dist.mode_center(j) + g * dist.mode_std, j});
      }
      break;
    }
    case ToyKind::two_moons: {
      // Upper moon centered at (-r/4, -r/8), lower moon mirrored; half-circle
      // arcs plus isotropic jitter.
      double r = dist.moons_radius;
      for (int i = 0; i < n; ++i) {
        int half = static_cast<int>(rng.uniform_int(2));
        double a = M_PI * rng.uniform01();
        Vec2 g = gaussian_pair(rng);
        Vec2 p;
        if (half == 0) {
          p = {r * std::cos(a) - 0.25 * r, r * std::sin(a) - 0.5 * r};
        } else {
          p = {r * std::cos(-a) + 0.25 * r, r * std::sin(-a) + 0.5 * r};
        }
        out.push_back({p + g * dist.noise_std, -1});
      }
      break;
    }
    case ToyKind::spiral: {
      for (int i = 0; i < n; ++i) {
        double u = rng.uniform01();
        double ang = 2.0 * M_PI * dist.spiral_turns * u;
        double rad = dist.spiral_radius * u;
        Vec2 g = gaussian_pair(rng);
        Vec2 p{rad * std::cos(ang), rad * std::sin(ang)};
        out.push_back({p + g * dist.noise_std, -1});
      }
      break;
    }
  }
  return out;
}

std::vector<double> oracle_posterior(const ToyDistribution& dist, Vec2 p) {
  if (dist.kind != ToyKind::gmm_ring) {
    throw UnsupportedKind("oracle_posterior: only gmm_ring is supported");
  }
  // Equal weights and equal isotropic covariances: posterior reduces to a
  // softmax of -||p - c_j||^2 / (2 sigma^2), evaluated with log-sum-exp.
  int m = dist.n_modes;
  double inv2s2 = 1.0 / (2.0 * dist.mode_std * dist.mode_std);
  std::vector<double> logw(static_cast<std::size_t>(m));
  double mx = -1e300;
  for (int j = 0; j < m; ++j) {
    double d2 = (p - dist.mode_center(j)).norm2();
    logw[static_cast<std::size_t>(j)] = -d2 * inv2s2;
    mx = std::max(mx, logw[static_cast<std::size_t>(j)]);
  }
  double z = 0.0;
  for (double& l : logw) {
    l = std::exp(l - mx);
    z += l;
  }
  for (double& l : logw) l /= z;
  return logw;
}

double attribute_value(const ToyDistribution& dist, Vec2 p) {
  return p.dot(dist.attribute_direction);
}

}  // namespace ddlab
