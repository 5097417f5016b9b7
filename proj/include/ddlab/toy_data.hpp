#pragma once

#include <string>
#include <vector>

#include "ddlab/numerics.hpp"
#include "ddlab/rng.hpp"

namespace ddlab {

enum class ToyKind { gmm_ring, two_moons, spiral };

std::string to_string(ToyKind k);
ToyKind toy_kind_from_string(const std::string& s);

// A 2-D toy distribution with a known generative story. gmm_ring is the
// benchmark: equally weighted isotropic Gaussians on a circle, which admits
// an exact mode posterior and therefore exact coverage/assignment metrics.
struct ToyDistribution {
  ToyKind kind = ToyKind::gmm_ring;
  int n_modes = 8;            // gmm_ring only
  double ring_radius = 4.0;   // gmm_ring only
  double mode_std = 0.15;     // gmm_ring: per-axis std inside a mode
  double moons_radius = 3.0;  // two_moons only
  double spiral_turns = 2.0;  // spiral only
  double spiral_radius = 4.5; // spiral only: max radius
  double noise_std = 0.15;    // two_moons / spiral jitter
  Vec2 attribute_direction{1.0, 0.0};

  static ToyDistribution gmm_ring(int n_modes = 8, double ring_radius = 4.0,
                                  double mode_std = 0.15);
  static ToyDistribution two_moons(double radius = 3.0, double noise_std = 0.15);
  static ToyDistribution spiral(double turns = 2.0, double radius = 4.5,
                                double noise_std = 0.1);

  // Center of mode j (gmm_ring). Throws IndexOutOfRange / UnsupportedKind.
  Vec2 mode_center(int j) const;
};

struct LabeledSample {
  Vec2 point;
  int mode_label;  // -1 for kinds without discrete modes
};

// Draws n exact samples. For gmm_ring each sample consumes one uniform_int
// draw (mode id) and one gaussian_pair (within-mode offset).
std::vector<LabeledSample> sample_truth(const ToyDistribution& dist, int n,
                                        RngStream& rng);

// Exact posterior p(mode | point) for gmm_ring, computed with log-sum-exp.
// Throws UnsupportedKind for other kinds.
std::vector<double> oracle_posterior(const ToyDistribution& dist, Vec2 p);

// Scalar controllable attribute of a sample: projection of the point onto
// attribute_direction.
double attribute_value(const ToyDistribution& dist, Vec2 p);

}  // namespace ddlab
