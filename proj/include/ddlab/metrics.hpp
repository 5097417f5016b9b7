#pragma once

#include <span>
#include <vector>

#include "ddlab/numerics.hpp"
#include "ddlab/sampler.hpp"
#include "ddlab/toy_data.hpp"

namespace ddlab {

// Mean pairwise Euclidean distance. Exact over all n(n-1)/2 pairs for
// n <= 2000; above that, a fixed 100000-pair subsample drawn from an internal
// stream seeded with 1234 (so the estimate is reproducible and independent of
// caller RNG state). Throws TooFewPoints for n < 2.
double sample_diversity(std::span<const Vec2> points);

// Shared-condition diversity: group points by label and average
// sample_diversity over the groups. This is the protocol behind the
// headline diversity numbers — variation among samples that share a
// condition, not spread of the global mixture. Throws LengthMismatch when
// sizes differ, TooFewPoints when any group has fewer than two points.
double balanced_diversity(std::span<const Vec2> points,
                          std::span<const int> labels);

struct ModeStats {
  std::vector<int> counts;     // nearest-center assignment per mode
  int covered_modes = 0;       // modes holding at least n / (4 n_modes) points
  double coverage = 0.0;       // covered_modes / n_modes
  double within_mode_std = 0.0;  // per-axis std around centers, covered modes only
};

// Assignment, coverage, and within-mode spread against the exact gmm_ring
// centers. Throws UnsupportedKind for other distributions, TooFewPoints for
// an empty batch.
ModeStats mode_stats(std::span<const Vec2> points, const ToyDistribution& dist);

// exp(mean_i KL(posterior_i || mean posterior)): 1.0 when every point commits
// to one mode, n_modes when commitments are sharp and evenly spread.
double is_analogue(std::span<const Vec2> points, const ToyDistribution& dist);

// Squared Frechet distance |mu1 - mu2|^2 + tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2)
// between the Gaussian moment summaries of two batches.
double frechet2(const BatchStats& a, const BatchStats& b);
double frechet2(std::span<const Vec2> a, std::span<const Vec2> b);

// Commitment curve over a set of trajectories sharing one step structure:
// values[i] is the mean over chains of the distance between the committed
// sample at evaluation i and that chain's own final sample, normalized so
// values[0] == 1 (the curve falls toward 0 as the chain commits; the last
// record is exactly 0 for deterministic chains because the final transition
// lands on the committed sample). fractions[i] = 1 - t_i / T.
struct DtCurve {
  std::vector<double> fractions;
  std::vector<double> values;
  double raw_initial = 0.0;  // unnormalized values[0]
  int n_chains = 0;
};

// Throws TooFewPoints on an empty batch or when every chain starts already
// committed; LengthMismatch when chains disagree on the step grid.
DtCurve dt_curve(std::span<const Trajectory> trajs, const NoiseSchedule& sched);

struct MetricsReport {
  int n = 0;
  double diversity = 0.0;
  ModeStats modes;
  double is_value = 0.0;
  double frechet2_to_truth = 0.0;
  BatchStats stats;
};

// Bundles every scalar metric for one sample set against a truth batch.
MetricsReport metrics_report(std::span<const Vec2> points,
                             const ToyDistribution& dist,
                             std::span<const Vec2> truth);

}  // namespace ddlab
