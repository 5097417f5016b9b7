#include "ddlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ddlab/errors.hpp"

namespace ddlab {

double sample_diversity(std::span<const Vec2> points) {
  std::size_t n = points.size();
  if (n < 2) throw TooFewPoints("sample_diversity: need at least two points");
  if (n <= 2000) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        sum += (points[i] - points[j]).norm();
      }
    }
    return sum / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
  }
  RngStream rng(1234, 0);
  const int kPairs = 100000;
  double sum = 0.0;
  for (int p = 0; p < kPairs; ++p) {
    std::uint64_t i = rng.uniform_int(n);
    std::uint64_t j = rng.uniform_int(n);
    while (j == i) j = rng.uniform_int(n);
    sum += (points[i] - points[j]).norm();
  }
  return sum / kPairs;
}

double balanced_diversity(std::span<const Vec2> points,
                          std::span<const int> labels) {
  if (points.size() != labels.size()) {
    throw LengthMismatch("balanced_diversity: one label per point required");
  }
  std::map<int, std::vector<Vec2>> groups;
  for (std::size_t i = 0; i < points.size(); ++i) {
    groups[labels[i]].push_back(points[i]);
  }
  if (groups.empty()) {
    throw TooFewPoints("balanced_diversity: empty batch");
  }
  double sum = 0.0;
  for (const auto& [label, pts] : groups) {
    sum += sample_diversity(pts);  // throws TooFewPoints on a group of one
  }
  return sum / static_cast<double>(groups.size());
}

ModeStats mode_stats(std::span<const Vec2> points, const ToyDistribution& dist) {
  if (dist.kind != ToyKind::gmm_ring) {
    throw UnsupportedKind("mode_stats: only gmm_ring has discrete modes");
  }
  if (points.empty()) throw TooFewPoints("mode_stats: empty batch");
  int m = dist.n_modes;
  std::vector<Vec2> centers(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) centers[static_cast<std::size_t>(j)] = dist.mode_center(j);

  ModeStats st;
  st.counts.assign(static_cast<std::size_t>(m), 0);
  std::vector<int> assign(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    int best = 0;
    double bd = (points[i] - centers[0]).norm2();
    for (int j = 1; j < m; ++j) {
      double d = (points[i] - centers[static_cast<std::size_t>(j)]).norm2();
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    assign[i] = best;
    st.counts[static_cast<std::size_t>(best)] += 1;
  }

  double threshold = static_cast<double>(points.size()) / (4.0 * static_cast<double>(m));
  std::vector<bool> covered(static_cast<std::size_t>(m), false);
  for (int j = 0; j < m; ++j) {
    if (st.counts[static_cast<std::size_t>(j)] >= threshold) {
      covered[static_cast<std::size_t>(j)] = true;
      st.covered_modes += 1;
    }
  }
  st.coverage = static_cast<double>(st.covered_modes) / static_cast<double>(m);

  // Per-axis std around the assigned center, over points in covered modes:
  // sqrt(E |p - c|^2 / 2) matches the generator's mode_std for exact samples.
  double acc = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!covered[static_cast<std::size_t>(assign[i])]) continue;
    acc += (points[i] - centers[static_cast<std::size_t>(assign[i])]).norm2();
    cnt += 1;
  }
  st.within_mode_std = cnt == 0 ? 0.0 : std::sqrt(acc / (2.0 * static_cast<double>(cnt)));
  return st;
}

double is_analogue(std::span<const Vec2> points, const ToyDistribution& dist) {
  if (points.empty()) throw TooFewPoints("is_analogue: empty batch");
  int m = dist.n_modes;
  std::vector<std::vector<double>> post;
  post.reserve(points.size());
  std::vector<double> marginal(static_cast<std::size_t>(m), 0.0);
  for (Vec2 p : points) {
    post.push_back(oracle_posterior(dist, p));
    for (int j = 0; j < m; ++j) marginal[static_cast<std::size_t>(j)] += post.back()[static_cast<std::size_t>(j)];
  }
  for (double& v : marginal) v /= static_cast<double>(points.size());
  double mean_kl = 0.0;
  for (const auto& pi : post) {
    double kl = 0.0;
    for (int j = 0; j < m; ++j) {
      double p = pi[static_cast<std::size_t>(j)];
      if (p > 0.0) kl += p * std::log(p / marginal[static_cast<std::size_t>(j)]);
    }
    mean_kl += kl;
  }
  mean_kl /= static_cast<double>(points.size());
  return std::exp(mean_kl);
}

double frechet2(const BatchStats& a, const BatchStats& b) {
  Mat2 sa = psd_sqrt(a.cov);
  Mat2 inner = sa.mul(b.cov).mul(sa);
  // Symmetrize: the product is PSD-similar but accumulates asymmetry in the
  // last bits.
  double off = 0.5 * (inner.b + inner.c);
  inner.b = off;
  inner.c = off;
  Mat2 cross = psd_sqrt(inner);
  double d2 = (a.mean - b.mean).norm2() + a.cov.trace() + b.cov.trace() -
              2.0 * cross.trace();
  return std::max(0.0, d2);
}

double frechet2(std::span<const Vec2> a, std::span<const Vec2> b) {
  return frechet2(batch_stats(a), batch_stats(b));
}

DtCurve dt_curve(std::span<const Trajectory> trajs, const NoiseSchedule& sched) {
  if (trajs.empty()) throw TooFewPoints("dt_curve: empty batch");
  std::size_t n_steps = trajs[0].steps.size();
  if (n_steps == 0) throw LengthMismatch("dt_curve: chains have no steps");
  for (const Trajectory& t : trajs) {
    if (t.steps.size() != n_steps) {
      throw LengthMismatch("dt_curve: chains have different step counts");
    }
    for (std::size_t i = 0; i < n_steps; ++i) {
      if (t.steps[i].t_from != trajs[0].steps[i].t_from) {
        throw LengthMismatch("dt_curve: chains have different step grids");
      }
    }
  }

  DtCurve curve;
  curve.n_chains = static_cast<int>(trajs.size());
  for (std::size_t i = 0; i < n_steps; ++i) {
    double acc = 0.0;
    for (const Trajectory& t : trajs) acc += (t.steps[i].dt_est - t.x0).norm();
    curve.fractions.push_back(1.0 -
                              static_cast<double>(trajs[0].steps[i].t_from) /
                                  static_cast<double>(sched.T));
    curve.values.push_back(acc / static_cast<double>(trajs.size()));
  }
  curve.raw_initial = curve.values[0];
  if (!(curve.raw_initial > 0.0)) {
    throw TooFewPoints("dt_curve: chains start already committed");
  }
  for (double& v : curve.values) v /= curve.raw_initial;
  return curve;
}

MetricsReport metrics_report(std::span<const Vec2> points,
                             const ToyDistribution& dist,
                             std::span<const Vec2> truth) {
  MetricsReport r;
  r.n = static_cast<int>(points.size());
  r.diversity = sample_diversity(points);
  r.stats = batch_stats(points);
  r.frechet2_to_truth = frechet2(r.stats, batch_stats(truth));
  if (dist.kind == ToyKind::gmm_ring) {
    r.modes = mode_stats(points, dist);
    r.is_value = is_analogue(points, dist);
  }
  return r;
}

}  // namespace ddlab
