#include "ddlab/slider.hpp"

#include <cmath>

#include "ddlab/errors.hpp"
#include "ddlab/parallel.hpp"

namespace ddlab {

LoraAdapter train_slider(const DenoiserModel& model, const ToyDistribution& dist,
                         const NoiseSchedule& sched, const SliderConfig& cfg,
                         std::uint64_t seed, TrainStats* stats) {
  if (cfg.iterations < 1 || cfg.batch < 1) {
    throw EmptyBatch("train_slider: iterations and batch must be >= 1");
  }
  RngStream init_rng(seed, kStreamAdapterInit);
  LoraAdapter adapter = LoraAdapter::init(model, cfg.rank, init_rng);
  RngStream rng(seed, kStreamAdapterLoop);
  AdamState adam = AdamState::sized(adapter.param_count());
  Vec2 offset = dist.attribute_direction * cfg.delta;

  std::vector<TrainBatchItem> batch(static_cast<std::size_t>(cfg.batch));
  for (int it = 0; it < cfg.iterations; ++it) {
    for (auto& item : batch) {
      Vec2 x0 = sample_truth(dist, 1, rng)[0].point + offset;
      int t = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(sched.T))) + 1;
      NoisePair np = forward_noise(sched, x0, t, rng);
      item.x = np.x_t;
      item.t_frac = static_cast<double>(t) / static_cast<double>(sched.T);
      item.cond = std::nullopt;
      item.target = np.eps;
    }
    auto [loss, tape] = backward(model, &adapter, batch, Trainable::adapter_params);
    double u = cfg.iterations <= 1
                   ? 0.0
                   : static_cast<double>(it) / static_cast<double>(cfg.iterations - 1);
    double lr = 0.1 * cfg.lr + 0.9 * cfg.lr * 0.5 * (1.0 + std::cos(M_PI * u));
    opt_step(adapter, tape, adam, lr);
    if (stats && (it % cfg.log_every == 0 || it == cfg.iterations - 1)) {
      if (stats->loss_log.empty()) stats->first_logged_loss = loss;
      stats->loss_log.emplace_back(it, loss);
      stats->final_loss = loss;
    }
  }
  return adapter;
}

namespace {

double mean_attribute(const DenoiserModel& model, const LoraAdapter* adapter,
                      const StepGrid& grid, const NoiseSchedule& sched,
                      const ToyDistribution& dist, int n, std::uint64_t seed,
                      double x0_clip) {
  std::vector<double> vals(static_cast<std::size_t>(n), 0.0);
  parallel_chunks(static_cast<std::size_t>(n), kGradChunks,
                  [&](int, std::size_t begin, std::size_t end) {
                    SamplerConfig cfg;
                    cfg.grid = grid;
                    cfg.x0_clip = x0_clip;
                    for (std::size_t i = begin; i < end; ++i) {
                      RngStream rng(seed, kStreamTransferChain + i);
                      Trajectory t = sample(model, adapter, sched, cfg, rng);
                      vals[i] = attribute_value(dist, t.x0);
                    }
                  });
  double acc = 0.0;
  for (double v : vals) acc += v;
  return acc / static_cast<double>(n);
}

}  // namespace

TransferReport transfer_slider(const LoraAdapter& adapter,
                               const DenoiserModel& source,
                               const StepGrid& source_grid,
                               const DenoiserModel& target,
                               const StepGrid& target_grid,
                               const NoiseSchedule& sched,
                               const ToyDistribution& dist, int n,
                               std::span<const double> scales,
                               std::uint64_t seed, double x0_clip) {
  if (n < 1) throw TooFewPoints("transfer_slider: need at least one chain");
  TransferReport rep;
  rep.n_per_cell = n;
  rep.scales.assign(scales.begin(), scales.end());
  rep.source_unadapted_mean = mean_attribute(source, nullptr, source_grid,
                                             sched, dist, n, seed, x0_clip);
  rep.target_unadapted_mean = mean_attribute(target, nullptr, target_grid,
                                             sched, dist, n, seed, x0_clip);
  for (double s : scales) {
    LoraAdapter at = adapter.at_scale(s);
    double sm =
        mean_attribute(source, &at, source_grid, sched, dist, n, seed, x0_clip);
    double tm =
        mean_attribute(target, &at, target_grid, sched, dist, n, seed, x0_clip);
    rep.source_means.push_back(sm);
    rep.target_means.push_back(tm);
    rep.source_shifts.push_back(sm - rep.source_unadapted_mean);
    rep.target_shifts.push_back(tm - rep.target_unadapted_mean);
  }
  // Headline numbers at scale 1 (or the closest provided scale).
  std::size_t at_one = 0;
  double best = 1e300;
  for (std::size_t i = 0; i < rep.scales.size(); ++i) {
    double d = std::abs(rep.scales[i] - 1.0);
    if (d < best) {
      best = d;
      at_one = i;
    }
  }
  if (!rep.scales.empty()) {
    rep.source_shift = rep.source_shifts[at_one];
    rep.target_shift = rep.target_shifts[at_one];
    rep.ratio_defined = std::abs(rep.source_shift) > 1e-9;
    rep.transfer_ratio =
        rep.ratio_defined ? rep.target_shift / rep.source_shift : 0.0;
  }
  return rep;
}

}  // namespace ddlab
