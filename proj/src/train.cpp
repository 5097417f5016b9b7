#include "ddlab/train.hpp"

#include <cmath>

#include "ddlab/errors.hpp"

namespace ddlab {

double lr_at(const TrainConfig& cfg, int iteration) {
  if (cfg.iterations <= 1) return cfg.lr;
  double u = static_cast<double>(iteration) / static_cast<double>(cfg.iterations - 1);
  return cfg.lr_final + (cfg.lr - cfg.lr_final) * 0.5 * (1.0 + std::cos(M_PI * u));
}

DenoiserModel train_base(const ToyDistribution& dist, const NoiseSchedule& sched,
                         const DenoiserConfig& dcfg, const TrainConfig& tcfg,
                         std::uint64_t seed, TrainStats* stats) {
  if (tcfg.iterations < 1 || tcfg.batch < 1) {
    throw EmptyBatch("train_base: iterations and batch must be >= 1");
  }
  if (dcfg.n_conditions > 0 && dist.kind == ToyKind::gmm_ring &&
      dist.n_modes > dcfg.n_conditions) {
    throw ConditionOutOfRange("train_base: more modes than condition slots");
  }
  RngStream init_rng(seed, kStreamModelInit);
  DenoiserModel model = DenoiserModel::init(dcfg, ModelRole::base, init_rng);
  RngStream rng(seed, kStreamTrainLoop);
  AdamState adam = AdamState::sized(model.param_count());

  std::vector<TrainBatchItem> batch(static_cast<std::size_t>(tcfg.batch));
  for (int it = 0; it < tcfg.iterations; ++it) {
    for (auto& item : batch) {
      LabeledSample s = sample_truth(dist, 1, rng)[0];
      int t = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(sched.T))) + 1;
      NoisePair np = forward_noise(sched, s.point, t, rng);
      item.x = np.x_t;
      item.t_frac = static_cast<double>(t) / static_cast<double>(sched.T);
      item.target = np.eps;
      if (dcfg.n_conditions > 0) {
        bool drop = rng.uniform01() < tcfg.cond_dropout;
        item.cond = (drop || s.mode_label < 0)
                        ? std::nullopt
                        : std::optional<int>(s.mode_label);
      } else {
        item.cond = std::nullopt;
      }
    }
    auto [loss, tape] = backward(model, nullptr, batch, Trainable::model_params);
    opt_step(model, tape, adam, lr_at(tcfg, it));
    if (stats && (it % tcfg.log_every == 0 || it == tcfg.iterations - 1)) {
      if (stats->loss_log.empty()) stats->first_logged_loss = loss;
      stats->loss_log.emplace_back(it, loss);
      stats->final_loss = loss;
    }
  }
  return model;
}

}  // namespace ddlab
