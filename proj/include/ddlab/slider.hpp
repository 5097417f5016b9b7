#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ddlab/denoiser.hpp"
#include "ddlab/sampler.hpp"
#include "ddlab/schedule.hpp"
#include "ddlab/toy_data.hpp"
#include "ddlab/train.hpp"

namespace ddlab {

struct SliderConfig {
  double delta = 2.0;  // attribute shift the adapter is trained to realize at scale 1
  int rank = 4;
  int iterations = 4000;
  int batch = 256;
  double lr = 1e-3;
  int log_every = 100;
};

// Trains a low-rank control adapter: base weights stay frozen while the
// adapter fits the denoising objective on the data distribution translated by
// delta * attribute_direction, under the null condition. At scale 1 the
// adapted model generates the shifted distribution; scale interpolates and
// extrapolates the shift. Streams: (seed, kStreamAdapterInit) and
// (seed, kStreamAdapterLoop).
LoraAdapter train_slider(const DenoiserModel& model, const ToyDistribution& dist,
                         const NoiseSchedule& sched, const SliderConfig& cfg,
                         std::uint64_t seed, TrainStats* stats = nullptr);

struct TransferReport {
  std::vector<double> scales;
  // Mean attribute value of n deterministic samples per scale; chains reuse
  // identical per-chain noise streams across every cell and both models.
  std::vector<double> source_means;
  std::vector<double> target_means;
  double source_unadapted_mean = 0.0;
  double target_unadapted_mean = 0.0;
  std::vector<double> source_shifts;  // source_means - source_unadapted_mean
  std::vector<double> target_shifts;
  double source_shift = 0.0;  // shift at scale 1
  double target_shift = 0.0;
  double transfer_ratio = 0.0;  // target_shift / source_shift
  bool ratio_defined = false;   // false when |source_shift| < 1e-9
  int n_per_cell = 0;
};

// Applies one adapter to the model it was trained on (source) and to a second
// model (target) across the given scales, measuring the attribute shift each
// realizes. Shifts are relative to each model's unadapted output on the same
// noise, so scale 0 reports exactly zero.
TransferReport transfer_slider(const LoraAdapter& adapter,
                               const DenoiserModel& source,
                               const StepGrid& source_grid,
                               const DenoiserModel& target,
                               const StepGrid& target_grid,
                               const NoiseSchedule& sched,
                               const ToyDistribution& dist, int n,
                               std::span<const double> scales,
                               std::uint64_t seed, double x0_clip = 0.0);

}  // namespace ddlab
