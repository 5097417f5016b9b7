#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ddlab/denoiser.hpp"
#include "ddlab/schedule.hpp"
#include "ddlab/toy_data.hpp"

namespace ddlab {

// Fixed stream ids, all derived from the one run seed. Every consumer owns a
// disjoint id range, so adding draws to one phase never shifts another.
// Recorded in each run manifest.
inline constexpr std::uint64_t kStreamModelInit = 1000;
inline constexpr std::uint64_t kStreamTrainLoop = 1001;
inline constexpr std::uint64_t kStreamDistillLoop = 1002;
inline constexpr std::uint64_t kStreamAdapterInit = 1003;
inline constexpr std::uint64_t kStreamAdapterLoop = 1004;
inline constexpr std::uint64_t kStreamDistillPool = 1005;
inline constexpr std::uint64_t kStreamTruthData = 2000;
// Per-chain streams: id = offset + chain index. Evaluation arms share
// kStreamEvalChain so every arm consumes identical initial noise.
inline constexpr std::uint64_t kStreamEvalChain = 100000;
inline constexpr std::uint64_t kStreamDtChain = 200000;
inline constexpr std::uint64_t kStreamTransferChain = 300000;
inline constexpr std::uint64_t kStreamProbeChain = 400000;

struct TrainConfig {
  int iterations = 10000;
  int batch = 256;
  double lr = 1e-3;
  double lr_final = 1e-4;  // cosine decay endpoint
  double cond_dropout = 0.1;
  int log_every = 100;
};

struct TrainStats {
  std::vector<std::pair<int, double>> loss_log;  // (iteration, batch loss)
  double first_logged_loss = 0.0;
  double final_loss = 0.0;
};

// Cosine learning-rate decay from lr to lr_final across the run.
double lr_at(const TrainConfig& cfg, int iteration);

// Streams used: (seed, kStreamModelInit) for weights, (seed, kStreamTrainLoop)
// for data/time/noise/condition-dropout draws, consumed in that order per
// batch item.
DenoiserModel train_base(const ToyDistribution& dist, const NoiseSchedule& sched,
                         const DenoiserConfig& dcfg, const TrainConfig& tcfg,
                         std::uint64_t seed, TrainStats* stats = nullptr);

}  // namespace ddlab
