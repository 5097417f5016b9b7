#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddlab/denoiser.hpp"
#include "ddlab/metrics.hpp"
#include "ddlab/sampler.hpp"
#include "ddlab/schedule.hpp"
#include "ddlab/toy_data.hpp"
#include "ddlab/train.hpp"

namespace ddlab {

enum class DistillMethod { progressive, regression };

std::string to_string(DistillMethod m);
DistillMethod distill_method_from_string(const std::string& s);

struct DistillConfig {
  DistillMethod method = DistillMethod::regression;
  int teacher_steps = 32;  // evaluation grid of the teacher
  int target_steps = 4;    // grid of the finished student
  int iters_per_round = 4000;  // progressive: per halving round
  int regression_iters = 8000;
  int pool = 65536;  // regression: precomputed teacher endpoints
  int batch = 256;
  double lr = 3e-4;
  double cond_dropout = 0.1;
  int log_every = 100;
  // Committed-sample projection radius used in teacher rollouts and in the
  // student's unrolled training rollout (0 = off); should match the radius
  // the student will sample with (SamplerConfig::x0_clip).
  double x0_clip = 0.0;
};

struct DistillStats {
  // (round, iteration, batch loss); regression uses round 0.
  std::vector<std::tuple<int, int, double>> loss_log;
  double final_loss = 0.0;
};

// Step-halving distillation. Starting from the teacher on a teacher_steps
// grid, each round trains a student (initialized from the current teacher) to
// hit the teacher's two-step endpoint in one step, expressed as a noise-
// prediction target, then the student becomes the next teacher on half the
// grid. Rounds continue until target_steps is reached; teacher_steps /
// target_steps must be a power of two (NonDivisibleGrid otherwise).
DenoiserModel distill_progressive(const DenoiserModel& teacher,
                                  const NoiseSchedule& sched,
                                  const ToyDistribution& dist,
                                  const DistillConfig& cfg, std::uint64_t seed,
                                  DistillStats* stats = nullptr);

// Endpoint-regression distillation: the student runs its full target_steps
// deterministic rollout from a stored initial state and regresses the final
// point onto the teacher's teacher_steps rollout endpoint for the same
// initial state and condition. Gradients flow through the whole unrolled
// rollout via the input-gradient chain.
DenoiserModel distill_regression(const DenoiserModel& teacher,
                                 const NoiseSchedule& sched,
                                 const DistillConfig& cfg, std::uint64_t seed,
                                 DistillStats* stats = nullptr);

struct DistillEvalReport {
  double endpoint_mse = 0.0;  // student endpoint vs teacher endpoint, shared noise
  DtCurve student_curve;
  DtCurve teacher_curve;
};

// Shared-noise probe: n_probes chains on per-chain streams
// (seed, kStreamProbeChain + i) for both models.
DistillEvalReport eval_distillation(const DenoiserModel& student,
                                    const StepGrid& student_grid,
                                    const DenoiserModel& teacher,
                                    const StepGrid& teacher_grid,
                                    const NoiseSchedule& sched, int n_probes,
                                    std::uint64_t seed, double x0_clip = 0.0);

}  // namespace ddlab
