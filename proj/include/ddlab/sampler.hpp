#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ddlab/denoiser.hpp"
#include "ddlab/numerics.hpp"
#include "ddlab/rng.hpp"
#include "ddlab/schedule.hpp"

namespace ddlab {

// Descending step indices over a schedule, grid[0] == T ... grid.back() == 0.
struct StepGrid {
  std::vector<int> indices;

  // n_steps evenly spaced transitions: indices[i] = round(T (n - i) / n).
  // Throws GridTooShort (n < 1) or NonDivisibleGrid (rounding collides, i.e.
  // n > T).
  static StepGrid uniform(const NoiseSchedule& sched, int n_steps);

  int steps() const { return static_cast<int>(indices.size()) - 1; }
  void validate(const NoiseSchedule& sched) const;  // InvalidStepOrder
};

// Noise prediction as a function of state and normalized time; lets the step
// primitives run against trained models and closed-form references alike.
using DenoiserFn = std::function<Vec2(Vec2 x, double t_frac)>;

// Committed-sample readout: the x_0 the model would land on if the current
// noise estimate were exact, x~0 = (x - sqrt(1 - ab_t) eps) / sqrt(ab_t).
Vec2 dt_estimate(const NoiseSchedule& sched, Vec2 x, Vec2 eps_hat, int t);

// Radial projection onto the ball of the given radius; radius <= 0 disables
// (identity). Near t = T the committed-sample readout divides by
// sqrt(ab_T) ~ 1e-3, so a per-mille noise-prediction error becomes an
// estimate far outside any plausible data support; projecting it back bounds
// the damage a single early evaluation can do to a deterministic chain.
Vec2 clip_to_ball(Vec2 v, double radius);

struct StepResult {
  Vec2 x_next;
  Vec2 eps_hat;
};

// Deterministic update t_from -> t_to: re-noise the committed sample to the
// target level with the same predicted noise. When x0_clip > 0 the committed
// sample is first projected onto that ball (see clip_to_ball); the default 0
// keeps the exact algebraic update. Throws InvalidStepOrder unless
// 0 <= t_to < t_from <= T.
StepResult ddim_step(const DenoiserFn& eval, const NoiseSchedule& sched,
                     Vec2 x, int t_from, int t_to, double x0_clip = 0.0);

// Stochastic update t_from -> t_to. Moves to the reverse-kernel mean
//   (x - (1 - a_eff) / sqrt(1 - ab_from) eps) / sqrt(a_eff),
// a_eff = ab_from / ab_to, then adds sqrt(1 - a_eff) fresh noise (one
// gaussian_pair) except on the final transition to t == 0, which returns the
// mean. This noise scale is the full per-step variance, which maps a standard
// normal population to a standard normal population when the noise estimate
// is the exact posterior mean; the smaller x0-conditioned posterior variance
// (1 - ab_to) (1 - a_eff) / (1 - ab_from) systematically contracts the chain.
// When x0_clip > 0 the same mean is computed through the projected committed
// sample (see clip_to_ball), which bounds it on wide transitions out of the
// zero-signal end of the schedule; the default 0 keeps the formula above
// exactly.
StepResult ancestral_step(const DenoiserFn& eval, const NoiseSchedule& sched,
                          Vec2 x, int t_from, int t_to, RngStream& rng,
                          double x0_clip = 0.0);

// Classifier-free guided prediction eps_null + w (eps_cond - eps_null).
// w == 1 evaluates the conditional branch only, w == 0 the null branch only;
// anything else costs two evaluations. Throws UnconditionalModel when the
// model has no condition table.
Vec2 guided_eval(const DenoiserModel& model, const LoraAdapter* adapter,
                 Vec2 x, double t_frac, int cond, double w);

enum class StepRole { base, distilled };

struct TrajStep {
  int t_from = 0;
  int t_to = 0;
  Vec2 eps_hat;      // prediction at t_from
  Vec2 dt_est;       // committed sample implied by eps_hat
  Vec2 x_after;      // state at t_to
  StepRole role = StepRole::base;
};

struct Trajectory {
  Vec2 x_init;
  Vec2 x0;
  std::vector<TrajStep> steps;
  int eval_count = 0;
};

struct SamplerConfig {
  StepGrid grid;
  bool stochastic = false;
  std::optional<int> cond;
  double guidance = 1.0;  // only meaningful with cond set
  int transition_k = 0;   // hybrid: leading grid intervals handled by the base model
  int base_substeps = 1;  // hybrid: subdivision of each base-handled interval
  // Projection radius for committed-sample estimates (0 = off). Applies to
  // deterministic transitions and to the recorded per-step readouts; the
  // stochastic update never amplifies the prediction this way and is left
  // exactly as defined.
  double x0_clip = 0.0;
};

// Runs one reverse chain on the grid. Initial state = sqrt(1 - ab_T) z with
// one gaussian_pair; deterministic mode then consumes no further randomness.
Trajectory sample(const DenoiserModel& model, const LoraAdapter* adapter,
                  const NoiseSchedule& sched, const SamplerConfig& cfg,
                  RngStream& rng);

// Diversity-preserving hybrid chain on the distilled grid: the first
// transition_k grid intervals are driven by the base model (each split into
// base_substeps sub-transitions), the rest by the distilled model. The base
// phase honors cfg.stochastic (so the base model keeps its own sampling
// procedure); the distilled tail is always deterministic and the handoff
// reuses the running state without re-noising. Guidance applies to
// base-model steps only.
Trajectory hybrid_sample(const DenoiserModel& base_model,
                         const DenoiserModel& distilled_model,
                         const NoiseSchedule& sched, const SamplerConfig& cfg,
                         RngStream& rng);

// Starts at the second grid entry with a fresh standard normal state and runs
// the remaining transitions: one fewer evaluation than the full grid. Throws
// GridTooShort when the grid has fewer than two transitions.
Trajectory skip_first_sample(const DenoiserModel& model,
                             const LoraAdapter* adapter,
                             const NoiseSchedule& sched,
                             const SamplerConfig& cfg, RngStream& rng);

// (t, committed sample) pairs of a trajectory, one per evaluation, with the
// final state appended as (0, x0).
std::vector<std::pair<int, Vec2>> dt_visualize(const Trajectory& traj);

}  // namespace ddlab
