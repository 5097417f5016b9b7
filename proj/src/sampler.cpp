#include "ddlab/sampler.hpp"

#include <cmath>

#include "ddlab/errors.hpp"

namespace ddlab {

StepGrid StepGrid::uniform(const NoiseSchedule& sched, int n_steps) {
  if (n_steps < 1) throw GridTooShort("uniform grid: need at least one step");
  StepGrid g;
  g.indices.resize(static_cast<std::size_t>(n_steps) + 1);
  for (int i = 0; i <= n_steps; ++i) {
    double v = static_cast<double>(sched.T) *
               static_cast<double>(n_steps - i) / static_cast<double>(n_steps);
    g.indices[static_cast<std::size_t>(i)] = static_cast<int>(std::lround(v));
  }
  for (int i = 1; i <= n_steps; ++i) {
    if (g.indices[static_cast<std::size_t>(i)] >=
        g.indices[static_cast<std::size_t>(i - 1)]) {
      throw NonDivisibleGrid("uniform grid: steps collide; reduce n_steps");
    }
  }
  return g;
}

void StepGrid::validate(const NoiseSchedule& sched) const {
  if (indices.size() < 2) throw GridTooShort("grid: need at least one transition");
  if (indices.front() != sched.T || indices.back() != 0) {
    throw InvalidStepOrder("grid: must run from T down to 0");
  }
  for (std::size_t i = 1; i < indices.size(); ++i) {
    if (indices[i] >= indices[i - 1] || indices[i] < 0) {
      throw InvalidStepOrder("grid: indices must be strictly decreasing");
    }
  }
}

Vec2 dt_estimate(const NoiseSchedule& sched, Vec2 x, Vec2 eps_hat, int t) {
  double ab = sched.alpha_bar_at(t);
  return (x - eps_hat * std::sqrt(1.0 - ab)) / std::sqrt(ab);
}

Vec2 clip_to_ball(Vec2 v, double radius) {
  if (radius <= 0.0) return v;
  double n = std::sqrt(v.norm2());
  if (n <= radius) return v;
  return v * (radius / n);
}

namespace {

void check_step_order(const NoiseSchedule& sched, int t_from, int t_to) {
  if (t_to < 0 || t_from > sched.T || t_to >= t_from) {
    throw InvalidStepOrder("step: need 0 <= t_to < t_from <= T");
  }
}

}  // namespace

StepResult ddim_step(const DenoiserFn& eval, const NoiseSchedule& sched,
                     Vec2 x, int t_from, int t_to, double x0_clip) {
  check_step_order(sched, t_from, t_to);
  double ab_from = sched.alpha_bar_at(t_from);
  double ab_to = sched.alpha_bar_at(t_to);
  Vec2 eps = eval(x, static_cast<double>(t_from) / static_cast<double>(sched.T));
  Vec2 x0 = (x - eps * std::sqrt(1.0 - ab_from)) / std::sqrt(ab_from);
  x0 = clip_to_ball(x0, x0_clip);
  Vec2 x_next = x0 * std::sqrt(ab_to) + eps * std::sqrt(1.0 - ab_to);
  return {x_next, eps};
}

StepResult ancestral_step(const DenoiserFn& eval, const NoiseSchedule& sched,
                          Vec2 x, int t_from, int t_to, RngStream& rng,
                          double x0_clip) {
  check_step_order(sched, t_from, t_to);
  double ab_from = sched.alpha_bar_at(t_from);
  double ab_to = sched.alpha_bar_at(t_to);
  double a_eff = ab_from / ab_to;
  Vec2 eps = eval(x, static_cast<double>(t_from) / static_cast<double>(sched.T));
  Vec2 mean;
  if (x0_clip > 0.0) {
    // Same reverse-kernel mean written through the committed sample,
    //   mean = sqrt(ab_to) (1 - a_eff) / (1 - ab_from) x0
    //        + sqrt(a_eff) (1 - ab_to) / (1 - ab_from) x,
    // so the projection can bound the x0 term; identical to the direct form
    // whenever the committed sample is inside the ball.
    Vec2 x0 = (x - eps * std::sqrt(1.0 - ab_from)) / std::sqrt(ab_from);
    x0 = clip_to_ball(x0, x0_clip);
    mean = x0 * (std::sqrt(ab_to) * (1.0 - a_eff) / (1.0 - ab_from)) +
           x * (std::sqrt(a_eff) * (1.0 - ab_to) / (1.0 - ab_from));
  } else {
    mean = (x - eps * ((1.0 - a_eff) / std::sqrt(1.0 - ab_from))) /
           std::sqrt(a_eff);
  }
  if (t_to == 0) return {mean, eps};
  Vec2 z = gaussian_pair(rng);
  return {mean + z * std::sqrt(1.0 - a_eff), eps};
}

Vec2 guided_eval(const DenoiserModel& model, const LoraAdapter* adapter,
                 Vec2 x, double t_frac, int cond, double w) {
  if (model.cfg.n_conditions == 0) {
    throw UnconditionalModel("guided_eval: model has no condition table");
  }
  if (w == 1.0) return forward(model, adapter, x, t_frac, cond);
  if (w == 0.0) return forward(model, adapter, x, t_frac, std::nullopt);
  Vec2 e_null = forward(model, adapter, x, t_frac, std::nullopt);
  Vec2 e_cond = forward(model, adapter, x, t_frac, cond);
  return e_null + (e_cond - e_null) * w;
}

namespace {

// Wraps a model as a DenoiserFn that applies guidance when a condition is
// set, incrementing *count by the number of underlying evaluations per call.
DenoiserFn make_eval(const DenoiserModel& model, const LoraAdapter* adapter,
                     std::optional<int> cond, double w, int* count,
                     ForwardCache* cache) {
  if (!cond) {
    return [&model, adapter, count, cache](Vec2 x, double t_frac) {
      ++*count;
      return forward_cached(model, adapter, x, t_frac, std::nullopt, *cache);
    };
  }
  int c = *cond;
  if (w == 1.0) {
    return [&model, adapter, c, count, cache](Vec2 x, double t_frac) {
      ++*count;
      return forward_cached(model, adapter, x, t_frac, c, *cache);
    };
  }
  if (w == 0.0) {
    if (model.cfg.n_conditions == 0) {
      throw UnconditionalModel("sample: guidance on an unconditional model");
    }
    return [&model, adapter, count, cache](Vec2 x, double t_frac) {
      ++*count;
      return forward_cached(model, adapter, x, t_frac, std::nullopt, *cache);
    };
  }
  if (model.cfg.n_conditions == 0) {
    throw UnconditionalModel("sample: guidance on an unconditional model");
  }
  return [&model, adapter, c, w, count, cache](Vec2 x, double t_frac) {
    *count += 2;
    Vec2 e_null = forward_cached(model, adapter, x, t_frac, std::nullopt, *cache);
    Vec2 e_cond = forward_cached(model, adapter, x, t_frac, c, *cache);
    return e_null + (e_cond - e_null) * w;
  };
}

// Runs the transitions of `indices`, continuing from the trajectory's last
// recorded state (or its initial state when no steps exist yet). A positive
// x0_clip bounds the committed-sample estimate both inside the deterministic
// update and in the recorded readout; the stochastic update itself is
// untouched.
void run_transitions(Trajectory& traj, const DenoiserFn& eval,
                     const NoiseSchedule& sched,
                     const std::vector<int>& indices, bool stochastic,
                     double x0_clip, StepRole role, RngStream& rng) {
  Vec2 x = traj.steps.empty() ? traj.x_init : traj.steps.back().x_after;
  for (std::size_t i = 0; i + 1 < indices.size(); ++i) {
    int t_from = indices[i], t_to = indices[i + 1];
    StepResult r = stochastic
                       ? ancestral_step(eval, sched, x, t_from, t_to, rng, x0_clip)
                       : ddim_step(eval, sched, x, t_from, t_to, x0_clip);
    traj.steps.push_back({t_from, t_to, r.eps_hat,
                          clip_to_ball(dt_estimate(sched, x, r.eps_hat, t_from),
                                       x0_clip),
                          r.x_next, role});
    x = r.x_next;
  }
  traj.x0 = x;
}

Vec2 draw_init(const NoiseSchedule& sched, RngStream& rng) {
  return gaussian_pair(rng) * std::sqrt(1.0 - sched.alpha_bar_at(sched.T));
}

}  // namespace

Trajectory sample(const DenoiserModel& model, const LoraAdapter* adapter,
                  const NoiseSchedule& sched, const SamplerConfig& cfg,
                  RngStream& rng) {
  cfg.grid.validate(sched);
  Trajectory traj;
  traj.x_init = draw_init(sched, rng);
  ForwardCache cache;
  cache.prepare(model, adapter);
  DenoiserFn eval =
      make_eval(model, adapter, cfg.cond, cfg.guidance, &traj.eval_count, &cache);
  StepRole role = model.role == ModelRole::base ? StepRole::base : StepRole::distilled;
  run_transitions(traj, eval, sched, cfg.grid.indices, cfg.stochastic,
                  cfg.x0_clip, role, rng);
  return traj;
}

Trajectory hybrid_sample(const DenoiserModel& base_model,
                         const DenoiserModel& distilled_model,
                         const NoiseSchedule& sched, const SamplerConfig& cfg,
                         RngStream& rng) {
  cfg.grid.validate(sched);
  int n = cfg.grid.steps();
  int k = cfg.transition_k;
  int m = cfg.base_substeps;
  if (k < 0 || k > n) {
    throw IndexOutOfRange("hybrid: transition_k outside [0, grid steps]");
  }
  if (m < 1) throw NonDivisibleGrid("hybrid: base_substeps must be >= 1");

  // Expand the first k grid intervals into m sub-transitions each.
  std::vector<int> base_part;
  base_part.push_back(cfg.grid.indices[0]);
  for (int j = 0; j < k; ++j) {
    int lo = cfg.grid.indices[static_cast<std::size_t>(j + 1)];
    int hi = cfg.grid.indices[static_cast<std::size_t>(j)];
    for (int a = 1; a <= m; ++a) {
      double v = static_cast<double>(hi) +
                 (static_cast<double>(lo) - static_cast<double>(hi)) *
                     static_cast<double>(a) / static_cast<double>(m);
      int idx = static_cast<int>(std::lround(v));
      if (idx >= base_part.back()) {
        throw NonDivisibleGrid("hybrid: base_substeps collide on this grid");
      }
      base_part.push_back(idx);
    }
  }

  Trajectory traj;
  traj.x_init = draw_init(sched, rng);

  if (k > 0) {
    ForwardCache base_cache;
    base_cache.prepare(base_model, nullptr);
    DenoiserFn base_eval = make_eval(base_model, nullptr, cfg.cond,
                                     cfg.guidance, &traj.eval_count, &base_cache);
    run_transitions(traj, base_eval, sched, base_part, cfg.stochastic,
                    cfg.x0_clip, StepRole::base, rng);
  }
  if (k < n) {
    ForwardCache dist_cache;
    dist_cache.prepare(distilled_model, nullptr);
    DenoiserFn dist_eval = make_eval(distilled_model, nullptr, cfg.cond, 1.0,
                                     &traj.eval_count, &dist_cache);
    // Remaining grid tail; the handoff keeps the running state without
    // re-noising.
    std::vector<int> tail(cfg.grid.indices.begin() + k, cfg.grid.indices.end());
    run_transitions(traj, dist_eval, sched, tail, false, cfg.x0_clip,
                    StepRole::distilled, rng);
  }
  return traj;
}

Trajectory skip_first_sample(const DenoiserModel& model,
                             const LoraAdapter* adapter,
                             const NoiseSchedule& sched,
                             const SamplerConfig& cfg, RngStream& rng) {
  cfg.grid.validate(sched);
  if (cfg.grid.steps() < 2) {
    throw GridTooShort("skip-first: grid needs at least two transitions");
  }
  Trajectory traj;
  // Fresh standard normal dropped in at the second grid entry.
  traj.x_init = gaussian_pair(rng);
  ForwardCache cache;
  cache.prepare(model, adapter);
  DenoiserFn eval =
      make_eval(model, adapter, cfg.cond, cfg.guidance, &traj.eval_count, &cache);
  StepRole role = model.role == ModelRole::base ? StepRole::base : StepRole::distilled;
  std::vector<int> tail(cfg.grid.indices.begin() + 1, cfg.grid.indices.end());
  run_transitions(traj, eval, sched, tail, cfg.stochastic, cfg.x0_clip, role,
                  rng);
  return traj;
}

std::vector<std::pair<int, Vec2>> dt_visualize(const Trajectory& traj) {
  std::vector<std::pair<int, Vec2>> out;
  out.reserve(traj.steps.size() + 1);
  for (const TrajStep& s : traj.steps) out.emplace_back(s.t_from, s.dt_est);
  out.emplace_back(0, traj.x0);
  return out;
}

}  // namespace ddlab
