#include "ddlab/distill.hpp"

#include <cmath>
#include <tuple>

#include "ddlab/errors.hpp"
#include "ddlab/parallel.hpp"

namespace ddlab {

std::string to_string(DistillMethod m) {
  return m == DistillMethod::progressive ? "progressive" : "regression";
}

DistillMethod distill_method_from_string(const std::string& s) {
  if (s == "progressive") return DistillMethod::progressive;
  if (s == "regression") return DistillMethod::regression;
  throw UnsupportedKind("unknown distillation method: " + s);
}

namespace {

double cosine_lr(double lr0, double lr1, int it, int iters) {
  if (iters <= 1) return lr0;
  double u = static_cast<double>(it) / static_cast<double>(iters - 1);
  return lr1 + (lr0 - lr1) * 0.5 * (1.0 + std::cos(M_PI * u));
}

// x_next = a x + b eps for a deterministic transition (committed sample left
// unprojected; used where a noise-prediction target is solved for).
struct StepCoef {
  double a, b;
};

StepCoef step_coef(const NoiseSchedule& sched, int t_from, int t_to) {
  double ab_from = sched.alpha_bar_at(t_from);
  double ab_to = sched.alpha_bar_at(t_to);
  double a = std::sqrt(ab_to / ab_from);
  double b = std::sqrt(1.0 - ab_to) - a * std::sqrt(1.0 - ab_from);
  return {a, b};
}

// Scale factors of one deterministic transition, kept separate so the
// committed sample u = (x - sf eps) / sa can be projected before the
// re-noising x_next = ta clip(u) + tf eps.
struct StepScales {
  double sa, sf;  // sqrt(ab_from), sqrt(1 - ab_from)
  double ta, tf;  // sqrt(ab_to),   sqrt(1 - ab_to)
};

StepScales step_scales(const NoiseSchedule& sched, int t_from, int t_to) {
  double ab_from = sched.alpha_bar_at(t_from);
  double ab_to = sched.alpha_bar_at(t_to);
  return {std::sqrt(ab_from), std::sqrt(1.0 - ab_from), std::sqrt(ab_to),
          std::sqrt(1.0 - ab_to)};
}

// Pulls a gradient back through clip_to_ball at input u: identity inside the
// ball, and the projection Jacobian (radius/|u|) (I - u_hat u_hat^T) outside.
Vec2 clip_backward(Vec2 u, double radius, Vec2 g) {
  if (radius <= 0.0) return g;
  double n = u.norm();
  if (n <= radius) return g;
  Vec2 u_hat = u / n;
  return (g - u_hat * u_hat.dot(g)) * (radius / n);
}

DenoiserFn plain_eval(const DenoiserModel& m, std::optional<int> cond,
                      ForwardCache& cache) {
  return [&m, cond, &cache](Vec2 x, double t_frac) {
    return forward_cached(m, nullptr, x, t_frac, cond, cache);
  };
}

void check_teacher_grid(const DistillConfig& cfg, const NoiseSchedule& sched) {
  if (cfg.teacher_steps < cfg.target_steps || cfg.target_steps < 1) {
    throw GridTooShort("distill: teacher_steps must be >= target_steps >= 1");
  }
  int r = cfg.teacher_steps / cfg.target_steps;
  if (cfg.target_steps * r != cfg.teacher_steps || (r & (r - 1)) != 0) {
    throw NonDivisibleGrid("distill: teacher_steps / target_steps must be a power of two");
  }
  if (cfg.teacher_steps > sched.T) {
    throw NonDivisibleGrid("distill: teacher grid finer than the schedule");
  }
}

}  // namespace

DenoiserModel distill_progressive(const DenoiserModel& teacher,
                                  const NoiseSchedule& sched,
                                  const ToyDistribution& dist,
                                  const DistillConfig& cfg, std::uint64_t seed,
                                  DistillStats* stats) {
  check_teacher_grid(cfg, sched);
  RngStream rng(seed, kStreamDistillLoop);
  DenoiserModel current = teacher;
  int round = 0;

  for (int n = cfg.teacher_steps; n > cfg.target_steps; n /= 2, ++round) {
    int n_s = n / 2;
    StepGrid grid_t = StepGrid::uniform(sched, n);
    StepGrid grid_s = StepGrid::uniform(sched, n_s);
    for (int j = 0; j <= n_s; ++j) {
      if (grid_s.indices[static_cast<std::size_t>(j)] !=
          grid_t.indices[static_cast<std::size_t>(2 * j)]) {
        throw NonDivisibleGrid("distill: halved grid does not nest");
      }
    }

    DenoiserModel student = current;
    student.role = ModelRole::distilled;
    AdamState adam = AdamState::sized(student.param_count());

    std::vector<TrainBatchItem> batch(static_cast<std::size_t>(cfg.batch));
    std::vector<int> interval(static_cast<std::size_t>(cfg.batch));
    for (int it = 0; it < cfg.iters_per_round; ++it) {
      // Phase 1 (sequential): every stream draw, in fixed per-item order.
      for (int b = 0; b < cfg.batch; ++b) {
        LabeledSample s = sample_truth(dist, 1, rng)[0];
        int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_s)));
        int t_from = grid_s.indices[static_cast<std::size_t>(j)];
        NoisePair np = forward_noise(sched, s.point, t_from, rng);
        bool drop = rng.uniform01() < cfg.cond_dropout;
        auto& item = batch[static_cast<std::size_t>(b)];
        interval[static_cast<std::size_t>(b)] = j;
        item.x = np.x_t;
        item.t_frac = static_cast<double>(t_from) / static_cast<double>(sched.T);
        item.cond = (current.cfg.n_conditions > 0 && !drop && s.mode_label >= 0)
                        ? std::optional<int>(s.mode_label)
                        : std::nullopt;
      }
      // Phase 2 (parallel, no RNG): teacher two-step endpoints and the noise
      // target that makes one student step land on them.
      parallel_chunks(batch.size(), kGradChunks,
                      [&](int, std::size_t begin, std::size_t end) {
                        ForwardCache cache;
                        cache.prepare(current, nullptr);
                        for (std::size_t bidx = begin; bidx < end; ++bidx) {
                          auto& item = batch[bidx];
                          int j = interval[bidx];
                          int t_from = grid_s.indices[static_cast<std::size_t>(j)];
                          int t_mid = grid_t.indices[static_cast<std::size_t>(2 * j + 1)];
                          int t_to = grid_s.indices[static_cast<std::size_t>(j + 1)];
                          DenoiserFn ev = plain_eval(current, item.cond, cache);
                          Vec2 x1 =
                              ddim_step(ev, sched, item.x, t_from, t_mid, cfg.x0_clip)
                                  .x_next;
                          Vec2 x2 =
                              ddim_step(ev, sched, x1, t_mid, t_to, cfg.x0_clip).x_next;
                          StepCoef c = step_coef(sched, t_from, t_to);
                          // x2 = a x + b eps*  =>  eps* = (x2 - a x) / b; the
                          // inversion uses the unprojected one-step form, valid
                          // whenever the student's own committed sample stays
                          // inside the ball (it tracks the bounded teacher).
                          item.target = (x2 - item.x * c.a) / c.b;
                        }
                      });
      auto [loss, tape] = backward(student, nullptr, batch, Trainable::model_params);
      opt_step(student, tape, adam, cosine_lr(cfg.lr, cfg.lr * 0.1, it, cfg.iters_per_round));
      if (stats && (it % cfg.log_every == 0 || it == cfg.iters_per_round - 1)) {
        stats->loss_log.emplace_back(round, it, loss);
        stats->final_loss = loss;
      }
    }
    current = std::move(student);
  }
  current.role = ModelRole::distilled;
  return current;
}

DenoiserModel distill_regression(const DenoiserModel& teacher,
                                 const NoiseSchedule& sched,
                                 const DistillConfig& cfg, std::uint64_t seed,
                                 DistillStats* stats) {
  check_teacher_grid(cfg, sched);
  if (cfg.pool < cfg.batch) throw EmptyBatch("distill: pool smaller than batch");
  StepGrid grid_t = StepGrid::uniform(sched, cfg.teacher_steps);
  StepGrid grid_s = StepGrid::uniform(sched, cfg.target_steps);

  // Fixed teacher corpus: initial state, condition, teacher endpoint.
  struct PoolItem {
    Vec2 x_init;
    std::optional<int> cond;
    Vec2 y;
  };
  std::vector<PoolItem> pool(static_cast<std::size_t>(cfg.pool));
  {
    RngStream rng(seed, kStreamDistillPool);
    double init_scale = std::sqrt(1.0 - sched.alpha_bar_at(sched.T));
    for (auto& p : pool) {
      p.x_init = gaussian_pair(rng) * init_scale;
      bool null_cond = rng.uniform01() < 0.5;
      if (teacher.cfg.n_conditions > 0 && !null_cond) {
        p.cond = static_cast<int>(
            rng.uniform_int(static_cast<std::uint64_t>(teacher.cfg.n_conditions)));
      }
    }
    parallel_chunks(pool.size(), kGradChunks,
                    [&](int, std::size_t begin, std::size_t end) {
                      ForwardCache cache;
                      cache.prepare(teacher, nullptr);
                      for (std::size_t i = begin; i < end; ++i) {
                        DenoiserFn ev = plain_eval(teacher, pool[i].cond, cache);
                        Vec2 x = pool[i].x_init;
                        for (int j = 0; j < cfg.teacher_steps; ++j) {
                          x = ddim_step(ev, sched, x,
                                        grid_t.indices[static_cast<std::size_t>(j)],
                                        grid_t.indices[static_cast<std::size_t>(j + 1)],
                                        cfg.x0_clip)
                                  .x_next;
                        }
                        pool[i].y = x;
                      }
                    });
  }

  DenoiserModel student = teacher;
  student.role = ModelRole::distilled;
  AdamState adam = AdamState::sized(student.param_count());
  int n_steps = cfg.target_steps;
  std::vector<StepScales> scales(static_cast<std::size_t>(n_steps));
  std::vector<double> t_fracs(static_cast<std::size_t>(n_steps));
  for (int j = 0; j < n_steps; ++j) {
    scales[static_cast<std::size_t>(j)] =
        step_scales(sched, grid_s.indices[static_cast<std::size_t>(j)],
                    grid_s.indices[static_cast<std::size_t>(j + 1)]);
    t_fracs[static_cast<std::size_t>(j)] =
        static_cast<double>(grid_s.indices[static_cast<std::size_t>(j)]) /
        static_cast<double>(sched.T);
  }

  RngStream rng(seed, kStreamDistillLoop);
  std::vector<std::size_t> picks(static_cast<std::size_t>(cfg.batch));
  std::vector<GradientTape> tapes;
  for (int c = 0; c < kGradChunks; ++c) tapes.push_back(GradientTape::like_model(student));
  std::vector<double> losses(kGradChunks, 0.0);

  for (int it = 0; it < cfg.regression_iters; ++it) {
    for (auto& p : picks) p = rng.uniform_int(static_cast<std::uint64_t>(cfg.pool));
    for (auto& t : tapes) t.zero();
    std::fill(losses.begin(), losses.end(), 0.0);

    parallel_chunks(picks.size(), kGradChunks, [&](int c, std::size_t begin,
                                                   std::size_t end) {
      std::vector<ForwardCache> caches(static_cast<std::size_t>(n_steps));
      for (auto& cache : caches) cache.prepare(student, nullptr);
      std::vector<Vec2> eps(static_cast<std::size_t>(n_steps));
      std::vector<Vec2> committed(static_cast<std::size_t>(n_steps));
      GradientTape& tape = tapes[static_cast<std::size_t>(c)];
      double loss = 0.0;
      for (std::size_t bi = begin; bi < end; ++bi) {
        const PoolItem& p = pool[picks[bi]];
        // Unrolled student rollout, one cache per step, matching the
        // inference-time transition (committed sample projected when
        // x0_clip > 0).
        Vec2 x = p.x_init;
        for (int j = 0; j < n_steps; ++j) {
          std::size_t js = static_cast<std::size_t>(j);
          eps[js] = forward_cached(student, nullptr, x, t_fracs[js], p.cond,
                                   caches[js]);
          const StepScales& sc = scales[js];
          committed[js] = (x - eps[js] * sc.sf) / sc.sa;
          x = clip_to_ball(committed[js], cfg.x0_clip) * sc.ta + eps[js] * sc.tf;
        }
        Vec2 err = x - p.y;
        loss += err.norm2();
        // Backward through the chain: dL/dx_{j+1} -> dL/dx_j, routing the
        // committed-sample branch through the projection Jacobian.
        Vec2 g = err * 2.0;
        for (int j = n_steps - 1; j >= 0; --j) {
          std::size_t js = static_cast<std::size_t>(j);
          const StepScales& sc = scales[js];
          Vec2 du = clip_backward(committed[js], cfg.x0_clip, g * sc.ta);
          Vec2 d_eps = g * sc.tf - du * (sc.sf / sc.sa);
          Vec2 dx_eval = backward_cached(student, nullptr, caches[js], d_eps,
                                         Trainable::model_params, tape);
          g = du / sc.sa + dx_eval;
        }
      }
      losses[static_cast<std::size_t>(c)] = loss;
    });

    GradientTape total = GradientTape::like_model(student);
    double loss = 0.0;
    for (int c = 0; c < kGradChunks; ++c) {
      total.add(tapes[static_cast<std::size_t>(c)]);
      loss += losses[static_cast<std::size_t>(c)];
    }
    double inv = 1.0 / static_cast<double>(cfg.batch);
    total.scale(inv);
    loss *= inv;
    opt_step(student, total, adam,
             cosine_lr(cfg.lr, cfg.lr * 0.1, it, cfg.regression_iters));
    if (stats && (it % cfg.log_every == 0 || it == cfg.regression_iters - 1)) {
      stats->loss_log.emplace_back(0, it, loss);
      stats->final_loss = loss;
    }
  }
  return student;
}

DistillEvalReport eval_distillation(const DenoiserModel& student,
                                    const StepGrid& student_grid,
                                    const DenoiserModel& teacher,
                                    const StepGrid& teacher_grid,
                                    const NoiseSchedule& sched, int n_probes,
                                    std::uint64_t seed, double x0_clip) {
  if (n_probes < 2) throw TooFewPoints("eval_distillation: need >= 2 probes");
  std::vector<Trajectory> st(static_cast<std::size_t>(n_probes));
  std::vector<Trajectory> tt(static_cast<std::size_t>(n_probes));
  parallel_chunks(static_cast<std::size_t>(n_probes), kGradChunks,
                  [&](int, std::size_t begin, std::size_t end) {
                    for (std::size_t i = begin; i < end; ++i) {
                      SamplerConfig scfg;
                      scfg.grid = student_grid;
                      scfg.x0_clip = x0_clip;
                      RngStream r1(seed, kStreamProbeChain + i);
                      st[i] = sample(student, nullptr, sched, scfg, r1);
                      SamplerConfig tcfg;
                      tcfg.grid = teacher_grid;
                      tcfg.x0_clip = x0_clip;
                      RngStream r2(seed, kStreamProbeChain + i);
                      tt[i] = sample(teacher, nullptr, sched, tcfg, r2);
                    }
                  });
  DistillEvalReport rep;
  double acc = 0.0;
  for (int i = 0; i < n_probes; ++i) {
    acc += (st[static_cast<std::size_t>(i)].x0 - tt[static_cast<std::size_t>(i)].x0).norm2();
  }
  rep.endpoint_mse = acc / static_cast<double>(n_probes);
  rep.student_curve = dt_curve(st, sched);
  rep.teacher_curve = dt_curve(tt, sched);
  return rep;
}

}  // namespace ddlab
