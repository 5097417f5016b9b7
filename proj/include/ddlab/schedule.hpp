#pragma once

#include <string>
#include <vector>

#include "ddlab/numerics.hpp"
#include "ddlab/rng.hpp"

namespace ddlab {

enum class ScheduleKind { cosine };

std::string to_string(ScheduleKind k);
ScheduleKind schedule_kind_from_string(const std::string& s);

// Discrete noise schedule over steps 0..T. alpha_bar[t] is the squared
// signal-keep fraction after t noising steps: x_t = sqrt(alpha_bar[t]) x_0 +
// sqrt(1 - alpha_bar[t]) eps. alpha_bar[0] == 1 exactly and alpha_bar is
// strictly decreasing.
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::cosine;
  int T = 0;
  std::vector<double> alpha_bar;  // size T + 1
  std::vector<double> alpha;      // size T; alpha[t-1] = alpha_bar[t] / alpha_bar[t-1]

  double alpha_bar_at(int t) const;  // bounds-checked
  double alpha_at(int t) const;      // per-step keep ratio for step t (1-based)
  std::string id() const;            // e.g. "cosine:T=64"
};

// Builds the squared-cosine schedule with offset s = 0.008, normalized so that
// alpha_bar[0] == 1, with each per-step ratio alpha_t clamped to >= 0.001.
NoiseSchedule make_schedule(ScheduleKind kind, int T);

struct NoisePair {
  Vec2 x_t;
  Vec2 eps;
};

// Draws eps ~ N(0, I) (one gaussian_pair) and returns the noised point at
// step t together with the noise that produced it.
NoisePair forward_noise(const NoiseSchedule& sched, Vec2 x0, int t,
                        RngStream& rng);

}  // namespace ddlab
