#include "ddlab/schedule.hpp"

#include <cmath>

#include "ddlab/errors.hpp"

namespace ddlab {

std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::cosine: return "cosine";
  }
  return "?";
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "cosine") return ScheduleKind::cosine;
  throw UnsupportedKind("unknown schedule kind: " + s);
}

double NoiseSchedule::alpha_bar_at(int t) const {
  if (t < 0 || t > T) throw IndexOutOfRange("alpha_bar_at: step out of range");
  return alpha_bar[static_cast<std::size_t>(t)];
}

double NoiseSchedule::alpha_at(int t) const {
  if (t < 1 || t > T) throw IndexOutOfRange("alpha_at: step out of range");
  return alpha[static_cast<std::size_t>(t - 1)];
}

std::string NoiseSchedule::id() const {
  return to_string(kind) + ":T=" + std::to_string(T);
}

NoiseSchedule make_schedule(ScheduleKind kind, int T) {
  if (T < 1) throw IndexOutOfRange("make_schedule: T must be >= 1");
  NoiseSchedule s;
  s.kind = kind;
  s.T = T;
  s.alpha_bar.resize(static_cast<std::size_t>(T) + 1);
  s.alpha.resize(static_cast<std::size_t>(T));

  // f(u) = cos^2((u + s0) / (1 + s0) * pi/2), normalized by f(0).
  const double s0 = 0.008;
  auto f = [&](double u) {
    double c = std::cos((u + s0) / (1.0 + s0) * M_PI * 0.5);
    return c * c;
  };
  double f0 = f(0.0);
  s.alpha_bar[0] = 1.0;
  for (int t = 1; t <= T; ++t) {
    double raw = f(static_cast<double>(t) / static_cast<double>(T)) / f0;
    double prev = s.alpha_bar[static_cast<std::size_t>(t - 1)];
    double a = raw / prev;
    if (a < 0.001) a = 0.001;  // keep the last ratios away from zero
    if (a > 1.0) a = 1.0;
    s.alpha[static_cast<std::size_t>(t - 1)] = a;
    s.alpha_bar[static_cast<std::size_t>(t)] = prev * a;
  }
  return s;
}

NoisePair forward_noise(const NoiseSchedule& sched, Vec2 x0, int t,
                        RngStream& rng) {
  double ab = sched.alpha_bar_at(t);
  Vec2 eps = gaussian_pair(rng);
  Vec2 x_t = x0 * std::sqrt(ab) + eps * std::sqrt(1.0 - ab);
  return {x_t, eps};
}

}  // namespace ddlab
