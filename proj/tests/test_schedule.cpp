#include <cmath>

#include "doctest.h"

#include "ddlab/errors.hpp"
#include "ddlab/rng.hpp"
#include "ddlab/schedule.hpp"

using namespace ddlab;

TEST_CASE("cosine schedule invariants hold across sizes") {
  for (int T : {8, 64, 256}) {
    CAPTURE(T);
    NoiseSchedule s = make_schedule(ScheduleKind::cosine, T);
    REQUIRE(s.T == T);
    REQUIRE(s.alpha_bar.size() == static_cast<std::size_t>(T) + 1);
    REQUIRE(s.alpha.size() == static_cast<std::size_t>(T));

    CHECK(s.alpha_bar[0] == 1.0);  // exact, by construction
    for (int t = 1; t <= T; ++t) {
      CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));  // strictly decreasing
      CHECK(s.alpha_bar_at(t) > 0.0);
      // Per-step ratio clamped to [0.001, 1] and consistent with alpha_bar.
      double a = s.alpha_at(t);
      CHECK(a >= 0.001);
      CHECK(a <= 1.0);
      CHECK(a == doctest::Approx(s.alpha_bar_at(t) / s.alpha_bar_at(t - 1))
                     .epsilon(1e-12));
    }
    // Terminal signal is essentially destroyed.
    CHECK(s.alpha_bar_at(T) < 1e-3);
  }
}

TEST_CASE("cosine schedule matches the squared-cosine closed form mid-range") {
  NoiseSchedule s = make_schedule(ScheduleKind::cosine, 64);
  auto f = [](double t) {
    double v = std::cos((t / 64.0 + 0.008) / 1.008 * M_PI / 2.0);
    return v * v;
  };
  // Away from the clamped tail the normalized closed form must hold exactly.
  for (int t : {1, 8, 16, 32, 48}) {
    CHECK(s.alpha_bar_at(t) == doctest::Approx(f(t) / f(0)).epsilon(1e-12));
  }
}

TEST_CASE("schedule accessors are bounds-checked") {
  NoiseSchedule s = make_schedule(ScheduleKind::cosine, 8);
  CHECK_THROWS_AS(s.alpha_bar_at(-1), IndexOutOfRange);
  CHECK_THROWS_AS(s.alpha_bar_at(9), IndexOutOfRange);
  CHECK_THROWS_AS(s.alpha_at(0), IndexOutOfRange);
  CHECK_THROWS_AS(s.alpha_at(9), IndexOutOfRange);
  CHECK(s.id() == "cosine:T=8");
}

TEST_CASE("forward_noise mixes signal and noise at the stated ratio") {
  NoiseSchedule s = make_schedule(ScheduleKind::cosine, 64);
  RngStream rng(21, 0);
  Vec2 x0{1.5, -2.0};
  for (int t : {1, 16, 32, 64}) {
    std::uint64_t c0 = rng.counter();
    NoisePair np = forward_noise(s, x0, t, rng);
    CHECK(rng.counter() == c0 + 2);  // exactly one gaussian_pair
    double ab = s.alpha_bar_at(t);
    Vec2 expect = x0 * std::sqrt(ab) + np.eps * std::sqrt(1.0 - ab);
    CHECK(np.x_t.x == doctest::Approx(expect.x).epsilon(1e-12));
    CHECK(np.x_t.y == doctest::Approx(expect.y).epsilon(1e-12));
  }
  // t == 0 keeps the point exactly.
  NoisePair clean = forward_noise(s, x0, 0, rng);
  CHECK(clean.x_t.x == x0.x);
  CHECK(clean.x_t.y == x0.y);
}

TEST_CASE("forward marginal at T is standard normal for unit-variance data") {
  // Population check of x_t = sqrt(ab) x0 + sqrt(1-ab) eps with x0 ~ N(0, I):
  // the marginal stays N(0, I) at every t.
  NoiseSchedule s = make_schedule(ScheduleKind::cosine, 64);
  RngStream rng(99, 0);
  const int n = 50000;
  double sxx = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec2 x0 = gaussian_pair(rng);
    NoisePair np = forward_noise(s, x0, 32, rng);
    sxx += np.x_t.norm2();
  }
  CHECK(sxx / (2.0 * n) == doctest::Approx(1.0).epsilon(0.02));
}
