#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "doctest.h"

#include "ddlab/denoiser.hpp"
#include "ddlab/errors.hpp"
#include "ddlab/rng.hpp"

using namespace ddlab;

namespace {

DenoiserConfig small_cfg() {
  DenoiserConfig cfg;
  cfg.hidden = {8, 6};
  cfg.time_embed_dim = 8;
  cfg.cond_embed_dim = 4;
  cfg.n_conditions = 3;
  return cfg;
}

std::vector<TrainBatchItem> small_batch() {
  RngStream rng(55, 0);
  std::vector<TrainBatchItem> batch;
  std::optional<int> conds[] = {std::nullopt, 0, 1, 2, std::nullopt};
  for (int i = 0; i < 5; ++i) {
    TrainBatchItem it;
    it.x = gaussian_pair(rng);
    it.t_frac = 0.1 + 0.2 * i;
    it.cond = conds[i];
    it.target = gaussian_pair(rng);
    batch.push_back(it);
  }
  return batch;
}

double loss_of(const DenoiserModel& m, const LoraAdapter* a,
               const std::vector<TrainBatchItem>& batch) {
  double loss = 0.0;
  for (const TrainBatchItem& it : batch) {
    Vec2 e = forward(m, a, it.x, it.t_frac, it.cond) - it.target;
    loss += e.norm2();
  }
  return loss / static_cast<double>(batch.size());
}

// Central finite difference on one parameter slot.
double fd_slot(double* slot, double h,
               const std::function<double()>& eval) {
  double keep = *slot;
  *slot = keep + h;
  double up = eval();
  *slot = keep - h;
  double dn = eval();
  *slot = keep;
  return (up - dn) / (2.0 * h);
}

void check_grad(double analytic, double fd) {
  double err = std::abs(analytic - fd);
  double scale = std::max(std::abs(analytic), std::abs(fd));
  CHECK(err <= 1e-4 * scale + 1e-8);
}

// Gives the adapter a nonzero up factor so its output path actually matters.
LoraAdapter active_adapter(const DenoiserModel& m, std::uint64_t seed) {
  RngStream rng(seed, 0);
  LoraAdapter a = LoraAdapter::init(m, 4, rng);
  for (auto& u : a.up) {
    for (double& v : u) v = gaussian_pair(rng).x * 0.1;
  }
  return a;
}

}  // namespace

TEST_CASE("time_embedding spans sin/cos of geometric frequencies") {
  std::vector<double> out(8);
  double t = 0.37;
  time_embedding(t, out);
  CHECK(out[0] == doctest::Approx(std::sin(t)).epsilon(1e-12));
  CHECK(out[1] == doctest::Approx(std::cos(t)).epsilon(1e-12));
  CHECK(out[6] == doctest::Approx(std::sin(1000.0 * t)).epsilon(1e-12));
  CHECK(out[7] == doctest::Approx(std::cos(1000.0 * t)).epsilon(1e-12));
  for (double v : out) {
    CHECK(v >= -1.0);
    CHECK(v <= 1.0);
  }
  std::vector<double> odd(7);
  CHECK_THROWS_AS(time_embedding(t, odd), ShapeMismatch);
}

TEST_CASE("model init: shapes, zero biases, null condition row") {
  DenoiserConfig cfg = small_cfg();
  RngStream rng(7, 0);
  DenoiserModel m = DenoiserModel::init(cfg, ModelRole::base, rng);
  REQUIRE(m.weights.size() == 3);
  CHECK(m.layer_in(0) == 2 + 8 + 4);
  CHECK(m.layer_out(0) == 8);
  CHECK(m.layer_in(2) == 6);
  CHECK(m.layer_out(2) == 2);
  for (const auto& b : m.biases) {
    for (double v : b) CHECK(v == 0.0);
  }
  // n_conditions + 1 rows: the extra row is the learned null embedding.
  CHECK(m.cond_table.size() == 4u * 4u);
  std::size_t expected = (14 * 8 + 8) + (8 * 6 + 6) + (6 * 2 + 2) + 16;
  CHECK(m.param_count() == expected);
}

TEST_CASE("forward: condition handling and determinism") {
  RngStream rng(7, 0);
  DenoiserModel m = DenoiserModel::init(small_cfg(), ModelRole::base, rng);

  Vec2 a = forward(m, nullptr, {0.3, -0.2}, 0.5, 1);
  Vec2 b = forward(m, nullptr, {0.3, -0.2}, 0.5, 1);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);

  // Different condition rows change the output.
  Vec2 c = forward(m, nullptr, {0.3, -0.2}, 0.5, 2);
  CHECK((a - c).norm() > 0.0);
  // The null row is its own learned embedding, distinct from real ids.
  Vec2 n = forward(m, nullptr, {0.3, -0.2}, 0.5, std::nullopt);
  CHECK((a - n).norm() > 0.0);

  CHECK_THROWS_AS(forward(m, nullptr, {0, 0}, 0.5, 3), ConditionOutOfRange);
  CHECK_THROWS_AS(forward(m, nullptr, {0, 0}, 0.5, -1), ConditionOutOfRange);

  DenoiserConfig uc = small_cfg();
  uc.n_conditions = 0;
  RngStream rng2(7, 0);
  DenoiserModel um = DenoiserModel::init(uc, ModelRole::base, rng2);
  CHECK_THROWS_AS(forward(um, nullptr, {0, 0}, 0.5, 0), ConditionOutOfRange);
  CHECK_NOTHROW(forward(um, nullptr, {0, 0}, 0.5, std::nullopt));
}

TEST_CASE("backward matches finite differences on every model block") {
  RngStream rng(7, 0);
  DenoiserModel m = DenoiserModel::init(small_cfg(), ModelRole::base, rng);
  auto batch = small_batch();

  auto [loss, tape] = backward(m, nullptr, batch, Trainable::model_params);
  CHECK(loss == doctest::Approx(loss_of(m, nullptr, batch)).epsilon(1e-12));

  const double h = 1e-5;
  auto eval = [&] { return loss_of(m, nullptr, batch); };

  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    std::size_t stride = std::max<std::size_t>(1, m.weights[l].size() / 7);
    for (std::size_t i = 0; i < m.weights[l].size(); i += stride) {
      CAPTURE(l);
      CAPTURE(i);
      check_grad(tape.d_weights[l][i], fd_slot(&m.weights[l][i], h, eval));
    }
    for (std::size_t i = 0; i < m.biases[l].size(); i += 2) {
      check_grad(tape.d_biases[l][i], fd_slot(&m.biases[l][i], h, eval));
    }
  }
  // Condition table: rows 0..2 and the null row all appear in the batch.
  for (std::size_t i = 0; i < m.cond_table.size(); i += 3) {
    check_grad(tape.d_cond_table[i], fd_slot(&m.cond_table[i], h, eval));
  }
}

TEST_CASE("backward matches finite differences on adapter blocks") {
  RngStream rng(7, 0);
  DenoiserModel m = DenoiserModel::init(small_cfg(), ModelRole::base, rng);
  LoraAdapter a = active_adapter(m, 31);
  a.scale = 0.8;
  auto batch = small_batch();

  auto [loss, tape] = backward(m, &a, batch, Trainable::adapter_params);
  CHECK(loss == doctest::Approx(loss_of(m, &a, batch)).epsilon(1e-12));

  const double h = 1e-5;
  auto eval = [&] { return loss_of(m, &a, batch); };

  for (std::size_t t = 0; t < a.down.size(); ++t) {
    std::size_t stride = std::max<std::size_t>(1, a.down[t].size() / 7);
    for (std::size_t i = 0; i < a.down[t].size(); i += stride) {
      CAPTURE(t);
      CAPTURE(i);
      check_grad(tape.d_down[t][i], fd_slot(&a.down[t][i], h, eval));
    }
    for (std::size_t i = 0; i < a.up[t].size(); i += 3) {
      check_grad(tape.d_up[t][i], fd_slot(&a.up[t][i], h, eval));
    }
  }

  // Frozen-model exclusivity: adapter training must leave model grads at zero.
  for (const auto& w : tape.d_weights) {
    for (double v : w) CHECK(v == 0.0);
  }
  for (double v : tape.d_cond_table) CHECK(v == 0.0);
}

TEST_CASE("model gradients see through an attached adapter") {
  // Training model params with an adapter present differentiates the adapted
  // function, not the bare one.
  RngStream rng(7, 0);
  DenoiserModel m = DenoiserModel::init(small_cfg(), ModelRole::base, rng);
  LoraAdapter a = active_adapter(m, 32);
  auto batch = small_batch();

  auto [loss, tape] = backward(m, &a, batch, Trainable::model_params);
  CHECK(loss == doctest::Approx(loss_of(m, &a, batch)).epsilon(1e-12));
  const double h = 1e-5;
  auto eval = [&] { return loss_of(m, &a, batch); };
  std::size_t stride = std::max<std::size_t>(1, m.weights[0].size() / 5);
  for (std::size_t i = 0; i < m.weights[0].size(); i += stride) {
    check_grad(tape.d_weights[0][i], fd_slot(&m.weights[0][i], h, eval));
  }
}

TEST_CASE("input gradient matches finite differences and is set-independent") {
  RngStream rng(7, 0);
  DenoiserModel m = DenoiserModel::init(small_cfg(), ModelRole::base, rng);
  LoraAdapter a = active_adapter(m, 33);
  Vec2 x{0.4, -0.7};
  Vec2 target{0.1, 0.2};
  double t_frac = 0.55;

  ForwardCache cache;
  cache.prepare(m, &a);
  Vec2 out = forward_cached(m, &a, x, t_frac, 1, cache);
  Vec2 dout = (out - target) * 2.0;

  GradientTape tm = GradientTape::like_model(m);
  Vec2 gx_model = backward_cached(m, &a, cache, dout, Trainable::model_params, tm);
  GradientTape ta = GradientTape::like_adapter(m, a);
  Vec2 gx_adapter =
      backward_cached(m, &a, cache, dout, Trainable::adapter_params, ta);

  // dL/dx is a property of the function, not of which params are trainable.
  CHECK(gx_model.x == gx_adapter.x);
  CHECK(gx_model.y == gx_adapter.y);

  auto point_loss = [&](Vec2 p) {
    Vec2 e = forward(m, &a, p, t_frac, 1) - target;
    return e.norm2();
  };
  const double h = 1e-5;
  double fdx = (point_loss({x.x + h, x.y}) - point_loss({x.x - h, x.y})) / (2 * h);
  double fdy = (point_loss({x.x, x.y + h}) - point_loss({x.x, x.y - h})) / (2 * h);
  check_grad(gx_model.x, fdx);
  check_grad(gx_model.y, fdy);
}

TEST_CASE("fresh adapter and scale zero are bitwise neutral") {
  RngStream rng(7, 0);
  DenoiserModel m = DenoiserModel::init(small_cfg(), ModelRole::base, rng);
  RngStream arng(8, 0);
  LoraAdapter fresh = LoraAdapter::init(m, 4, arng);

  Vec2 bare = forward(m, nullptr, {0.3, 0.9}, 0.25, 0);
  Vec2 with_fresh = forward(m, &fresh, {0.3, 0.9}, 0.25, 0);
  CHECK(bare.x == with_fresh.x);  // up == 0 never perturbs the sum
  CHECK(bare.y == with_fresh.y);

  LoraAdapter trained = active_adapter(m, 34);
  LoraAdapter off = trained.at_scale(0.0);
  Vec2 with_off = forward(m, &off, {0.3, 0.9}, 0.25, 0);
  CHECK(bare.x == with_off.x);  // scale 0 skips the adapter path entirely
  CHECK(bare.y == with_off.y);

  DenoiserModel merged0 = merge_adapter(m, trained, 0.0);
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    for (std::size_t i = 0; i < m.weights[l].size(); ++i) {
      CHECK(merged0.weights[l][i] == m.weights[l][i]);
    }
  }
}

TEST_CASE("merging an adapter reproduces the live adapter forward pass") {
  RngStream rng(7, 0);
  DenoiserModel m = DenoiserModel::init(small_cfg(), ModelRole::base, rng);
  LoraAdapter a = active_adapter(m, 35);
  double scale = 0.7;
  DenoiserModel merged = merge_adapter(m, a, scale);
  LoraAdapter live = a.at_scale(scale);

  RngStream prng(9, 0);
  for (int i = 0; i < 20; ++i) {
    Vec2 x = gaussian_pair(prng);
    double t = 0.05 * (i + 1);
    Vec2 via_merge = forward(merged, nullptr, x, t, i % 3);
    Vec2 via_live = forward(m, &live, x, t, i % 3);
    CHECK(via_merge.x == doctest::Approx(via_live.x).epsilon(1e-12));
    CHECK(via_merge.y == doctest::Approx(via_live.y).epsilon(1e-12));
  }
}

TEST_CASE("adam: zero gradient is a no-op, unit gradient moves by ~lr") {
  RngStream rng(7, 0);
  DenoiserModel m = DenoiserModel::init(small_cfg(), ModelRole::base, rng);
  DenoiserModel before = m;
  AdamState st = AdamState::sized(m.param_count());

  GradientTape zero = GradientTape::like_model(m);
  opt_step(m, zero, st, 1e-3);
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    for (std::size_t i = 0; i < m.weights[l].size(); ++i) {
      CHECK(m.weights[l][i] == before.weights[l][i]);
    }
  }

  // A single nonzero gradient entry: after one bias-corrected step the
  // parameter moves by lr * 1 / (1 + eps), everything else stays put.
  GradientTape g = GradientTape::like_model(m);
  g.d_weights[1][3] = 1.0;
  AdamState st2 = AdamState::sized(m.param_count());
  double w0 = m.weights[1][3];
  opt_step(m, g, st2, 1e-3);
  CHECK(w0 - m.weights[1][3] == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(m.weights[1][2] == before.weights[1][2]);
  CHECK(m.biases[1][3] == before.biases[1][3]);
}

TEST_CASE("batched backward is deterministic and matches a serial reference") {
  RngStream rng(7, 0);
  DenoiserModel m = DenoiserModel::init(small_cfg(), ModelRole::base, rng);
  // A batch large enough to occupy every worker chunk.
  RngStream brng(66, 0);
  std::vector<TrainBatchItem> batch;
  for (int i = 0; i < 97; ++i) {
    TrainBatchItem it;
    it.x = gaussian_pair(brng);
    it.t_frac = (i % 10 + 1) / 10.0;
    it.cond = i % 4 == 0 ? std::nullopt : std::optional<int>(i % 3);
    it.target = gaussian_pair(brng);
    batch.push_back(it);
  }

  auto [loss1, tape1] = backward(m, nullptr, batch, Trainable::model_params);
  auto [loss2, tape2] = backward(m, nullptr, batch, Trainable::model_params);
  CHECK(loss1 == loss2);
  for (std::size_t l = 0; l < tape1.d_weights.size(); ++l) {
    for (std::size_t i = 0; i < tape1.d_weights[l].size(); ++i) {
      CHECK(tape1.d_weights[l][i] == tape2.d_weights[l][i]);
    }
  }

  // Serial single-cache accumulation agrees to rounding.
  ForwardCache cache;
  cache.prepare(m, nullptr);
  GradientTape ref = GradientTape::like_model(m);
  double ref_loss = 0.0;
  for (const TrainBatchItem& it : batch) {
    Vec2 out = forward_cached(m, nullptr, it.x, it.t_frac, it.cond, cache);
    Vec2 e = out - it.target;
    ref_loss += e.norm2();
    backward_cached(m, nullptr, cache, e * 2.0, Trainable::model_params, ref);
  }
  ref_loss /= static_cast<double>(batch.size());
  ref.scale(1.0 / static_cast<double>(batch.size()));
  CHECK(loss1 == doctest::Approx(ref_loss).epsilon(1e-12));
  for (std::size_t l = 0; l < ref.d_weights.size(); ++l) {
    for (std::size_t i = 0; i < ref.d_weights[l].size(); ++i) {
      CHECK(tape1.d_weights[l][i] ==
            doctest::Approx(ref.d_weights[l][i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("backward rejects empty batches and missing adapters") {
  RngStream rng(7, 0);
  DenoiserModel m = DenoiserModel::init(small_cfg(), ModelRole::base, rng);
  std::vector<TrainBatchItem> empty;
  CHECK_THROWS_AS(backward(m, nullptr, empty, Trainable::model_params), EmptyBatch);
  auto batch = small_batch();
  CHECK_THROWS_AS(backward(m, nullptr, batch, Trainable::adapter_params),
                  ShapeMismatch);
}
