#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ddlab/numerics.hpp"
#include "ddlab/rng.hpp"

namespace ddlab {

enum class ModelRole { base, distilled };

std::string to_string(ModelRole r);
ModelRole model_role_from_string(const std::string& s);

struct DenoiserConfig {
  std::vector<int> hidden{128, 128, 128};
  int time_embed_dim = 32;  // even: sin/cos pairs over geometric frequencies 1..1000
  int cond_embed_dim = 8;   // ignored when n_conditions == 0
  int n_conditions = 0;     // 0 = unconditional model

  int input_dim() const {
    return 2 + time_embed_dim + (n_conditions > 0 ? cond_embed_dim : 0);
  }
  int n_linear() const { return static_cast<int>(hidden.size()) + 1; }
  bool operator==(const DenoiserConfig&) const = default;
};

// Writes the sinusoidal embedding of t_frac (out.size() == dim, dim even):
// out[2i] = sin(f_i t_frac), out[2i+1] = cos(f_i t_frac), with f_i spaced
// geometrically from 1 to 1000.
void time_embedding(double t_frac, std::span<double> out);

// Fully connected noise-prediction network: input [x, time embedding,
// condition embedding] -> hidden layers with SiLU -> 2-D predicted noise.
// Weights are row-major (rows = outputs). Parameter blocks are always
// traversed in declared order: (W0, b0), (W1, b1), ..., cond_table.
struct DenoiserModel {
  DenoiserConfig cfg;
  ModelRole role = ModelRole::base;
  std::vector<std::vector<double>> weights;  // per linear layer, out x in
  std::vector<std::vector<double>> biases;   // per linear layer, out
  std::vector<double> cond_table;            // (n_conditions + 1) x cond_embed_dim; last row = null

  // Kaiming fan-in weights, zero biases, N(0, 0.1^2) condition table.
  static DenoiserModel init(const DenoiserConfig& cfg, ModelRole role,
                            RngStream& rng);

  int layer_in(int l) const;
  int layer_out(int l) const;
  std::size_t param_count() const;
};

// Low-rank additive adapter over selected weight matrices:
// W_eff = W + scale * up * down. up is zero-initialized so a fresh adapter is
// exactly neutral; down is N(0, 0.01^2).
struct LoraAdapter {
  int rank = 4;
  double scale = 1.0;
  std::vector<int> target_layers;            // indices into model.weights
  std::vector<std::vector<double>> down;     // per target: rank x in
  std::vector<std::vector<double>> up;       // per target: out x rank

  // Targets every hidden-to-hidden weight matrix (layers 1..n_hidden-1) plus
  // the first layer: i.e. all layers that produce hidden activations.
  static LoraAdapter init(const DenoiserModel& model, int rank, RngStream& rng);

  LoraAdapter at_scale(double s) const {
    LoraAdapter a = *this;
    a.scale = s;
    return a;
  }
  std::size_t param_count() const;
};

// Returns a copy of the model with scale * up * down folded into each target
// weight matrix. scale == 0 returns a bitwise-identical copy.
DenoiserModel merge_adapter(const DenoiserModel& model,
                            const LoraAdapter& adapter, double scale);

// Selects which parameter set backward() differentiates.
enum class Trainable { model_params, adapter_params };

// Gradient (or Adam moment) storage shaped like a model and optionally an
// adapter. Blocks follow the same declared order as the parameters.
struct GradientTape {
  std::vector<std::vector<double>> d_weights;
  std::vector<std::vector<double>> d_biases;
  std::vector<double> d_cond_table;
  std::vector<std::vector<double>> d_down;
  std::vector<std::vector<double>> d_up;

  static GradientTape like_model(const DenoiserModel& m);
  static GradientTape like_adapter(const DenoiserModel& m, const LoraAdapter& a);
  void zero();
  void add(const GradientTape& o);  // ShapeMismatch on different shapes
  void scale(double s);
};

// Single forward evaluation. cond: nullopt selects the learned null row;
// out-of-range ids (or any id on an unconditional model) throw
// ConditionOutOfRange. adapter may be null.
Vec2 forward(const DenoiserModel& model, const LoraAdapter* adapter, Vec2 x,
             double t_frac, std::optional<int> cond);

// Activation cache for one forward evaluation, reused across calls to avoid
// reallocating. prepare() sizes it for a model; forward_cached() fills it.
struct ForwardCache {
  std::vector<double> input;
  std::vector<std::vector<double>> z;    // pre-activations per linear layer
  std::vector<std::vector<double>> h;    // post-activations per linear layer
  std::vector<std::vector<double>> r;    // adapter bottleneck per target (or empty)
  std::vector<double> din;               // scratch: gradient w.r.t. layer input
  std::vector<double> dz;                // scratch: gradient w.r.t. pre-activation
  int cond_row = -1;

  void prepare(const DenoiserModel& m, const LoraAdapter* a);
};

Vec2 forward_cached(const DenoiserModel& model, const LoraAdapter* adapter,
                    Vec2 x, double t_frac, std::optional<int> cond,
                    ForwardCache& cache);

// Reverse pass for the evaluation held in cache. dout is dL/d(output).
// Accumulates parameter gradients of the selected set into tape and returns
// dL/dx (the input-coordinate gradient), which lets callers chain backward
// through multi-step rollouts.
Vec2 backward_cached(const DenoiserModel& model, const LoraAdapter* adapter,
                     const ForwardCache& cache, Vec2 dout, Trainable which,
                     GradientTape& tape);

struct TrainBatchItem {
  Vec2 x;
  double t_frac = 0.0;
  std::optional<int> cond;
  Vec2 target;
};

// Mean squared error over the batch, |out - target|^2 averaged over items,
// plus its gradient. Work is split into kGradChunks fixed chunks and merged
// in chunk order. Throws EmptyBatch.
std::pair<double, GradientTape> backward(const DenoiserModel& model,
                                         const LoraAdapter* adapter,
                                         std::span<const TrainBatchItem> batch,
                                         Trainable which);

// Adam first/second moments over a flat view of the trainable blocks.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  static AdamState sized(std::size_t n) {
    return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0};
  }
};

// One Adam update (beta1 0.9, beta2 0.999, eps 1e-8, bias-corrected) applied
// in declared block order. Throws ShapeMismatch when tape or state shapes
// disagree with the parameters.
void opt_step(DenoiserModel& model, const GradientTape& tape, AdamState& state,
              double lr);
void opt_step(LoraAdapter& adapter, const GradientTape& tape, AdamState& state,
              double lr);

}  // namespace ddlab
