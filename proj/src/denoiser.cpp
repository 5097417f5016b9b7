#include "ddlab/denoiser.hpp"

#include <algorithm>
#include <cmath>

#include "ddlab/errors.hpp"
#include "ddlab/parallel.hpp"

namespace ddlab {

std::string to_string(ModelRole r) {
  return r == ModelRole::base ? "base" : "distilled";
}

ModelRole model_role_from_string(const std::string& s) {
  if (s == "base") return ModelRole::base;
  if (s == "distilled") return ModelRole::distilled;
  throw UnsupportedKind("unknown model role: " + s);
}

void time_embedding(double t_frac, std::span<double> out) {
  int dim = static_cast<int>(out.size());
  if (dim < 2 || dim % 2 != 0) {
    throw ShapeMismatch("time_embedding: dim must be even and >= 2");
  }
  int n_freq = dim / 2;
  for (int i = 0; i < n_freq; ++i) {
    double f = n_freq == 1
                   ? 1.0
                   : std::pow(1000.0, static_cast<double>(i) /
                                          static_cast<double>(n_freq - 1));
    double a = f * t_frac;
    out[static_cast<std::size_t>(2 * i)] = std::sin(a);
    out[static_cast<std::size_t>(2 * i + 1)] = std::cos(a);
  }
}

namespace {

inline double silu(double z) { return z / (1.0 + std::exp(-z)); }
inline double silu_grad(double z) {
  double s = 1.0 / (1.0 + std::exp(-z));
  return s * (1.0 + z * (1.0 - s));
}

// Fills a block with N(0, std^2) values using gaussian_pair so the number of
// u64 draws consumed is a fixed function of the block size.
void fill_gaussian(std::span<double> out, double std_dev, RngStream& rng) {
  std::size_t i = 0;
  for (; i + 1 < out.size(); i += 2) {
    Vec2 g = gaussian_pair(rng);
    out[i] = g.x * std_dev;
    out[i + 1] = g.y * std_dev;
  }
  if (i < out.size()) out[i] = gaussian_pair(rng).x * std_dev;
}

// Index of layer l in adapter.target_layers, or -1.
inline int adapter_slot(const LoraAdapter* a, int l) {
  if (!a) return -1;
  for (std::size_t t = 0; t < a->target_layers.size(); ++t) {
    if (a->target_layers[t] == l) return static_cast<int>(t);
  }
  return -1;
}

}  // namespace

int DenoiserModel::layer_in(int l) const {
  return l == 0 ? cfg.input_dim() : cfg.hidden[static_cast<std::size_t>(l - 1)];
}

int DenoiserModel::layer_out(int l) const {
  return l == cfg.n_linear() - 1 ? 2 : cfg.hidden[static_cast<std::size_t>(l)];
}

std::size_t DenoiserModel::param_count() const {
  std::size_t n = 0;
  for (int l = 0; l < cfg.n_linear(); ++l) {
    n += static_cast<std::size_t>(layer_in(l)) * static_cast<std::size_t>(layer_out(l));
    n += static_cast<std::size_t>(layer_out(l));
  }
  n += cond_table.size();
  return n;
}

DenoiserModel DenoiserModel::init(const DenoiserConfig& cfg, ModelRole role,
                                  RngStream& rng) {
  if (cfg.hidden.empty()) throw ShapeMismatch("init: need at least one hidden layer");
  if (cfg.time_embed_dim < 2 || cfg.time_embed_dim % 2 != 0) {
    throw ShapeMismatch("init: time_embed_dim must be even and >= 2");
  }
  DenoiserModel m;
  m.cfg = cfg;
  m.role = role;
  int L = cfg.n_linear();
  m.weights.resize(static_cast<std::size_t>(L));
  m.biases.resize(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    int in = m.layer_in(l), out = m.layer_out(l);
    auto& w = m.weights[static_cast<std::size_t>(l)];
    w.resize(static_cast<std::size_t>(in) * static_cast<std::size_t>(out));
    fill_gaussian(w, std::sqrt(2.0 / static_cast<double>(in)), rng);
    m.biases[static_cast<std::size_t>(l)]
        .resize(static_cast<std::size_t>(out), 0.0);
  }
  if (cfg.n_conditions > 0) {
    m.cond_table.resize(static_cast<std::size_t>(cfg.n_conditions + 1) *
                        static_cast<std::size_t>(cfg.cond_embed_dim));
    fill_gaussian(m.cond_table, 0.1, rng);
  }
  return m;
}

LoraAdapter LoraAdapter::init(const DenoiserModel& model, int rank,
                              RngStream& rng) {
  if (rank < 1) throw ShapeMismatch("adapter init: rank must be >= 1");
  LoraAdapter a;
  a.rank = rank;
  a.scale = 1.0;
  // Adapt every weight matrix that produces hidden activations; leave the
  // output projection alone.
  int n_hidden = static_cast<int>(model.cfg.hidden.size());
  for (int l = 0; l < n_hidden; ++l) a.target_layers.push_back(l);
  for (int l : a.target_layers) {
    int in = model.layer_in(l), out = model.layer_out(l);
    std::vector<double> d(static_cast<std::size_t>(rank) * static_cast<std::size_t>(in));
    fill_gaussian(d, 0.01, rng);
    a.down.push_back(std::move(d));
    a.up.emplace_back(static_cast<std::size_t>(out) * static_cast<std::size_t>(rank), 0.0);
  }
  return a;
}

std::size_t LoraAdapter::param_count() const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < down.size(); ++t) n += down[t].size() + up[t].size();
  return n;
}

DenoiserModel merge_adapter(const DenoiserModel& model,
                            const LoraAdapter& adapter, double scale) {
  DenoiserModel out = model;
  if (scale == 0.0) return out;
  for (std::size_t t = 0; t < adapter.target_layers.size(); ++t) {
    int l = adapter.target_layers[t];
    if (l < 0 || l >= model.cfg.n_linear()) {
      throw ShapeMismatch("merge_adapter: target layer out of range");
    }
    int in = model.layer_in(l), out_dim = model.layer_out(l);
    const auto& dn = adapter.down[t];
    const auto& up = adapter.up[t];
    if (dn.size() != static_cast<std::size_t>(adapter.rank) * static_cast<std::size_t>(in) ||
        up.size() != static_cast<std::size_t>(out_dim) * static_cast<std::size_t>(adapter.rank)) {
      throw ShapeMismatch("merge_adapter: adapter shapes do not match model");
    }
    auto& w = out.weights[static_cast<std::size_t>(l)];
    for (int o = 0; o < out_dim; ++o) {
      for (int k = 0; k < adapter.rank; ++k) {
        double u = scale * up[static_cast<std::size_t>(o * adapter.rank + k)];
        if (u == 0.0) continue;
        const double* drow = &dn[static_cast<std::size_t>(k * in)];
        double* wrow = &w[static_cast<std::size_t>(o * in)];
        for (int i = 0; i < in; ++i) wrow[i] += u * drow[i];
      }
    }
  }
  return out;
}

GradientTape GradientTape::like_model(const DenoiserModel& m) {
  GradientTape t;
  for (const auto& w : m.weights) t.d_weights.emplace_back(w.size(), 0.0);
  for (const auto& b : m.biases) t.d_biases.emplace_back(b.size(), 0.0);
  t.d_cond_table.assign(m.cond_table.size(), 0.0);
  return t;
}

GradientTape GradientTape::like_adapter(const DenoiserModel& m,
                                        const LoraAdapter& a) {
  GradientTape t = like_model(m);
  for (const auto& d : a.down) t.d_down.emplace_back(d.size(), 0.0);
  for (const auto& u : a.up) t.d_up.emplace_back(u.size(), 0.0);
  return t;
}

void GradientTape::zero() {
  for (auto& w : d_weights) std::fill(w.begin(), w.end(), 0.0);
  for (auto& b : d_biases) std::fill(b.begin(), b.end(), 0.0);
  std::fill(d_cond_table.begin(), d_cond_table.end(), 0.0);
  for (auto& d : d_down) std::fill(d.begin(), d.end(), 0.0);
  for (auto& u : d_up) std::fill(u.begin(), u.end(), 0.0);
}

namespace {
void add_blocks(std::vector<std::vector<double>>& dst,
                const std::vector<std::vector<double>>& src, const char* what) {
  if (dst.size() != src.size()) throw ShapeMismatch(std::string("tape add: ") + what);
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].size() != src[i].size()) {
      throw ShapeMismatch(std::string("tape add: ") + what);
    }
    for (std::size_t j = 0; j < dst[i].size(); ++j) dst[i][j] += src[i][j];
  }
}
}  // namespace

void GradientTape::add(const GradientTape& o) {
  add_blocks(d_weights, o.d_weights, "weights");
  add_blocks(d_biases, o.d_biases, "biases");
  if (d_cond_table.size() != o.d_cond_table.size()) {
    throw ShapeMismatch("tape add: cond_table");
  }
  for (std::size_t j = 0; j < d_cond_table.size(); ++j) {
    d_cond_table[j] += o.d_cond_table[j];
  }
  add_blocks(d_down, o.d_down, "down");
  add_blocks(d_up, o.d_up, "up");
}

void GradientTape::scale(double s) {
  for (auto& w : d_weights)
    for (double& v : w) v *= s;
  for (auto& b : d_biases)
    for (double& v : b) v *= s;
  for (double& v : d_cond_table) v *= s;
  for (auto& d : d_down)
    for (double& v : d) v *= s;
  for (auto& u : d_up)
    for (double& v : u) v *= s;
}

void ForwardCache::prepare(const DenoiserModel& m, const LoraAdapter* a) {
  input.assign(static_cast<std::size_t>(m.cfg.input_dim()), 0.0);
  int L = m.cfg.n_linear();
  z.resize(static_cast<std::size_t>(L));
  h.resize(static_cast<std::size_t>(L));
  std::size_t max_dim = input.size();
  for (int l = 0; l < L; ++l) {
    z[static_cast<std::size_t>(l)].assign(static_cast<std::size_t>(m.layer_out(l)), 0.0);
    h[static_cast<std::size_t>(l)].assign(static_cast<std::size_t>(m.layer_out(l)), 0.0);
    max_dim = std::max(max_dim, static_cast<std::size_t>(m.layer_out(l)));
  }
  r.clear();
  if (a) {
    for (std::size_t t = 0; t < a->target_layers.size(); ++t) {
      r.emplace_back(static_cast<std::size_t>(a->rank), 0.0);
    }
  }
  din.assign(max_dim, 0.0);
  dz.assign(max_dim, 0.0);
  cond_row = -1;
}

namespace {

int resolve_cond_row(const DenoiserConfig& cfg, std::optional<int> cond) {
  if (cfg.n_conditions == 0) {
    if (cond) throw ConditionOutOfRange("forward: model is unconditional");
    return -1;
  }
  if (!cond) return cfg.n_conditions;  // learned null row
  if (*cond < 0 || *cond >= cfg.n_conditions) {
    throw ConditionOutOfRange("forward: condition id out of range");
  }
  return *cond;
}

}  // namespace

Vec2 forward_cached(const DenoiserModel& model, const LoraAdapter* adapter,
                    Vec2 x, double t_frac, std::optional<int> cond,
                    ForwardCache& cache) {
  const DenoiserConfig& cfg = model.cfg;
  cache.cond_row = resolve_cond_row(cfg, cond);

  cache.input[0] = x.x;
  cache.input[1] = x.y;
  time_embedding(t_frac, std::span<double>(cache.input).subspan(2, static_cast<std::size_t>(cfg.time_embed_dim)));
  if (cfg.n_conditions > 0) {
    const double* row =
        &model.cond_table[static_cast<std::size_t>(cache.cond_row) *
                          static_cast<std::size_t>(cfg.cond_embed_dim)];
    std::copy(row, row + cfg.cond_embed_dim,
              cache.input.begin() + 2 + cfg.time_embed_dim);
  }

  int L = cfg.n_linear();
  for (int l = 0; l < L; ++l) {
    const std::vector<double>& in =
        l == 0 ? cache.input : cache.h[static_cast<std::size_t>(l - 1)];
    int in_dim = model.layer_in(l), out_dim = model.layer_out(l);
    const auto& W = model.weights[static_cast<std::size_t>(l)];
    const auto& b = model.biases[static_cast<std::size_t>(l)];
    auto& zl = cache.z[static_cast<std::size_t>(l)];
    for (int o = 0; o < out_dim; ++o) {
      const double* wrow = &W[static_cast<std::size_t>(o) * static_cast<std::size_t>(in_dim)];
      double acc = b[static_cast<std::size_t>(o)];
      for (int i = 0; i < in_dim; ++i) acc += wrow[i] * in[static_cast<std::size_t>(i)];
      zl[static_cast<std::size_t>(o)] = acc;
    }
    int slot = adapter_slot(adapter, l);
    if (slot >= 0 && adapter->scale != 0.0) {
      const auto& dn = adapter->down[static_cast<std::size_t>(slot)];
      const auto& up = adapter->up[static_cast<std::size_t>(slot)];
      auto& rr = cache.r[static_cast<std::size_t>(slot)];
      for (int k = 0; k < adapter->rank; ++k) {
        const double* drow = &dn[static_cast<std::size_t>(k) * static_cast<std::size_t>(in_dim)];
        double acc = 0.0;
        for (int i = 0; i < in_dim; ++i) acc += drow[i] * in[static_cast<std::size_t>(i)];
        rr[static_cast<std::size_t>(k)] = acc;
      }
      for (int o = 0; o < out_dim; ++o) {
        const double* urow = &up[static_cast<std::size_t>(o) * static_cast<std::size_t>(adapter->rank)];
        double acc = 0.0;
        for (int k = 0; k < adapter->rank; ++k) acc += urow[k] * rr[static_cast<std::size_t>(k)];
        zl[static_cast<std::size_t>(o)] += adapter->scale * acc;
      }
    } else if (slot >= 0) {
      // scale == 0: bottleneck still defined (zero contribution); record it
      // so backward sees consistent state.
      const auto& dn = adapter->down[static_cast<std::size_t>(slot)];
      auto& rr = cache.r[static_cast<std::size_t>(slot)];
      for (int k = 0; k < adapter->rank; ++k) {
        const double* drow = &dn[static_cast<std::size_t>(k) * static_cast<std::size_t>(in_dim)];
        double acc = 0.0;
        for (int i = 0; i < in_dim; ++i) acc += drow[i] * in[static_cast<std::size_t>(i)];
        rr[static_cast<std::size_t>(k)] = acc;
      }
    }
    auto& hl = cache.h[static_cast<std::size_t>(l)];
    if (l < L - 1) {
      for (int o = 0; o < out_dim; ++o) {
        hl[static_cast<std::size_t>(o)] = silu(zl[static_cast<std::size_t>(o)]);
      }
    } else {
      hl = zl;
    }
  }
  const auto& out = cache.h[static_cast<std::size_t>(L - 1)];
  return {out[0], out[1]};
}

Vec2 forward(const DenoiserModel& model, const LoraAdapter* adapter, Vec2 x,
             double t_frac, std::optional<int> cond) {
  ForwardCache cache;
  cache.prepare(model, adapter);
  return forward_cached(model, adapter, x, t_frac, cond, cache);
}

Vec2 backward_cached(const DenoiserModel& model, const LoraAdapter* adapter,
                     const ForwardCache& cache, Vec2 dout, Trainable which,
                     GradientTape& tape) {
  const DenoiserConfig& cfg = model.cfg;
  int L = cfg.n_linear();
  bool train_model = which == Trainable::model_params;
  if (train_model && (tape.d_weights.size() != model.weights.size() ||
                      tape.d_cond_table.size() != model.cond_table.size())) {
    throw ShapeMismatch("backward: tape does not match model");
  }
  if (!train_model && adapter &&
      (tape.d_down.size() != adapter->down.size() ||
       tape.d_up.size() != adapter->up.size())) {
    throw ShapeMismatch("backward: tape does not match adapter");
  }

  // gh holds dL/dh for the current layer; reuse the cache scratch buffers.
  std::vector<double>& gh = const_cast<ForwardCache&>(cache).din;
  std::vector<double>& gz = const_cast<ForwardCache&>(cache).dz;
  gh[0] = dout.x;
  gh[1] = dout.y;

  std::vector<double> tvec(static_cast<std::size_t>(adapter ? adapter->rank : 0));
  Vec2 dx{};

  for (int l = L - 1; l >= 0; --l) {
    int in_dim = model.layer_in(l), out_dim = model.layer_out(l);
    const std::vector<double>& in =
        l == 0 ? cache.input : cache.h[static_cast<std::size_t>(l - 1)];
    const auto& zl = cache.z[static_cast<std::size_t>(l)];
    // dL/dz from dL/dh.
    if (l < L - 1) {
      for (int o = 0; o < out_dim; ++o) {
        gz[static_cast<std::size_t>(o)] =
            gh[static_cast<std::size_t>(o)] * silu_grad(zl[static_cast<std::size_t>(o)]);
      }
    } else {
      for (int o = 0; o < out_dim; ++o) gz[static_cast<std::size_t>(o)] = gh[static_cast<std::size_t>(o)];
    }

    if (train_model) {
      auto& dW = tape.d_weights[static_cast<std::size_t>(l)];
      auto& db = tape.d_biases[static_cast<std::size_t>(l)];
      for (int o = 0; o < out_dim; ++o) {
        double g = gz[static_cast<std::size_t>(o)];
        if (g != 0.0) {
          double* dwrow = &dW[static_cast<std::size_t>(o) * static_cast<std::size_t>(in_dim)];
          for (int i = 0; i < in_dim; ++i) dwrow[i] += g * in[static_cast<std::size_t>(i)];
        }
        db[static_cast<std::size_t>(o)] += g;
      }
    }

    int slot = adapter_slot(adapter, l);
    if (slot >= 0) {
      const auto& up = adapter->up[static_cast<std::size_t>(slot)];
      const auto& rr = cache.r[static_cast<std::size_t>(slot)];
      for (int k = 0; k < adapter->rank; ++k) {
        double acc = 0.0;
        for (int o = 0; o < out_dim; ++o) {
          acc += up[static_cast<std::size_t>(o * adapter->rank + k)] *
                 gz[static_cast<std::size_t>(o)];
        }
        tvec[static_cast<std::size_t>(k)] = acc;
      }
      if (!train_model) {
        auto& dup = tape.d_up[static_cast<std::size_t>(slot)];
        auto& ddn = tape.d_down[static_cast<std::size_t>(slot)];
        for (int o = 0; o < out_dim; ++o) {
          double g = adapter->scale * gz[static_cast<std::size_t>(o)];
          for (int k = 0; k < adapter->rank; ++k) {
            dup[static_cast<std::size_t>(o * adapter->rank + k)] +=
                g * rr[static_cast<std::size_t>(k)];
          }
        }
        for (int k = 0; k < adapter->rank; ++k) {
          double g = adapter->scale * tvec[static_cast<std::size_t>(k)];
          if (g == 0.0) continue;
          double* drow = &ddn[static_cast<std::size_t>(k) * static_cast<std::size_t>(in_dim)];
          for (int i = 0; i < in_dim; ++i) drow[i] += g * in[static_cast<std::size_t>(i)];
        }
      }
    }

    // dL/d(input of layer l): effective-weight transpose times gz.
    const auto& W = model.weights[static_cast<std::size_t>(l)];
    for (int i = 0; i < in_dim; ++i) gh[static_cast<std::size_t>(i)] = 0.0;
    for (int o = 0; o < out_dim; ++o) {
      double g = gz[static_cast<std::size_t>(o)];
      if (g == 0.0) continue;
      const double* wrow = &W[static_cast<std::size_t>(o) * static_cast<std::size_t>(in_dim)];
      for (int i = 0; i < in_dim; ++i) gh[static_cast<std::size_t>(i)] += wrow[i] * g;
    }
    if (slot >= 0 && adapter->scale != 0.0) {
      const auto& dn = adapter->down[static_cast<std::size_t>(slot)];
      for (int k = 0; k < adapter->rank; ++k) {
        double g = adapter->scale * tvec[static_cast<std::size_t>(k)];
        if (g == 0.0) continue;
        const double* drow = &dn[static_cast<std::size_t>(k) * static_cast<std::size_t>(in_dim)];
        for (int i = 0; i < in_dim; ++i) gh[static_cast<std::size_t>(i)] += drow[i] * g;
      }
    }

    if (l == 0) {
      dx = {gh[0], gh[1]};
      if (train_model && cfg.n_conditions > 0) {
        double* crow = &tape.d_cond_table[static_cast<std::size_t>(cache.cond_row) *
                                          static_cast<std::size_t>(cfg.cond_embed_dim)];
        int off = 2 + cfg.time_embed_dim;
        for (int j = 0; j < cfg.cond_embed_dim; ++j) {
          crow[j] += gh[static_cast<std::size_t>(off + j)];
        }
      }
    }
  }
  return dx;
}

std::pair<double, GradientTape> backward(const DenoiserModel& model,
                                         const LoraAdapter* adapter,
                                         std::span<const TrainBatchItem> batch,
                                         Trainable which) {
  if (batch.empty()) throw EmptyBatch("backward: empty batch");
  if (which == Trainable::adapter_params && !adapter) {
    throw ShapeMismatch("backward: adapter_params requested without adapter");
  }

  auto make_tape = [&] {
    return which == Trainable::model_params
               ? GradientTape::like_model(model)
               : GradientTape::like_adapter(model, *adapter);
  };

  std::vector<GradientTape> tapes;
  std::vector<double> losses(kGradChunks, 0.0);
  tapes.reserve(kGradChunks);
  for (int c = 0; c < kGradChunks; ++c) tapes.push_back(make_tape());

  parallel_chunks(batch.size(), kGradChunks,
                  [&](int c, std::size_t begin, std::size_t end) {
                    ForwardCache cache;
                    cache.prepare(model, adapter);
                    double loss = 0.0;
                    for (std::size_t i = begin; i < end; ++i) {
                      const TrainBatchItem& it = batch[i];
                      Vec2 out = forward_cached(model, adapter, it.x, it.t_frac,
                                                it.cond, cache);
                      Vec2 e = out - it.target;
                      loss += e.norm2();
                      backward_cached(model, adapter, cache, e * 2.0, which,
                                      tapes[static_cast<std::size_t>(c)]);
                    }
                    losses[static_cast<std::size_t>(c)] = loss;
                  });

  GradientTape total = std::move(tapes[0]);
  double loss = losses[0];
  for (int c = 1; c < kGradChunks; ++c) {
    total.add(tapes[static_cast<std::size_t>(c)]);
    loss += losses[static_cast<std::size_t>(c)];
  }
  double inv = 1.0 / static_cast<double>(batch.size());
  total.scale(inv);
  return {loss * inv, std::move(total)};
}

namespace {

constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

struct AdamCursor {
  AdamState& st;
  double lr, c1, c2;
  std::size_t off = 0;

  void block(std::span<double> p, std::span<const double> g) {
    if (off + p.size() > st.m.size() || p.size() != g.size()) {
      throw ShapeMismatch("opt_step: state size does not match parameters");
    }
    double* m = st.m.data() + off;
    double* v = st.v.data() + off;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g[i];
      v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + kAdamEps);
    }
    off += p.size();
  }
};

AdamCursor begin_adam(AdamState& state, double lr) {
  state.step += 1;
  double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
  double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
  return {state, lr, c1, c2, 0};
}

}  // namespace

void opt_step(DenoiserModel& model, const GradientTape& tape, AdamState& state,
              double lr) {
  if (state.m.size() != model.param_count() ||
      tape.d_weights.size() != model.weights.size()) {
    throw ShapeMismatch("opt_step: shapes do not match model");
  }
  AdamCursor cur = begin_adam(state, lr);
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    if (tape.d_weights[l].size() != model.weights[l].size() ||
        tape.d_biases[l].size() != model.biases[l].size()) {
      throw ShapeMismatch("opt_step: layer shape mismatch");
    }
    cur.block(model.weights[l], tape.d_weights[l]);
    cur.block(model.biases[l], tape.d_biases[l]);
  }
  if (tape.d_cond_table.size() != model.cond_table.size()) {
    throw ShapeMismatch("opt_step: cond table shape mismatch");
  }
  cur.block(model.cond_table, tape.d_cond_table);
}

void opt_step(LoraAdapter& adapter, const GradientTape& tape, AdamState& state,
              double lr) {
  if (state.m.size() != adapter.param_count() ||
      tape.d_down.size() != adapter.down.size() ||
      tape.d_up.size() != adapter.up.size()) {
    throw ShapeMismatch("opt_step: shapes do not match adapter");
  }
  AdamCursor cur = begin_adam(state, lr);
  for (std::size_t t = 0; t < adapter.down.size(); ++t) {
    if (tape.d_down[t].size() != adapter.down[t].size() ||
        tape.d_up[t].size() != adapter.up[t].size()) {
      throw ShapeMismatch("opt_step: adapter block mismatch");
    }
    cur.block(adapter.down[t], tape.d_down[t]);
    cur.block(adapter.up[t], tape.d_up[t]);
  }
}

}  // namespace ddlab
