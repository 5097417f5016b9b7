#include "ddlab/config.hpp"

#include <cmath>
#include <fstream>

#include "ddlab/errors.hpp"

namespace ddlab {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
  throw ConfigError("config: " + where + ": " + what);
}

// Reads fields out of one JSON object and rejects keys nobody consumed.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j.is_object()) bad(name_, "expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.push_back(key);
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      bad(name_ + "." + key, "wrong type");
    }
  }

  bool has(const char* key) {
    if (j_.contains(key)) {
      seen_.push_back(key);
      return true;
    }
    return false;
  }

  const json& raw(const char* key) { return j_.at(key); }

  void finish() {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool known = false;
      for (const auto& s : seen_) {
        if (s == it.key()) {
          known = true;
          break;
        }
      }
      if (!known) bad(name_, "unknown key '" + it.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::vector<std::string> seen_;
};

void check_positive(const std::string& where, double v) {
  if (!(v > 0)) bad(where, "must be > 0");
}

}  // namespace

RunConfig parse_config(const json& j) {
  RunConfig cfg;
  Section top(j, "top level");

  std::string out_dir;
  top.get("out_dir", out_dir);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  top.get("seed", cfg.seed);

  if (top.has("data")) {
    Section s(top.raw("data"), "data");
    std::string kind = "gmm_ring";
    s.get("kind", kind);
    cfg.data.kind = toy_kind_from_string(kind);
    s.get("n_modes", cfg.data.n_modes);
    s.get("ring_radius", cfg.data.ring_radius);
    s.get("mode_std", cfg.data.mode_std);
    s.get("moons_radius", cfg.data.moons_radius);
    s.get("spiral_turns", cfg.data.spiral_turns);
    s.get("spiral_radius", cfg.data.spiral_radius);
    s.get("noise_std", cfg.data.noise_std);
    std::vector<double> dir;
    s.get("attribute_direction", dir);
    if (!dir.empty()) {
      if (dir.size() != 2) bad("data.attribute_direction", "expected [x, y]");
      cfg.data.attribute_direction = {dir[0], dir[1]};
    }
    s.get("n_reference", cfg.n_reference);
    s.finish();
    if (cfg.data.n_modes < 1) bad("data.n_modes", "must be >= 1");
    check_positive("data.mode_std", cfg.data.mode_std);
  }

  if (top.has("schedule")) {
    Section s(top.raw("schedule"), "schedule");
    std::string kind = "cosine";
    s.get("kind", kind);
    cfg.schedule_kind = schedule_kind_from_string(kind);
    s.get("T", cfg.schedule_T);
    s.finish();
    if (cfg.schedule_T < 1) bad("schedule.T", "must be >= 1");
  }

  if (top.has("model")) {
    Section s(top.raw("model"), "model");
    s.get("hidden", cfg.model.hidden);
    s.get("time_embed_dim", cfg.model.time_embed_dim);
    s.get("cond_embed_dim", cfg.model.cond_embed_dim);
    s.get("n_conditions", cfg.model.n_conditions);
    s.finish();
    if (cfg.model.hidden.empty()) bad("model.hidden", "must not be empty");
    if (cfg.model.time_embed_dim < 2 || cfg.model.time_embed_dim % 2 != 0) {
      bad("model.time_embed_dim", "must be even and >= 2");
    }
    if (cfg.model.n_conditions < 0) bad("model.n_conditions", "must be >= 0");
  }

  if (top.has("train")) {
    Section s(top.raw("train"), "train");
    s.get("iterations", cfg.train.iterations);
    s.get("batch", cfg.train.batch);
    s.get("lr", cfg.train.lr);
    s.get("lr_final", cfg.train.lr_final);
    s.get("cond_dropout", cfg.train.cond_dropout);
    s.get("log_every", cfg.train.log_every);
    s.finish();
    if (cfg.train.iterations < 1) bad("train.iterations", "must be >= 1");
    if (cfg.train.batch < 1) bad("train.batch", "must be >= 1");
    check_positive("train.lr", cfg.train.lr);
    if (cfg.train.cond_dropout < 0 || cfg.train.cond_dropout > 1) {
      bad("train.cond_dropout", "must be in [0, 1]");
    }
  }

  if (top.has("distill")) {
    Section s(top.raw("distill"), "distill");
    std::string method = to_string(cfg.distill.method);
    s.get("method", method);
    cfg.distill.method = distill_method_from_string(method);
    s.get("teacher_steps", cfg.distill.teacher_steps);
    s.get("target_steps", cfg.distill.target_steps);
    s.get("iters_per_round", cfg.distill.iters_per_round);
    s.get("regression_iters", cfg.distill.regression_iters);
    s.get("pool", cfg.distill.pool);
    s.get("batch", cfg.distill.batch);
    s.get("lr", cfg.distill.lr);
    s.get("cond_dropout", cfg.distill.cond_dropout);
    s.get("log_every", cfg.distill.log_every);
    s.finish();
    check_positive("distill.lr", cfg.distill.lr);
  }

  if (top.has("slider")) {
    Section s(top.raw("slider"), "slider");
    s.get("delta", cfg.slider.delta);
    s.get("rank", cfg.slider.rank);
    s.get("iterations", cfg.slider.iterations);
    s.get("batch", cfg.slider.batch);
    s.get("lr", cfg.slider.lr);
    s.get("log_every", cfg.slider.log_every);
    s.finish();
    if (cfg.slider.rank < 1) bad("slider.rank", "must be >= 1");
  }

  top.get("adapter_on", cfg.adapter_on);
  if (cfg.adapter_on != "base" && cfg.adapter_on != "distilled") {
    bad("adapter_on", "must be 'base' or 'distilled'");
  }

  if (top.has("arm")) {
    Section s(top.raw("arm"), "arm");
    s.get("n", cfg.arm.n);
    s.get("base_steps", cfg.arm.base_steps);
    s.get("distilled_steps", cfg.arm.distilled_steps);
    s.get("stochastic_base", cfg.arm.stochastic_base);
    s.get("guidance", cfg.arm.guidance);
    if (s.has("cond")) {
      const json& c = s.raw("cond");
      if (c.is_string() && c.get<std::string>() == "balanced") {
        cfg.arm.cond_balanced = true;
      } else if (!c.is_null()) {
        if (!c.is_number_integer()) {
          bad("arm.cond", "must be an integer, null, or \"balanced\"");
        }
        cfg.arm.cond = c.get<int>();
      }
    }
    s.get("transition_k", cfg.arm.transition_k);
    s.get("base_substeps", cfg.arm.base_substeps);
    s.finish();
    if (cfg.arm.n < 2) bad("arm.n", "must be >= 2");
    if (cfg.arm.base_substeps < 1) bad("arm.base_substeps", "must be >= 1");
    if (cfg.arm.cond_balanced && cfg.model.n_conditions <= 0) {
      bad("arm.cond", "\"balanced\" needs a conditional model");
    }
  }

  top.get("sample_arm", cfg.sample_arm);
  if (cfg.sample_arm != "base" && cfg.sample_arm != "distilled" &&
      cfg.sample_arm != "hybrid" && cfg.sample_arm != "skip_first") {
    bad("sample_arm", "must be base|distilled|hybrid|skip_first");
  }

  if (top.has("sweep")) {
    Section s(top.raw("sweep"), "sweep");
    s.get("ks", cfg.sweep.ks);
    s.get("ws", cfg.sweep.ws);
    s.get("substeps", cfg.sweep.substeps);
    s.get("n", cfg.sweep.n);
    s.finish();
    if (cfg.sweep.n < 2) bad("sweep.n", "must be >= 2");
  }

  top.get("transfer_scales", cfg.transfer_scales);
  top.get("transfer_n", cfg.transfer_n);
  top.get("dt_chains", cfg.dt_chains);
  if (cfg.dt_chains < 2) bad("dt_chains", "must be >= 2");
  top.get("x0_clip", cfg.x0_clip);
  if (cfg.x0_clip < 0.0 || !std::isfinite(cfg.x0_clip)) {
    bad("x0_clip", "must be a finite value >= 0 (0 disables)");
  }

  top.get("base_model_path", cfg.base_model_path);
  top.get("distilled_model_path", cfg.distilled_model_path);
  top.get("adapter_base_path", cfg.adapter_base_path);
  top.get("adapter_distilled_path", cfg.adapter_distilled_path);

  top.finish();
  return cfg;
}

RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return parse_config(j);
}

void apply_override(json& j, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("config: --set expects key.path=value, got '" + assignment + "'");
  }
  std::string path = assignment.substr(0, eq);
  std::string value = assignment.substr(eq + 1);

  json* node = &j;
  std::size_t start = 0;
  while (true) {
    auto dot = path.find('.', start);
    std::string key = path.substr(start, dot == std::string::npos
                                             ? std::string::npos
                                             : dot - start);
    if (key.empty()) throw ConfigError("config: --set has an empty path segment");
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

json RunConfig::as_json() const {
  json j;
  j["out_dir"] = out_dir.string();
  j["seed"] = seed;
  j["data"] = {{"kind", to_string(data.kind)},
               {"n_modes", data.n_modes},
               {"ring_radius", data.ring_radius},
               {"mode_std", data.mode_std},
               {"moons_radius", data.moons_radius},
               {"spiral_turns", data.spiral_turns},
               {"spiral_radius", data.spiral_radius},
               {"noise_std", data.noise_std},
               {"attribute_direction",
                {data.attribute_direction.x, data.attribute_direction.y}},
               {"n_reference", n_reference}};
  j["schedule"] = {{"kind", to_string(schedule_kind)}, {"T", schedule_T}};
  j["model"] = {{"hidden", model.hidden},
                {"time_embed_dim", model.time_embed_dim},
                {"cond_embed_dim", model.cond_embed_dim},
                {"n_conditions", model.n_conditions}};
  j["train"] = {{"iterations", train.iterations},
                {"batch", train.batch},
                {"lr", train.lr},
                {"lr_final", train.lr_final},
                {"cond_dropout", train.cond_dropout},
                {"log_every", train.log_every}};
  j["distill"] = {{"method", to_string(distill.method)},
                  {"teacher_steps", distill.teacher_steps},
                  {"target_steps", distill.target_steps},
                  {"iters_per_round", distill.iters_per_round},
                  {"regression_iters", distill.regression_iters},
                  {"pool", distill.pool},
                  {"batch", distill.batch},
                  {"lr", distill.lr},
                  {"cond_dropout", distill.cond_dropout},
                  {"log_every", distill.log_every}};
  j["slider"] = {{"delta", slider.delta},
                 {"rank", slider.rank},
                 {"iterations", slider.iterations},
                 {"batch", slider.batch},
                 {"lr", slider.lr},
                 {"log_every", slider.log_every}};
  j["adapter_on"] = adapter_on;
  j["arm"] = {{"n", arm.n},
              {"base_steps", arm.base_steps},
              {"distilled_steps", arm.distilled_steps},
              {"stochastic_base", arm.stochastic_base},
              {"guidance", arm.guidance},
              {"cond", arm.cond_balanced ? json("balanced")
                       : arm.cond       ? json(*arm.cond)
                                        : json(nullptr)},
              {"transition_k", arm.transition_k},
              {"base_substeps", arm.base_substeps}};
  j["sample_arm"] = sample_arm;
  j["sweep"] = {{"ks", sweep.ks},
                {"ws", sweep.ws},
                {"substeps", sweep.substeps},
                {"n", sweep.n}};
  j["transfer_scales"] = transfer_scales;
  j["transfer_n"] = transfer_n;
  j["dt_chains"] = dt_chains;
  j["x0_clip"] = x0_clip;
  j["base_model_path"] = base_model_path;
  j["distilled_model_path"] = distilled_model_path;
  j["adapter_base_path"] = adapter_base_path;
  j["adapter_distilled_path"] = adapter_distilled_path;
  return j;
}

std::filesystem::path RunConfig::resolve(const std::string& rel) const {
  std::filesystem::path p(rel);
  return p.is_absolute() ? p : out_dir / p;
}

std::string config_hash(const RunConfig& cfg) {
  json j = cfg.as_json();
  j.erase("out_dir");
  std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ddlab
