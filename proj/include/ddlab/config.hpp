#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ddlab/denoiser.hpp"
#include "ddlab/distill.hpp"
#include "ddlab/schedule.hpp"
#include "ddlab/slider.hpp"
#include "ddlab/toy_data.hpp"
#include "ddlab/train.hpp"

namespace ddlab {

// Settings for one sampling/evaluation arm.
struct ArmConfig {
  int n = 2000;
  int base_steps = 32;
  int distilled_steps = 4;
  bool stochastic_base = true;  // base arm uses ancestral steps
  double guidance = 1.0;
  std::optional<int> cond;
  // JSON "cond": "balanced" — chain i samples with condition i mod
  // n_conditions, and evaluation reports shared-condition diversity. This is
  // the protocol for the headline diversity comparisons.
  bool cond_balanced = false;
  int transition_k = 1;
  int base_substeps = 1;
};

struct SweepConfig {
  std::vector<int> ks{0, 1, 2, 3, 4};
  std::vector<double> ws{0.0, 1.0, 2.0, 4.0};
  std::vector<int> substeps{1, 2, 4};
  int n = 1000;
};

// Full run description, parsed from a JSON file. Unknown keys anywhere are a
// ConfigError so typos fail loudly (exit code 2 in the CLI).
struct RunConfig {
  std::filesystem::path out_dir = "run";
  std::uint64_t seed = 42;
  ToyDistribution data;
  int n_reference = 100000;  // truth reference batch
  ScheduleKind schedule_kind = ScheduleKind::cosine;
  int schedule_T = 64;
  DenoiserConfig model{.hidden = {128, 128, 128},
                       .time_embed_dim = 32,
                       .cond_embed_dim = 8,
                       .n_conditions = 8};
  TrainConfig train;
  DistillConfig distill;
  SliderConfig slider;
  std::string adapter_on = "base";  // which model train-lora adapts
  ArmConfig arm;
  std::string sample_arm = "base";  // arm the `sample` command runs
  SweepConfig sweep;
  std::vector<double> transfer_scales{-2.0, -1.0, 0.0, 1.0, 2.0};
  int transfer_n = 2000;
  int dt_chains = 256;
  // Committed-sample projection radius shared by every deterministic sampling
  // path (arms, distillation rollouts, transfer probes, commitment readouts);
  // 0 disables. Keep it comfortably above the data support radius: it only
  // exists to stop the near-t=T readout amplification (1/sqrt(ab_T)) from
  // letting one noisy prediction fling a chain far off scale.
  double x0_clip = 8.0;

  // Artifact locations; relative paths resolve against out_dir.
  std::string base_model_path = "base_model.ddlab";
  std::string distilled_model_path = "distilled_model.ddlab";
  std::string adapter_base_path = "adapter_base.ddlab";
  std::string adapter_distilled_path = "adapter_distilled.ddlab";

  nlohmann::json as_json() const;  // canonical form used for hashing/manifests
  std::filesystem::path resolve(const std::string& rel) const;

  NoiseSchedule make_noise_schedule() const {
    return make_schedule(schedule_kind, schedule_T);
  }
};

// Parses and validates. Throws ConfigError with a path-qualified message.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config_file(const std::filesystem::path& path);

// Applies one "dotted.path=value" override onto raw JSON before parsing. The
// value is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::json& j, const std::string& assignment);

// FNV-1a 64-bit over the canonical serialization with out_dir removed, hex
// encoded; identical settings hash identically regardless of output location.
std::string config_hash(const RunConfig& cfg);

}  // namespace ddlab
