#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

#include "ddlab/checkpoint.hpp"
#include "ddlab/denoiser.hpp"
#include "ddlab/errors.hpp"
#include "ddlab/rng.hpp"

using namespace ddlab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ddlab_test_" + std::to_string(RngStream(
                                static_cast<std::uint64_t>(
                                    std::chrono::steady_clock::now()
                                        .time_since_epoch()
                                        .count()),
                                0)
                                .next_u64()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

DenoiserModel make_model(std::uint64_t seed) {
  DenoiserConfig cfg;
  cfg.hidden = {8, 6};
  cfg.time_embed_dim = 8;
  cfg.cond_embed_dim = 4;
  cfg.n_conditions = 3;
  RngStream rng(seed, 0);
  return DenoiserModel::init(cfg, ModelRole::distilled, rng);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("model checkpoints round-trip bit-exactly with their header") {
  TempDir dir;
  DenoiserModel m = make_model(5);
  nlohmann::json extra{{"schedule", "cosine:T=64"}, {"seed", 77}};
  fs::path file = dir.path / "model.ddlab";
  save_model(file, m, extra);

  LoadedModel lm = load_model(file);
  CHECK(lm.model.cfg == m.cfg);
  CHECK(lm.model.role == ModelRole::distilled);
  REQUIRE(lm.model.weights.size() == m.weights.size());
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    REQUIRE(lm.model.weights[l].size() == m.weights[l].size());
    for (std::size_t i = 0; i < m.weights[l].size(); ++i) {
      CHECK(lm.model.weights[l][i] == m.weights[l][i]);
    }
    for (std::size_t i = 0; i < m.biases[l].size(); ++i) {
      CHECK(lm.model.biases[l][i] == m.biases[l][i]);
    }
  }
  for (std::size_t i = 0; i < m.cond_table.size(); ++i) {
    CHECK(lm.model.cond_table[i] == m.cond_table[i]);
  }
  CHECK(lm.header["schedule"] == "cosine:T=64");
  CHECK(lm.header["seed"] == 77);
  CHECK(lm.header["kind"] == "model");

  // Saving the loaded model again produces an identical file.
  fs::path file2 = dir.path / "model2.ddlab";
  save_model(file2, lm.model, extra);
  CHECK(slurp(file) == slurp(file2));
}

TEST_CASE("unconditional models round-trip without a condition block") {
  TempDir dir;
  DenoiserConfig cfg;
  cfg.hidden = {8};
  cfg.time_embed_dim = 8;
  cfg.n_conditions = 0;
  RngStream rng(6, 0);
  DenoiserModel m = DenoiserModel::init(cfg, ModelRole::base, rng);
  fs::path file = dir.path / "uncond.ddlab";
  save_model(file, m);
  LoadedModel lm = load_model(file);
  CHECK(lm.model.cond_table.empty());
  CHECK(lm.model.weights[0] == m.weights[0]);
}

TEST_CASE("adapter checkpoints round-trip with rank, scale, and targets") {
  TempDir dir;
  DenoiserModel m = make_model(7);
  RngStream rng(8, 0);
  LoraAdapter a = LoraAdapter::init(m, 4, rng);
  for (auto& u : a.up) {
    for (double& v : u) v = gaussian_pair(rng).x;
  }
  a.scale = 0.65;

  fs::path file = dir.path / "adapter.ddlab";
  save_adapter(file, a, m, {{"delta", 2.0}});
  LoadedAdapter la = load_adapter(file);
  CHECK(la.adapter.rank == 4);
  CHECK(la.adapter.scale == 0.65);
  CHECK(la.adapter.target_layers == a.target_layers);
  REQUIRE(la.adapter.down.size() == a.down.size());
  for (std::size_t t = 0; t < a.down.size(); ++t) {
    CHECK(la.adapter.down[t] == a.down[t]);
    CHECK(la.adapter.up[t] == a.up[t]);
  }
  CHECK(la.header["trained_on_role"] == "distilled");
  CHECK(la.header["delta"] == 2.0);

  // The restored adapter computes the identical forward pass.
  Vec2 live = forward(m, &a, {0.4, 0.1}, 0.3, 1);
  Vec2 restored = forward(m, &la.adapter, {0.4, 0.1}, 0.3, 1);
  CHECK(live.x == restored.x);
  CHECK(live.y == restored.y);
}

TEST_CASE("missing and malformed checkpoints raise typed errors") {
  TempDir dir;
  CHECK_THROWS_AS(load_model(dir.path / "absent.ddlab"), MissingArtifact);
  CHECK_THROWS_AS(load_adapter(dir.path / "absent.ddlab"), MissingArtifact);

  fs::path garbage = dir.path / "garbage.ddlab";
  write_file_atomic(garbage, "not a checkpoint at all");
  CHECK_THROWS_AS(load_model(garbage), BadCheckpoint);

  // Valid file, then truncated: parameter blocks are cut short.
  DenoiserModel m = make_model(9);
  fs::path good = dir.path / "good.ddlab";
  save_model(good, m);
  std::string data = slurp(good);
  fs::path truncated = dir.path / "truncated.ddlab";
  write_file_atomic(truncated, data.substr(0, data.size() - 16));
  CHECK_THROWS_AS(load_model(truncated), BadCheckpoint);

  // Trailing junk is also rejected: the block list must account for every byte.
  fs::path padded = dir.path / "padded.ddlab";
  write_file_atomic(padded, data + "junk");
  CHECK_THROWS_AS(load_model(padded), BadCheckpoint);

  // Wrong container kind.
  RngStream rng(10, 0);
  LoraAdapter a = LoraAdapter::init(m, 2, rng);
  fs::path adapter_file = dir.path / "adapter.ddlab";
  save_adapter(adapter_file, a, m);
  CHECK_THROWS_AS(load_model(adapter_file), BadCheckpoint);
  CHECK_THROWS_AS(load_adapter(good), BadCheckpoint);
}

TEST_CASE("atomic writes leave no temp files and create parents") {
  TempDir dir;
  fs::path nested = dir.path / "a" / "b" / "file.txt";
  write_file_atomic(nested, "payload");
  CHECK(slurp(nested) == "payload");
  CHECK_FALSE(fs::exists(nested.string() + ".tmp"));

  // Overwrite in place.
  write_file_atomic(nested, "second");
  CHECK(slurp(nested) == "second");
}
