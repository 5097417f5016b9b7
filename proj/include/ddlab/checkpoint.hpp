#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"

#include "ddlab/denoiser.hpp"

namespace ddlab {

// Single-file container: 6 magic bytes "DDLAB1", a little-endian uint64 with
// the JSON header length, the UTF-8 header, then the parameter blocks as
// little-endian float64 in the order the header's "blocks" list declares.
// Files are written to a temp sibling and renamed into place, so readers
// never observe a half-written file.

inline constexpr char kCheckpointMagic[6] = {'D', 'D', 'L', 'A', 'B', '1'};

// extra is merged into the header (training settings, seeds, schedule id,
// distillation method, ...) and returned verbatim on load.
void save_model(const std::filesystem::path& path, const DenoiserModel& model,
                const nlohmann::json& extra = nlohmann::json::object());

struct LoadedModel {
  DenoiserModel model;
  nlohmann::json header;
};

// Throws MissingArtifact when absent, BadCheckpoint on magic/shape/size
// problems.
LoadedModel load_model(const std::filesystem::path& path);

void save_adapter(const std::filesystem::path& path, const LoraAdapter& adapter,
                  const DenoiserModel& trained_on,
                  const nlohmann::json& extra = nlohmann::json::object());

struct LoadedAdapter {
  LoraAdapter adapter;
  nlohmann::json header;
};

LoadedAdapter load_adapter(const std::filesystem::path& path);

// Atomic small-file write used for every artifact the tool produces.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents);

}  // namespace ddlab
