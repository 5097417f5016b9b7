#include "ddlab/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "ddlab/errors.hpp"

namespace ddlab {

namespace {

using nlohmann::json;

void append_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void append_block(std::string& out, const std::vector<double>& b) {
  static_assert(sizeof(double) == 8);
  for (double d : b) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    append_u64_le(out, bits);
  }
}

std::vector<double> read_block(const unsigned char* p, std::size_t count) {
  std::vector<double> b(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = read_u64_le(p + 8 * i);
    std::memcpy(&b[i], &bits, 8);
  }
  return b;
}

std::string read_whole_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("checkpoint not found: " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return data;
}

struct Block {
  std::string name;
  std::size_t rows, cols;
  const std::vector<double>* data;
};

std::string pack(const json& header_in, const std::vector<Block>& blocks) {
  json header = header_in;
  json jb = json::array();
  for (const Block& b : blocks) {
    jb.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
  }
  header["blocks"] = jb;
  std::string hs = header.dump();
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  append_u64_le(out, hs.size());
  out += hs;
  for (const Block& b : blocks) append_block(out, *b.data);
  return out;
}

struct Parsed {
  json header;
  std::vector<std::vector<double>> blocks;
};

Parsed unpack(const std::string& data, const std::string& what) {
  if (data.size() < sizeof(kCheckpointMagic) + 8 ||
      std::memcmp(data.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw BadCheckpoint(what + ": bad magic");
  }
  const unsigned char* p = reinterpret_cast<const unsigned char*>(data.data());
  std::uint64_t hlen = read_u64_le(p + sizeof(kCheckpointMagic));
  std::size_t off = sizeof(kCheckpointMagic) + 8;
  if (off + hlen > data.size()) throw BadCheckpoint(what + ": truncated header");
  json header;
  try {
    header = json::parse(data.substr(off, hlen));
  } catch (const json::exception& e) {
    throw BadCheckpoint(what + ": header is not valid JSON: " + e.what());
  }
  off += hlen;
  if (!header.contains("blocks") || !header["blocks"].is_array()) {
    throw BadCheckpoint(what + ": header lacks a blocks list");
  }
  Parsed out;
  out.header = header;
  for (const json& jb : header["blocks"]) {
    std::size_t count = jb.at("rows").get<std::size_t>() * jb.at("cols").get<std::size_t>();
    if (off + 8 * count > data.size()) throw BadCheckpoint(what + ": truncated block");
    out.blocks.push_back(read_block(p + off, count));
    off += 8 * count;
  }
  if (off != data.size()) throw BadCheckpoint(what + ": trailing bytes");
  return out;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("short write: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void save_model(const std::filesystem::path& path, const DenoiserModel& model,
                const nlohmann::json& extra) {
  json header = extra;
  header["format"] = "DDLAB1";
  header["kind"] = "model";
  header["role"] = to_string(model.role);
  header["architecture"] = {{"hidden", model.cfg.hidden},
                            {"time_embed_dim", model.cfg.time_embed_dim},
                            {"cond_embed_dim", model.cfg.cond_embed_dim},
                            {"n_conditions", model.cfg.n_conditions}};
  std::vector<Block> blocks;
  for (std::size_t l = 0; l < model.weights.size(); ++l) {
    int li = static_cast<int>(l);
    blocks.push_back({"w" + std::to_string(l),
                      static_cast<std::size_t>(model.layer_out(li)),
                      static_cast<std::size_t>(model.layer_in(li)),
                      &model.weights[l]});
    blocks.push_back({"b" + std::to_string(l),
                      static_cast<std::size_t>(model.layer_out(li)), 1,
                      &model.biases[l]});
  }
  if (!model.cond_table.empty()) {
    blocks.push_back({"cond_table",
                      static_cast<std::size_t>(model.cfg.n_conditions + 1),
                      static_cast<std::size_t>(model.cfg.cond_embed_dim),
                      &model.cond_table});
  }
  write_file_atomic(path, pack(header, blocks));
}

LoadedModel load_model(const std::filesystem::path& path) {
  Parsed p = unpack(read_whole_file(path), path.string());
  if (p.header.value("kind", "") != "model") {
    throw BadCheckpoint(path.string() + ": not a model checkpoint");
  }
  LoadedModel out;
  out.header = p.header;
  DenoiserModel& m = out.model;
  try {
    const json& arch = p.header.at("architecture");
    m.cfg.hidden = arch.at("hidden").get<std::vector<int>>();
    m.cfg.time_embed_dim = arch.at("time_embed_dim").get<int>();
    m.cfg.cond_embed_dim = arch.at("cond_embed_dim").get<int>();
    m.cfg.n_conditions = arch.at("n_conditions").get<int>();
    m.role = model_role_from_string(p.header.at("role").get<std::string>());
  } catch (const json::exception& e) {
    throw BadCheckpoint(path.string() + ": bad architecture: " + e.what());
  }
  int L = m.cfg.n_linear();
  std::size_t want = static_cast<std::size_t>(2 * L) + (m.cfg.n_conditions > 0 ? 1 : 0);
  if (p.blocks.size() != want) {
    throw BadCheckpoint(path.string() + ": block count does not match architecture");
  }
  for (int l = 0; l < L; ++l) {
    auto& w = p.blocks[static_cast<std::size_t>(2 * l)];
    auto& b = p.blocks[static_cast<std::size_t>(2 * l + 1)];
    std::size_t wn = static_cast<std::size_t>(m.layer_in(l)) *
                     static_cast<std::size_t>(m.layer_out(l));
    if (w.size() != wn || b.size() != static_cast<std::size_t>(m.layer_out(l))) {
      throw BadCheckpoint(path.string() + ": block shape mismatch");
    }
    m.weights.push_back(std::move(w));
    m.biases.push_back(std::move(b));
  }
  if (m.cfg.n_conditions > 0) {
    auto& c = p.blocks.back();
    if (c.size() != static_cast<std::size_t>(m.cfg.n_conditions + 1) *
                        static_cast<std::size_t>(m.cfg.cond_embed_dim)) {
      throw BadCheckpoint(path.string() + ": condition table shape mismatch");
    }
    m.cond_table = std::move(c);
  }
  return out;
}

void save_adapter(const std::filesystem::path& path, const LoraAdapter& adapter,
                  const DenoiserModel& trained_on, const nlohmann::json& extra) {
  json header = extra;
  header["format"] = "DDLAB1";
  header["kind"] = "lora";
  header["rank"] = adapter.rank;
  header["scale"] = adapter.scale;
  header["target_layers"] = adapter.target_layers;
  header["trained_on_role"] = to_string(trained_on.role);
  header["architecture"] = {{"hidden", trained_on.cfg.hidden},
                            {"time_embed_dim", trained_on.cfg.time_embed_dim},
                            {"cond_embed_dim", trained_on.cfg.cond_embed_dim},
                            {"n_conditions", trained_on.cfg.n_conditions}};
  std::vector<Block> blocks;
  for (std::size_t t = 0; t < adapter.target_layers.size(); ++t) {
    int l = adapter.target_layers[t];
    std::size_t in = adapter.down[t].size() / static_cast<std::size_t>(adapter.rank);
    std::size_t out = adapter.up[t].size() / static_cast<std::size_t>(adapter.rank);
    blocks.push_back({"down" + std::to_string(l),
                      static_cast<std::size_t>(adapter.rank), in, &adapter.down[t]});
    blocks.push_back({"up" + std::to_string(l), out,
                      static_cast<std::size_t>(adapter.rank), &adapter.up[t]});
  }
  write_file_atomic(path, pack(header, blocks));
}

LoadedAdapter load_adapter(const std::filesystem::path& path) {
  Parsed p = unpack(read_whole_file(path), path.string());
  if (p.header.value("kind", "") != "lora") {
    throw BadCheckpoint(path.string() + ": not an adapter checkpoint");
  }
  LoadedAdapter out;
  out.header = p.header;
  LoraAdapter& a = out.adapter;
  try {
    a.rank = p.header.at("rank").get<int>();
    a.scale = p.header.at("scale").get<double>();
    a.target_layers = p.header.at("target_layers").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw BadCheckpoint(path.string() + ": bad adapter header: " + e.what());
  }
  if (p.blocks.size() != 2 * a.target_layers.size()) {
    throw BadCheckpoint(path.string() + ": adapter block count mismatch");
  }
  for (std::size_t t = 0; t < a.target_layers.size(); ++t) {
    a.down.push_back(std::move(p.blocks[2 * t]));
    a.up.push_back(std::move(p.blocks[2 * t + 1]));
  }
  return out;
}

}  // namespace ddlab
