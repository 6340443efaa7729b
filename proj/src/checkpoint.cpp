#include "vgcnfuse/checkpoint.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "vgcnfuse/io.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian float32");
static_assert(sizeof(float) == 4);

namespace vgcnfuse {

std::string model_config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["mode"] = mode_name(cfg.mode);
  j["classes"] = cfg.classes;
  j["seed"] = cfg.seed;
  j["vocab_size"] = cfg.vocab_size;
  j["encoder"] = {{"layers", cfg.encoder.layers},
                  {"heads", cfg.encoder.heads},
                  {"model_dim", cfg.encoder.model_dim},
                  {"ffn_dim", cfg.encoder.ffn_dim},
                  {"dropout", cfg.encoder.dropout},
                  {"max_len", cfg.encoder.max_len},
                  {"graph_tokens", cfg.encoder.graph_tokens},
                  {"ln_eps", cfg.encoder.ln_eps}};
  j["vgcn"] = {{"hidden", cfg.vgcn.hidden}, {"graph_embed", cfg.vgcn.graph_embed}};
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ModelConfig cfg;
  cfg.mode = mode_from(j["mode"].get<std::string>());
  cfg.classes = j["classes"].get<long>();
  cfg.seed = j["seed"].get<std::uint64_t>();
  cfg.vocab_size = j["vocab_size"].get<long>();
  const auto& e = j["encoder"];
  cfg.encoder.layers = e["layers"].get<long>();
  cfg.encoder.heads = e["heads"].get<long>();
  cfg.encoder.model_dim = e["model_dim"].get<long>();
  cfg.encoder.ffn_dim = e["ffn_dim"].get<long>();
  cfg.encoder.dropout = e["dropout"].get<double>();
  cfg.encoder.max_len = e["max_len"].get<long>();
  cfg.encoder.graph_tokens = e["graph_tokens"].get<long>();
  cfg.encoder.ln_eps = e["ln_eps"].get<double>();
  cfg.vgcn.hidden = j["vgcn"]["hidden"].get<long>();
  cfg.vgcn.graph_embed = j["vgcn"]["graph_embed"].get<long>();
  return cfg;
}

void save_checkpoint(Model<float>& model, const std::string& path) {
  nlohmann::json header;
  header["version"] = 1;
  header["config"] = nlohmann::json::parse(model_config_to_json(model.config));
  header["graph_hash"] = model.graph_hash;

  nlohmann::json params = nlohmann::json::array();
  long offset = 0;
  for (auto& [name, t] : model.registry) {
    params.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel();
  }
  header["params"] = std::move(params);

  std::string out = header.dump();
  out.push_back('\n');
  size_t blob_start = out.size();
  out.resize(blob_start + static_cast<size_t>(offset) * 4);
  char* blob = out.data() + blob_start;
  for (auto& [name, t] : model.registry) {
    std::memcpy(blob, t.data().data(), t.numel() * 4);
    blob += t.numel() * 4;
  }
  write_file_atomic(path, out);
}

namespace {

nlohmann::json read_header(const std::string& bytes, size_t& blob_start) {
  size_t nl = bytes.find('\n');
  if (nl == std::string::npos) throw Error("malformed checkpoint: no header line");
  blob_start = nl + 1;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed checkpoint header: ") + e.what());
  }
  if (!header.contains("version") || header["version"].get<int>() != 1)
    throw CheckpointVersionError("unsupported checkpoint version (expected 1)");
  return header;
}

}  // namespace

Model<float> load_checkpoint(const std::string& path) {
  std::string bytes = read_file(path);
  size_t blob_start = 0;
  nlohmann::json header = read_header(bytes, blob_start);

  ModelConfig cfg = model_config_from_json(header["config"].dump());
  Model<float> model(cfg);
  model.graph_hash = header["graph_hash"].get<std::string>();

  const char* blob = bytes.data() + blob_start;
  size_t blob_len = bytes.size() - blob_start;
  for (const auto& p : header["params"]) {
    std::string name = p["name"].get<std::string>();
    Shape shape = p["shape"].get<Shape>();
    long offset = p["offset"].get<long>();
    Tensor<float>& t = model.param(name);
    if (t.shape() != shape)
      throw Error("checkpoint parameter " + name + " has shape " + shape_str(shape) +
                  ", model expects " + shape_str(t.shape()));
    if (static_cast<size_t>(offset + t.numel()) * 4 > blob_len)
      throw Error("checkpoint blob truncated at parameter " + name);
    std::memcpy(t.data().data(), blob + offset * 4, t.numel() * 4);
  }
  return model;
}

std::string checkpoint_graph_hash(const std::string& path) {
  std::string bytes = read_file(path);
  size_t blob_start = 0;
  nlohmann::json header = read_header(bytes, blob_start);
  return header["graph_hash"].get<std::string>();
}

}  // namespace vgcnfuse
