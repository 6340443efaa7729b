#include "vgcnfuse/runconfig.hpp"

#include <set>

#include <json.hpp>

#include "vgcnfuse/io.hpp"

namespace vgcnfuse {

namespace {

void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [key, val] : obj.items()) {
    (void)val;
    if (!allowed.count(key))
      throw ConfigMismatch("unknown config key \"" + key + "\" in " + where);
  }
}

}  // namespace

RunConfig RunConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  reject_unknown(j, {"paths", "model", "train", "graph_build"}, "config root");
  RunConfig cfg;

  if (j.contains("paths")) {
    const auto& p = j["paths"];
    reject_unknown(p, {"corpus", "val", "test", "vocab", "graph", "checkpoint", "out"},
                   "paths");
    if (p.contains("corpus")) cfg.corpus = p["corpus"].get<std::string>();
    if (p.contains("val")) cfg.val = p["val"].get<std::string>();
    if (p.contains("test")) cfg.test = p["test"].get<std::string>();
    if (p.contains("vocab")) cfg.vocab = p["vocab"].get<std::string>();
    if (p.contains("graph")) cfg.graph = p["graph"].get<std::string>();
    if (p.contains("checkpoint")) cfg.checkpoint = p["checkpoint"].get<std::string>();
    if (p.contains("out")) cfg.out = p["out"].get<std::string>();
  }

  if (j.contains("model")) {
    const auto& m = j["model"];
    reject_unknown(m, {"mode", "classes", "seed", "encoder", "vgcn"}, "model");
    if (m.contains("mode")) cfg.model.mode = mode_from(m["mode"].get<std::string>());
    if (m.contains("classes")) cfg.model.classes = m["classes"].get<long>();
    if (m.contains("seed")) cfg.model.seed = m["seed"].get<std::uint64_t>();
    if (m.contains("encoder")) {
      const auto& e = m["encoder"];
      reject_unknown(e,
                     {"layers", "heads", "model_dim", "ffn_dim", "dropout", "max_len",
                      "graph_tokens", "ln_eps"},
                     "model.encoder");
      if (e.contains("layers")) cfg.model.encoder.layers = e["layers"].get<long>();
      if (e.contains("heads")) cfg.model.encoder.heads = e["heads"].get<long>();
      if (e.contains("model_dim")) cfg.model.encoder.model_dim = e["model_dim"].get<long>();
      if (e.contains("ffn_dim")) cfg.model.encoder.ffn_dim = e["ffn_dim"].get<long>();
      if (e.contains("dropout")) cfg.model.encoder.dropout = e["dropout"].get<double>();
      if (e.contains("max_len")) cfg.model.encoder.max_len = e["max_len"].get<long>();
      if (e.contains("graph_tokens"))
        cfg.model.encoder.graph_tokens = e["graph_tokens"].get<long>();
      if (e.contains("ln_eps")) cfg.model.encoder.ln_eps = e["ln_eps"].get<double>();
    }
    if (m.contains("vgcn")) {
      const auto& v = m["vgcn"];
      reject_unknown(v, {"hidden", "graph_embed"}, "model.vgcn");
      if (v.contains("hidden")) cfg.model.vgcn.hidden = v["hidden"].get<long>();
      if (v.contains("graph_embed")) cfg.model.vgcn.graph_embed = v["graph_embed"].get<long>();
    }
  }

  if (j.contains("train")) {
    const auto& t = j["train"];
    reject_unknown(t, {"epochs", "batch_size", "lr", "weight_decay", "loss", "seed"}, "train");
    if (t.contains("epochs")) cfg.trainer.epochs = t["epochs"].get<int>();
    if (t.contains("batch_size")) cfg.trainer.batch_size = t["batch_size"].get<int>();
    if (t.contains("lr")) cfg.trainer.lr = t["lr"].get<double>();
    if (t.contains("weight_decay")) cfg.trainer.weight_decay = t["weight_decay"].get<double>();
    if (t.contains("loss")) cfg.trainer.loss = loss_from(t["loss"].get<std::string>());
    if (t.contains("seed")) cfg.trainer.seed = t["seed"].get<std::uint64_t>();
  }

  if (j.contains("graph_build")) {
    const auto& g = j["graph_build"];
    reject_unknown(g, {"min_freq", "npmi_threshold"}, "graph_build");
    if (g.contains("min_freq")) cfg.min_freq = g["min_freq"].get<int>();
    if (g.contains("npmi_threshold")) cfg.npmi_threshold = g["npmi_threshold"].get<double>();
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) { return from_json(read_file(path)); }

std::string RunConfig::to_json() const {
  nlohmann::json j;
  j["paths"] = {{"corpus", corpus}, {"val", val},       {"test", test},
                {"vocab", vocab},   {"graph", graph},   {"checkpoint", checkpoint},
                {"out", out}};
  j["model"] = nlohmann::json::parse(model_config_to_json(model));
  j["train"] = {{"epochs", trainer.epochs},
                {"batch_size", trainer.batch_size},
                {"lr", trainer.lr},
                {"weight_decay", trainer.weight_decay},
                {"loss", loss_name(trainer.loss)},
                {"seed", trainer.seed}};
  j["graph_build"] = {{"min_freq", min_freq}, {"npmi_threshold", npmi_threshold}};
  return j.dump();
}

}  // namespace vgcnfuse
