#include "vgcnfuse/explain.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace vgcnfuse {

std::vector<std::vector<DimensionWord>> dimension_words(
    const std::vector<std::pair<int, int>>& doc_tf, const VocabGraph& graph,
    const std::vector<std::vector<double>>& weight_slab, long k, const Vocabulary& vocab) {
  if (k < 1) throw Error("dimension_words: k must be >= 1");
  if (static_cast<long>(weight_slab.size()) != graph.size)
    throw ShapeMismatch("dimension_words: weight slab rows vs graph size");
  long g = weight_slab.empty() ? 0 : static_cast<long>(weight_slab[0].size());

  // footprint neighborhood s = x * A~; words outside it score exactly 0
  // and never enter a ranking
  std::vector<std::pair<long, double>> s = subgraph_slice(graph, doc_tf);

  std::vector<std::vector<DimensionWord>> out(g);
  if (s.empty()) return out;  // empty footprint: empty rankings

  for (long dim = 0; dim < g; ++dim) {
    std::vector<DimensionWord> ranked;
    ranked.reserve(s.size());
    for (const auto& [id, sv] : s)
      ranked.push_back({id, vocab.tokens[id], sv * weight_slab[id][dim]});
    std::sort(ranked.begin(), ranked.end(), [](const DimensionWord& a, const DimensionWord& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.id < b.id;
    });
    if (static_cast<long>(ranked.size()) > k) ranked.resize(k);
    out[dim] = std::move(ranked);
  }
  return out;
}

std::vector<std::vector<double>> effective_weight_slab(Model<float>& model) {
  if (!model.config.uses_vgcn())
    throw ConfigMismatch("model mode " + mode_name(model.config.mode) + " has no VGCN weights");
  const auto& wvh = model.vgcn.W_vh;
  const auto& wout = model.vgcn.W_out;
  long v = wvh.dim(0), h = wvh.dim(1), g = wout.dim(1);
  std::vector<std::vector<double>> slab(v, std::vector<double>(g, 0.0));
  for (long i = 0; i < v; ++i)
    for (long p = 0; p < h; ++p) {
      double w = static_cast<double>(wvh.data()[i * h + p]);
      if (w == 0.0) continue;
      for (long t = 0; t < g; ++t)
        slab[i][t] += w * static_cast<double>(wout.data()[p * g + t]);
    }
  return slab;
}

ClsAttention cls_attention(const ForwardResult<float>& fwd, long example, long batch_size) {
  if (fwd.attention_maps.empty()) throw MissingAttention();
  ClsAttention out;
  long T = fwd.stream_length;
  (void)batch_size;
  for (const auto& map : fwd.attention_maps) {
    long H = map.dim(1);
    std::vector<std::vector<double>> word_rows, graph_rows;
    std::vector<double> mass_row;
    for (long h = 0; h < H; ++h) {
      std::vector<double> word, graph;
      double mass = 0.0;
      for (long t = 1; t < T; ++t) {
        double w = static_cast<double>(map.at({example, h, 0, t}));
        auto kind = static_cast<TokenKind>(fwd.token_kinds[example * T + t]);
        if (kind == TokenKind::kGraph) {
          graph.push_back(w);
          mass += w;
        } else {
          word.push_back(w);
        }
      }
      word_rows.push_back(std::move(word));
      graph_rows.push_back(std::move(graph));
      mass_row.push_back(mass);
    }
    out.word.push_back(std::move(word_rows));
    out.graph.push_back(std::move(graph_rows));
    out.graph_mass.push_back(std::move(mass_row));
  }
  return out;
}

std::string attention_report_json(const EncodedDocument& doc, const Vocabulary& vocab,
                                  const ClsAttention& attn,
                                  const std::vector<std::vector<DimensionWord>>& dims,
                                  const std::vector<double>& probs, int predicted,
                                  std::optional<int> gold) {
  nlohmann::json j;
  j["version"] = 1;
  nlohmann::json tokens = nlohmann::json::array();
  for (size_t i = 0; i < doc.token_ids.size(); ++i) {
    if (!doc.attention_mask[i]) break;
    tokens.push_back({{"kind", i == 0 ? "cls" : "word"}, {"text", vocab.tokens[doc.token_ids[i]]}});
  }
  j["tokens"] = std::move(tokens);
  j["cls_attention"] = {{"word", attn.word}, {"graph", attn.graph},
                        {"graph_mass", attn.graph_mass}};
  nlohmann::json dj = nlohmann::json::array();
  for (const auto& dim : dims) {
    nlohmann::json row = nlohmann::json::array();
    for (const auto& w : dim) row.push_back({{"id", w.id}, {"word", w.word}, {"score", w.score}});
    dj.push_back(std::move(row));
  }
  j["dimension_words"] = std::move(dj);
  j["predicted"] = predicted;
  j["probs"] = probs;
  if (gold)
    j["gold"] = *gold;
  else
    j["gold"] = nullptr;
  return j.dump();
}

}  // namespace vgcnfuse
