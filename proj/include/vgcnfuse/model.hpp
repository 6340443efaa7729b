#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vgcnfuse/encoder.hpp"
#include "vgcnfuse/graph.hpp"
#include "vgcnfuse/vgcn.hpp"

namespace vgcnfuse {

enum class ModelMode { kVgcnBert, kBertOnly, kVgcnOnly, kVanillaConcat };

inline std::string mode_name(ModelMode m) {
  switch (m) {
    case ModelMode::kVgcnBert: return "vgcn-bert";
    case ModelMode::kBertOnly: return "bert-only";
    case ModelMode::kVgcnOnly: return "vgcn-only";
    case ModelMode::kVanillaConcat: return "vanilla-concat";
  }
  return "?";
}

inline ModelMode mode_from(const std::string& s) {
  if (s == "vgcn-bert") return ModelMode::kVgcnBert;
  if (s == "bert-only") return ModelMode::kBertOnly;
  if (s == "vgcn-only") return ModelMode::kVgcnOnly;
  if (s == "vanilla-concat") return ModelMode::kVanillaConcat;
  throw ConfigMismatch("unknown mode: " + s);
}

struct ModelConfig {
  ModelMode mode = ModelMode::kVgcnBert;
  EncoderConfig encoder;
  VgcnConfig vgcn;
  long classes = 2;
  std::uint64_t seed = 42;
  long vocab_size = 0;

  bool uses_encoder() const { return mode != ModelMode::kVgcnOnly; }
  bool uses_vgcn() const { return mode != ModelMode::kBertOnly; }

  void validate() const {
    if (classes < 2) throw ConfigMismatch("classes must be >= 2");
    if (vocab_size < Vocabulary::kNumSpecials) throw ConfigMismatch("vocab_size not set");
    if (uses_encoder()) encoder.validate();
    if (mode == ModelMode::kVgcnBert && encoder.graph_tokens != vgcn.graph_embed)
      throw ConfigMismatch("encoder.graph_tokens must equal vgcn.graph_embed in vgcn-bert mode");
    if (uses_vgcn() && vgcn.hidden < 1) throw ConfigMismatch("vgcn.hidden must be >= 1");
  }
};

template <typename S>
struct ForwardResult {
  Tensor<S> logits;                        // [m, c]
  std::vector<Tensor<S>> attention_maps;   // per layer [m, H, T, T]; empty if not retained
  std::vector<int8_t> token_kinds;         // [m * stream_length]
  long stream_length = 0;
};

// All trainable tensors of one model, with deterministic registration
// order (which is also the init draw order and the optimizer order).
template <typename S>
class Model {
 public:
  explicit Model(const ModelConfig& cfg) : config(cfg), rng(cfg.seed) {
    config.validate();
    const EncoderConfig& ec = config.encoder;
    long e = ec.model_dim;
    if (config.uses_encoder()) {
      enc = EncoderParams<S>::init(config.vocab_size, ec, config.mode == ModelMode::kVgcnBert,
                                   rng);
      register_tensor("emb.word", enc.emb_word);
      register_tensor("emb.pos", enc.emb_pos);
      register_tensor("emb.kind", enc.emb_kind);
      if (config.mode == ModelMode::kVgcnBert) register_tensor("emb.graphpos", enc.emb_graphpos);
      for (size_t l = 0; l < enc.layers.size(); ++l) {
        std::string p = "enc.layer" + std::to_string(l) + ".";
        auto& lp = enc.layers[l];
        register_tensor(p + "attn.Wq", lp.Wq);
        register_tensor(p + "attn.bq", lp.bq);
        register_tensor(p + "attn.Wk", lp.Wk);
        register_tensor(p + "attn.bk", lp.bk);
        register_tensor(p + "attn.Wv", lp.Wv);
        register_tensor(p + "attn.bv", lp.bv);
        register_tensor(p + "attn.Wo", lp.Wo);
        register_tensor(p + "attn.bo", lp.bo);
        register_tensor(p + "ln1.gamma", lp.ln1_gamma);
        register_tensor(p + "ln1.beta", lp.ln1_beta);
        register_tensor(p + "ffn.W1", lp.W1);
        register_tensor(p + "ffn.b1", lp.b1);
        register_tensor(p + "ffn.W2", lp.W2);
        register_tensor(p + "ffn.b2", lp.b2);
        register_tensor(p + "ln2.gamma", lp.ln2_gamma);
        register_tensor(p + "ln2.beta", lp.ln2_beta);
      }
    }
    if (config.uses_vgcn()) {
      bool classifier = config.mode == ModelMode::kVgcnOnly;
      long out = classifier ? config.classes : config.vgcn.graph_embed;
      vgcn = VgcnParams<S>::init(config.vocab_size, config.vgcn.hidden, out, rng);
      register_tensor("vgcn.W_vh", vgcn.W_vh);
      register_tensor(classifier ? "vgcn.W_hc" : "vgcn.W_hg", vgcn.W_out);
    }
    if (config.mode == ModelMode::kVgcnBert || config.mode == ModelMode::kBertOnly) {
      head_W = Tensor<S>::uniform_init({e, config.classes}, e, rng);
      head_b = Tensor<S>::zeros({config.classes}, true);
      register_tensor("head.W", head_W);
      register_tensor("head.b", head_b);
    } else if (config.mode == ModelMode::kVanillaConcat) {
      head_W = Tensor<S>::uniform_init({2 * e, config.classes}, 2 * e, rng);
      head_b = Tensor<S>::zeros({config.classes}, true);
      register_tensor("head.W", head_W);
      register_tensor("head.b", head_b);
    }
  }

  ForwardResult<S> forward(const std::vector<EncodedDocument>& batch, const VocabGraph& graph,
                           bool train, bool retain_attention = false) {
    if (graph.size != config.vocab_size)
      throw ConfigMismatch("graph size " + std::to_string(graph.size) +
                           " does not match model vocab_size " +
                           std::to_string(config.vocab_size));
    ForwardResult<S> result;
    Tensor<S> tf;
    if (config.uses_vgcn()) tf = tf_matrix<S>(batch, config.vocab_size);

    if (config.mode == ModelMode::kVgcnOnly) {
      result.logits = vgcn_classify(tf, graph, vgcn);
      return result;
    }

    Tensor<S> graph_tokens;  // stays undefined outside vgcn-bert
    if (config.mode == ModelMode::kVgcnBert)
      graph_tokens = vgcn_embed_from_tf(enc.emb_word, tf, graph, vgcn);

    TokenStream<S> stream = assemble(batch, graph_tokens, enc, config.encoder);
    EncodeResult<S> encres = encode(stream, enc, config.encoder, train, rng, retain_attention);
    Tensor<S> cls = select_index(encres.hidden, 1, 0);  // [m, e]

    if (config.mode == ModelMode::kVanillaConcat) {
      Tensor<S> gtok = vgcn_embed_from_tf(enc.emb_word, tf, graph, vgcn);  // [m, g, e]
      Tensor<S> pooled = mean_axis(gtok, 1);                               // [m, e]
      Tensor<S> fused = relu(concat<S>({cls, pooled}, 1));                 // [m, 2e]
      fused = dropout(fused, config.encoder.dropout, train, rng);
      result.logits = add(matmul(fused, head_W), head_b);
    } else {
      Tensor<S> pooled = dropout(cls, config.encoder.dropout, train, rng);
      result.logits = add(matmul(pooled, head_W), head_b);
    }
    result.attention_maps = std::move(encres.attention_maps);
    result.token_kinds = stream.kinds;
    result.stream_length = stream.length;
    return result;
  }

  std::vector<Tensor<S>> parameters() {
    std::vector<Tensor<S>> out;
    for (auto& [name, t] : registry) out.push_back(t);
    return out;
  }

  Tensor<S>& param(const std::string& name) {
    for (auto& [n, t] : registry)
      if (n == name) return t;
    throw ConfigMismatch("no parameter named " + name);
  }

  bool has_param(const std::string& name) const {
    for (const auto& [n, t] : registry)
      if (n == name) return true;
    return false;
  }

  void zero_grads() {
    for (auto& [n, t] : registry) t.zero_grad();
  }

  ModelConfig config;
  EncoderParams<S> enc;
  VgcnParams<S> vgcn;
  Tensor<S> head_W, head_b;
  std::vector<std::pair<std::string, Tensor<S>>> registry;
  Rng rng;
  std::string graph_hash;  // content hash of the graph file trained against

 private:
  void register_tensor(const std::string& name, Tensor<S>& t) { registry.emplace_back(name, t); }
};

using ModelF = Model<float>;
using ModelD = Model<double>;

}  // namespace vgcnfuse
