#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vgcnfuse/rng.hpp"
#include "vgcnfuse/tensor.hpp"
#include "vgcnfuse/text.hpp"

// Multi-head self-attention encoder, post-layer-norm, GELU feed-forward,
// learned positional embeddings. Token streams are [CLS], g graph
// tokens, word tokens, then padding; word positional indices are the
// same with and without graph tokens.

namespace vgcnfuse {

struct EncoderConfig {
  long layers = 2;
  long heads = 4;
  long model_dim = 64;
  long ffn_dim = 0;  // 0 means 4 * model_dim
  double dropout = 0.2;
  long max_len = 200;
  long graph_tokens = 16;
  double ln_eps = 1e-5;

  long ffn() const { return ffn_dim > 0 ? ffn_dim : 4 * model_dim; }

  void validate() const {
    if (model_dim % heads != 0) throw ConfigMismatch("model_dim must be divisible by heads");
    if (layers < 0) throw ConfigMismatch("layers must be >= 0");
    if (max_len < 2) throw ConfigMismatch("max_len must be >= 2");
  }
};

enum class TokenKind : int8_t { kCls = 0, kGraph = 1, kWord = 2, kPad = 3 };

template <typename S>
struct TokenStream {
  Tensor<S> embedded;        // [m, T, e]
  Tensor<S> mask;            // [m, T], constant 0/1
  std::vector<int8_t> kinds; // m*T row-major
  long batch = 0;
  long length = 0;
};

template <typename S>
struct EncoderLayerParams {
  Tensor<S> Wq, bq, Wk, bk, Wv, bv, Wo, bo;
  Tensor<S> ln1_gamma, ln1_beta;
  Tensor<S> W1, b1, W2, b2;
  Tensor<S> ln2_gamma, ln2_beta;
};

template <typename S>
struct EncoderParams {
  Tensor<S> emb_word;      // [V, e]
  Tensor<S> emb_pos;       // [max_len, e]
  Tensor<S> emb_kind;      // [4, e]
  Tensor<S> emb_graphpos;  // [e], shared by all graph tokens (fusion modes only)
  std::vector<EncoderLayerParams<S>> layers;

  static EncoderParams init(long vocab_size, const EncoderConfig& cfg, bool with_graph,
                            Rng& rng) {
    long e = cfg.model_dim;
    EncoderParams p;
    p.emb_word = Tensor<S>::uniform_init({vocab_size, e}, e, rng);
    p.emb_pos = Tensor<S>::uniform_init({cfg.max_len, e}, e, rng);
    p.emb_kind = Tensor<S>::uniform_init({4, e}, e, rng);
    if (with_graph) p.emb_graphpos = Tensor<S>::uniform_init({e}, e, rng);
    for (long l = 0; l < cfg.layers; ++l) {
      EncoderLayerParams<S> lp;
      lp.Wq = Tensor<S>::uniform_init({e, e}, e, rng);
      lp.bq = Tensor<S>::zeros({e}, true);
      lp.Wk = Tensor<S>::uniform_init({e, e}, e, rng);
      lp.bk = Tensor<S>::zeros({e}, true);
      lp.Wv = Tensor<S>::uniform_init({e, e}, e, rng);
      lp.bv = Tensor<S>::zeros({e}, true);
      lp.Wo = Tensor<S>::uniform_init({e, e}, e, rng);
      lp.bo = Tensor<S>::zeros({e}, true);
      lp.ln1_gamma = Tensor<S>::full({e}, S(1));
      lp.ln1_gamma.set_requires_grad(true);
      lp.ln1_beta = Tensor<S>::zeros({e}, true);
      lp.W1 = Tensor<S>::uniform_init({e, cfg.ffn()}, e, rng);
      lp.b1 = Tensor<S>::zeros({cfg.ffn()}, true);
      lp.W2 = Tensor<S>::uniform_init({cfg.ffn(), e}, cfg.ffn(), rng);
      lp.b2 = Tensor<S>::zeros({e}, true);
      lp.ln2_gamma = Tensor<S>::full({e}, S(1));
      lp.ln2_gamma.set_requires_grad(true);
      lp.ln2_beta = Tensor<S>::zeros({e}, true);
      p.layers.push_back(std::move(lp));
    }
    return p;
  }
};

// Attention(Q, K, V) = Softmax(Q K^T / sqrt(d_k)) V. The additive mask
// (0 on valid, -1e30 on masked positions) pushes masked scores far
// enough that their softmax weight underflows to exactly zero.
template <typename S>
struct AttentionResult {
  Tensor<S> output;
  Tensor<S> weights;
};

template <typename S>
AttentionResult<S> attention(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v,
                             const Tensor<S>& additive_mask) {
  long dk = q.dim(q.ndim() - 1);
  Tensor<S> scores = scale(matmul(q, transpose_last(k)), 1.0 / std::sqrt(static_cast<double>(dk)));
  if (additive_mask.defined()) scores = add(scores, additive_mask);
  Tensor<S> weights = softmax(scores, scores.ndim() - 1);
  return {matmul(weights, v), weights};
}

inline constexpr double kMaskPenalty = -1e30;

// [m, T] 0/1 -> additive [m, 1, 1, T]
template <typename S>
Tensor<S> additive_mask_from(const Tensor<S>& mask01) {
  long m = mask01.dim(0), T = mask01.dim(1);
  Tensor<S> out = Tensor<S>::zeros({m, 1, 1, T});
  const auto& md = mask01.data();
  auto& od = out.data();
  for (long i = 0; i < m * T; ++i) od[i] = md[i] > S(0) ? S(0) : static_cast<S>(kMaskPenalty);
  return out;
}

// Builds the embedded token stream for a batch. graph_tokens, when
// defined, is [m, g, e]; a graph token whose vector is exactly all-zero
// carries no graph signal and is masked out, which is what makes the
// zeroed-VGCN model coincide with the plain encoder.
template <typename S>
TokenStream<S> assemble(const std::vector<EncodedDocument>& batch,
                        const Tensor<S>& graph_tokens, EncoderParams<S>& params,
                        const EncoderConfig& cfg) {
  long m = static_cast<long>(batch.size());
  long L = cfg.max_len;
  long e = cfg.model_dim;
  long g = graph_tokens.defined() ? graph_tokens.dim(1) : 0;
  if (graph_tokens.defined() &&
      (graph_tokens.ndim() != 3 || graph_tokens.dim(0) != m || graph_tokens.dim(2) != e))
    throw ShapeMismatch("assemble: graph tokens " + shape_str(graph_tokens.shape()));
  for (const auto& doc : batch)
    if (static_cast<long>(doc.token_ids.size()) != L)
      throw ShapeMismatch("assemble: document not encoded at max_len");

  // word-side lookups: [CLS] plus the body, positions 0 and 1..L-1
  std::vector<int32_t> cls_ids(m, Vocabulary::kCls);
  std::vector<int32_t> body_ids(m * (L - 1));
  std::vector<int32_t> body_kinds(m * (L - 1));
  for (long d = 0; d < m; ++d)
    for (long i = 1; i < L; ++i) {
      body_ids[d * (L - 1) + i - 1] = batch[d].token_ids[i];
      body_kinds[d * (L - 1) + i - 1] = batch[d].attention_mask[i]
                                            ? static_cast<int32_t>(TokenKind::kWord)
                                            : static_cast<int32_t>(TokenKind::kPad);
    }

  Tensor<S> cls_emb = embedding_lookup(params.emb_word, cls_ids, {m, 1});
  cls_emb = add(cls_emb, reshape(embedding_lookup(params.emb_pos, {0}, {1}), {1, 1, e}));
  cls_emb = add(cls_emb, reshape(embedding_lookup(params.emb_kind,
                                                  {static_cast<int32_t>(TokenKind::kCls)}, {1}),
                                 {1, 1, e}));

  std::vector<int32_t> pos_ids(L - 1);
  for (long i = 0; i < L - 1; ++i) pos_ids[i] = static_cast<int32_t>(i + 1);
  Tensor<S> body_emb = embedding_lookup(params.emb_word, body_ids, {m, L - 1});
  body_emb = add(body_emb, reshape(embedding_lookup(params.emb_pos, pos_ids, {L - 1}),
                                   {1, L - 1, e}));
  body_emb = add(body_emb, embedding_lookup(params.emb_kind, body_kinds, {m, L - 1}));

  TokenStream<S> stream;
  stream.batch = m;
  stream.length = 1 + g + (L - 1);
  stream.mask = Tensor<S>::zeros({m, stream.length});
  stream.kinds.assign(m * stream.length, static_cast<int8_t>(TokenKind::kPad));

  if (g > 0) {
    Tensor<S> gtok = add(graph_tokens, reshape(params.emb_graphpos, {1, 1, e}));
    gtok = add(gtok, reshape(embedding_lookup(params.emb_kind,
                                              {static_cast<int32_t>(TokenKind::kGraph)}, {1}),
                             {1, 1, e}));
    stream.embedded = concat<S>({cls_emb, gtok, body_emb}, 1);
  } else {
    stream.embedded = concat<S>({cls_emb, body_emb}, 1);
  }

  auto& maskd = stream.mask.data();
  const std::vector<S>* gt = graph_tokens.defined() ? &graph_tokens.data() : nullptr;
  for (long d = 0; d < m; ++d) {
    long base = d * stream.length;
    maskd[base] = S(1);
    stream.kinds[base] = static_cast<int8_t>(TokenKind::kCls);
    for (long t = 0; t < g; ++t) {
      bool live = false;
      for (long j = 0; j < e && !live; ++j) live = (*gt)[(d * g + t) * e + j] != S(0);
      maskd[base + 1 + t] = live ? S(1) : S(0);
      stream.kinds[base + 1 + t] = static_cast<int8_t>(TokenKind::kGraph);
    }
    for (long i = 1; i < L; ++i) {
      bool valid = batch[d].attention_mask[i] != 0;
      maskd[base + g + i] = valid ? S(1) : S(0);
      stream.kinds[base + g + i] =
          valid ? static_cast<int8_t>(TokenKind::kWord) : static_cast<int8_t>(TokenKind::kPad);
    }
  }
  return stream;
}

template <typename S>
struct EncodeResult {
  Tensor<S> hidden;                        // [m, T, e]
  std::vector<Tensor<S>> attention_maps;   // per layer, [m, H, T, T]
};

template <typename S>
EncodeResult<S> encode(const TokenStream<S>& stream, EncoderParams<S>& params,
                       const EncoderConfig& cfg, bool train, Rng& rng,
                       bool retain_attention = true) {
  long m = stream.batch, T = stream.length, e = cfg.model_dim, H = cfg.heads;
  long dh = e / H;
  double p = cfg.dropout;

  Tensor<S> additive = additive_mask_from(stream.mask);
  Tensor<S> h = stream.embedded;
  EncodeResult<S> result;

  for (auto& lp : params.layers) {
    auto project = [&](const Tensor<S>& W, const Tensor<S>& b) {
      Tensor<S> x = add(matmul(h, W), b);                   // [m, T, e]
      x = reshape(x, {m, T, H, dh});
      return transpose(x, {0, 2, 1, 3});                    // [m, H, T, dh]
    };
    Tensor<S> q = project(lp.Wq, lp.bq);
    Tensor<S> k = project(lp.Wk, lp.bk);
    Tensor<S> v = project(lp.Wv, lp.bv);

    Tensor<S> scores =
        scale(matmul(q, transpose_last(k)), 1.0 / std::sqrt(static_cast<double>(dh)));
    scores = add(scores, additive);
    Tensor<S> weights = softmax(scores, 3);                 // [m, H, T, T]
    if (retain_attention) result.attention_maps.push_back(weights);

    Tensor<S> ctx = matmul(dropout(weights, p, train, rng), v);  // [m, H, T, dh]
    ctx = reshape(transpose(ctx, {0, 2, 1, 3}), {m, T, e});
    Tensor<S> attn_out = add(matmul(ctx, lp.Wo), lp.bo);
    h = add(h, dropout(attn_out, p, train, rng));
    h = add(mul(layer_norm(h, cfg.ln_eps), lp.ln1_gamma), lp.ln1_beta);

    Tensor<S> ffn = add(matmul(gelu(add(matmul(h, lp.W1), lp.b1)), lp.W2), lp.b2);
    h = add(h, dropout(ffn, p, train, rng));
    h = add(mul(layer_norm(h, cfg.ln_eps), lp.ln2_gamma), lp.ln2_beta);
  }
  result.hidden = h;
  return result;
}

}  // namespace vgcnfuse
