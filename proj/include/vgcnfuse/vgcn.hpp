#pragma once

#include <vector>

#include "vgcnfuse/graph.hpp"
#include "vgcnfuse/rng.hpp"
#include "vgcnfuse/sparse.hpp"
#include "vgcnfuse/tensor.hpp"

// Vocabulary GCN: two bias-free layers over the normalized vocabulary
// graph. In embedding mode the second weight matrix emits g graph tokens
// per document; in classifier mode it emits class logits.

namespace vgcnfuse {

struct VgcnConfig {
  long hidden = 128;
  long graph_embed = 16;
};

template <typename S>
struct VgcnParams {
  Tensor<S> W_vh;   // v x h
  Tensor<S> W_out;  // h x g (embedding) or h x c (classifier)

  static VgcnParams init(long v, long h, long out, Rng& rng) {
    VgcnParams p;
    p.W_vh = Tensor<S>::uniform_init({v, h}, v, rng);
    p.W_out = Tensor<S>::uniform_init({h, out}, h, rng);
    return p;
  }
};

// term-frequency rows as a constant dense tensor [m, v]
template <typename S>
Tensor<S> tf_matrix(const std::vector<EncodedDocument>& batch, long v) {
  Tensor<S> tf = Tensor<S>::zeros({static_cast<long>(batch.size()), v});
  auto& d = tf.data();
  for (size_t i = 0; i < batch.size(); ++i)
    for (const auto& [id, count] : batch[i].vocab_tf) d[i * v + id] = static_cast<S>(count);
  return tf;
}

// X[d, :, j] = table[j, :] * tf[d, j], shape [m, e, v]
template <typename S>
Tensor<S> vgcn_slab(const Tensor<S>& table, const Tensor<S>& tf) {
  if (table.ndim() != 2 || tf.ndim() != 2 || table.dim(0) != tf.dim(1))
    throw ShapeMismatch("vgcn_slab: table " + shape_str(table.shape()) + " vs tf " +
                        shape_str(tf.shape()));
  long m = tf.dim(0), v = tf.dim(1), e = table.dim(1);
  Tensor<S> t = transpose(table, {1, 0});          // [e, v]
  Tensor<S> t3 = reshape(t, {1, e, v});            // [1, e, v]
  Tensor<S> tf3 = reshape(tf, {m, 1, v});          // [m, 1, v]
  return mul(t3, tf3);                             // [m, e, v]
}

// G_embedding = ReLU(X Ã W_vh) W_hg, emitted as [m, g, e]
template <typename S>
Tensor<S> vgcn_embed(const Tensor<S>& slab, const VocabGraph& graph, VgcnParams<S>& params) {
  if (slab.ndim() != 3 || slab.dim(2) != graph.size)
    throw ShapeMismatch("vgcn_embed: slab " + shape_str(slab.shape()) + " vs graph size " +
                        std::to_string(graph.size));
  if (params.W_vh.dim(0) != graph.size)
    throw ShapeMismatch("vgcn_embed: W_vh " + shape_str(params.W_vh.shape()));
  Tensor<S> conv = matmul_sparse(slab, graph.normalized);   // [m, e, v]
  Tensor<S> hidden = relu(matmul(conv, params.W_vh));       // [m, e, h]
  Tensor<S> out = matmul(hidden, params.W_out);             // [m, e, g]
  return transpose(out, {0, 2, 1});                         // [m, g, e]
}

template <typename S>
Tensor<S> vgcn_embed_from_tf(const Tensor<S>& table, const Tensor<S>& tf,
                             const VocabGraph& graph, VgcnParams<S>& params) {
  return vgcn_embed(vgcn_slab(table, tf), graph, params);
}

// VGCN = ReLU(X_mv Ã W_vh) W_hc on raw term-frequency rows
template <typename S>
Tensor<S> vgcn_classify(const Tensor<S>& tf, const VocabGraph& graph, VgcnParams<S>& params) {
  if (tf.ndim() != 2 || tf.dim(1) != graph.size)
    throw ShapeMismatch("vgcn_classify: tf " + shape_str(tf.shape()) + " vs graph size " +
                        std::to_string(graph.size));
  Tensor<S> conv = matmul_sparse(tf, graph.normalized);     // [m, v]
  Tensor<S> hidden = relu(matmul(conv, params.W_vh));       // [m, h]
  return matmul(hidden, params.W_out);                      // [m, c]
}

// embedding-slab input variant of the classifier; per-dimension class
// scores are pooled by mean over the embedding axis
template <typename S>
Tensor<S> vgcn_classify_slab(const Tensor<S>& table, const Tensor<S>& tf,
                             const VocabGraph& graph, VgcnParams<S>& params) {
  Tensor<S> conv = matmul_sparse(vgcn_slab(table, tf), graph.normalized);  // [m, e, v]
  Tensor<S> hidden = relu(matmul(conv, params.W_vh));                      // [m, e, h]
  Tensor<S> scores = matmul(hidden, params.W_out);                         // [m, e, c]
  return mean_axis(scores, 1);                                             // [m, c]
}

}  // namespace vgcnfuse
