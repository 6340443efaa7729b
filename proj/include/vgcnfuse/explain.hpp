#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vgcnfuse/graph.hpp"
#include "vgcnfuse/model.hpp"

// Attention attribution: Z = (x A~)^T (.) W ranks the vocabulary words
// behind each graph-embedding dimension; CLS attention rows expose what
// the encoder looked at.

namespace vgcnfuse {

struct DimensionWord {
  long id = 0;
  std::string word;
  double score = 0.0;
};

// W here is the v x g effective slab; candidates are the words with a
// nonzero footprint neighborhood (x A~ != 0), ranked by descending
// Z[:, dim] with ties broken by ascending word id
std::vector<std::vector<DimensionWord>> dimension_words(
    const std::vector<std::pair<int, int>>& doc_tf, const VocabGraph& graph,
    const std::vector<std::vector<double>>& weight_slab, long k, const Vocabulary& vocab);

// W_vh * W_hg collapsed to v x g (linearization of the two-layer VGCN)
std::vector<std::vector<double>> effective_weight_slab(Model<float>& model);

// CLS attention rows split into word-position and graph-position parts
struct ClsAttention {
  // [layer][head][position] over the stream's word positions (CLS
  // excluded) and graph positions respectively
  std::vector<std::vector<std::vector<double>>> word;
  std::vector<std::vector<std::vector<double>>> graph;
  std::vector<std::vector<double>> graph_mass;  // [layer][head], 0 when no graph tokens
};

ClsAttention cls_attention(const ForwardResult<float>& fwd, long example, long batch_size);

std::string attention_report_json(const EncodedDocument& doc, const Vocabulary& vocab,
                                  const ClsAttention& attn,
                                  const std::vector<std::vector<DimensionWord>>& dims,
                                  const std::vector<double>& probs, int predicted,
                                  std::optional<int> gold);

}  // namespace vgcnfuse
