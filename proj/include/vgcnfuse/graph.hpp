#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vgcnfuse/sparse.hpp"
#include "vgcnfuse/text.hpp"

namespace vgcnfuse {

// Sentence-window counts: one window per document, presence-based.
struct CooccurrenceCounts {
  long n_windows = 0;
  std::vector<long> word_windows;                       // #W(i), size v
  std::map<std::pair<long, long>, long> pair_windows;   // (i<j) -> #W(i,j)

  long pair_count(long i, long j) const {
    if (i > j) std::swap(i, j);
    auto it = pair_windows.find({i, j});
    return it == pair_windows.end() ? 0 : it->second;
  }
};

struct VocabGraph {
  long size = 0;
  double threshold = 0.2;
  long edge_count = 0;  // off-diagonal, counted once per pair
  std::shared_ptr<CsrMatrix> adjacency;   // A: raw NPMI off-diagonal, unit diagonal
  std::shared_ptr<CsrMatrix> normalized;  // A~ = D^{-1/2} A D^{-1/2}

  double density() const {
    return size > 1 ? 2.0 * static_cast<double>(edge_count) /
                          (static_cast<double>(size) * static_cast<double>(size - 1))
                    : 0.0;
  }

  std::string to_json() const;
  static VocabGraph from_json(const std::string& json_text);
  void save(const std::string& path) const;
  static VocabGraph load(const std::string& path);
};

CooccurrenceCounts count_windows(const std::vector<EncodedDocument>& corpus, long vocab_size,
                                 int threads = 1);

// Eq: NPMI(i,j) = -(1/log p(i,j)) log(p(i,j)/(p(i)p(j))), natural log.
// nullopt when the pair never co-occurs; 1 when p(i,j) = 1.
std::optional<double> npmi(const CooccurrenceCounts& counts, long i, long j);

// off-diagonal edge iff NPMI > threshold; diagonal fixed at 1
VocabGraph build_graph(const CooccurrenceCounts& counts, double threshold);

// vocab_tf row vector times A~, returned sparse and id-sorted
std::vector<std::pair<long, double>> subgraph_slice(
    const VocabGraph& graph, const std::vector<std::pair<int, int>>& vocab_tf);

}  // namespace vgcnfuse
