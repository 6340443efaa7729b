#include "vgcnfuse/graph.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <json.hpp>

#include "vgcnfuse/io.hpp"

namespace vgcnfuse {

namespace {

struct PartialCounts {
  long n_windows = 0;
  std::vector<long> word_windows;
  std::map<std::pair<long, long>, long> pair_windows;
};

// shared by build and reload so both produce the identical A~
void attach_normalized(VocabGraph& graph) {
  long v = graph.size;
  std::vector<double> degree(v, 0.0);
  const CsrMatrix& A = *graph.adjacency;
  for (long i = 0; i < v; ++i)
    for (long k = A.indptr[i]; k < A.indptr[i + 1]; ++k) degree[i] += A.values[k];
  std::vector<double> dinv(v);
  for (long i = 0; i < v; ++i) {
    if (degree[i] <= 0.0)
      throw GraphError("nonpositive degree at node " + std::to_string(i) +
                       "; normalization needs positive row sums");
    dinv[i] = 1.0 / std::sqrt(degree[i]);
  }
  auto norm = std::make_shared<CsrMatrix>(A);
  for (long i = 0; i < v; ++i)
    for (long k = norm->indptr[i]; k < norm->indptr[i + 1]; ++k) {
      long j = norm->indices[k];
      // canonical factor order keeps A~ bit-identical under transposition
      norm->values[k] = A.values[k] * (dinv[std::min(i, j)] * dinv[std::max(i, j)]);
    }
  graph.normalized = std::move(norm);
}

void count_range(const std::vector<EncodedDocument>& corpus, size_t lo, size_t hi,
                 long vocab_size, PartialCounts& out) {
  out.word_windows.assign(vocab_size, 0);
  for (size_t d = lo; d < hi; ++d) {
    // vocab_tf is id-sorted with unique ids: exactly the presence set
    const auto& tf = corpus[d].vocab_tf;
    out.n_windows++;
    for (size_t a = 0; a < tf.size(); ++a) {
      out.word_windows[tf[a].first]++;
      for (size_t b = a + 1; b < tf.size(); ++b)
        out.pair_windows[{tf[a].first, tf[b].first}]++;
    }
  }
}

}  // namespace

CooccurrenceCounts count_windows(const std::vector<EncodedDocument>& corpus, long vocab_size,
                                 int threads) {
  threads = std::max(1, threads);
  CooccurrenceCounts counts;
  counts.word_windows.assign(vocab_size, 0);
  if (threads == 1 || corpus.size() < 64) {
    PartialCounts p;
    count_range(corpus, 0, corpus.size(), vocab_size, p);
    counts.n_windows = p.n_windows;
    counts.word_windows = std::move(p.word_windows);
    counts.pair_windows = std::move(p.pair_windows);
    return counts;
  }
  size_t n = corpus.size();
  size_t nthreads = std::min<size_t>(threads, n);
  std::vector<PartialCounts> partial(nthreads);
  std::vector<std::thread> pool;
  for (size_t t = 0; t < nthreads; ++t) {
    size_t lo = n * t / nthreads, hi = n * (t + 1) / nthreads;
    pool.emplace_back(count_range, std::cref(corpus), lo, hi, vocab_size, std::ref(partial[t]));
  }
  for (auto& th : pool) th.join();
  for (const auto& p : partial) {
    counts.n_windows += p.n_windows;
    for (long i = 0; i < vocab_size; ++i) counts.word_windows[i] += p.word_windows[i];
    for (const auto& [key, c] : p.pair_windows) counts.pair_windows[key] += c;
  }
  return counts;
}

std::optional<double> npmi(const CooccurrenceCounts& counts, long i, long j) {
  if (i == j) throw GraphError("npmi is undefined for i == j");
  long pij_count = counts.pair_count(i, j);
  if (pij_count == 0) return std::nullopt;
  double n = static_cast<double>(counts.n_windows);
  double pij = static_cast<double>(pij_count) / n;
  double pi = static_cast<double>(counts.word_windows[i]) / n;
  double pj = static_cast<double>(counts.word_windows[j]) / n;
  if (pij >= 1.0) return 1.0;  // log p(i,j) = 0: perfectly correlated pair
  // grouping the marginals keeps npmi(i,j) == npmi(j,i) bit-exact
  return -(std::log(pij) - (std::log(pi) + std::log(pj))) / std::log(pij);
}

VocabGraph build_graph(const CooccurrenceCounts& counts, double threshold) {
  // NPMI never exceeds 1, so thresholds >= 1 keep no off-diagonal edge
  if (threshold < -1.0) throw GraphError("NPMI threshold must be >= -1");
  long v = static_cast<long>(counts.word_windows.size());

  std::vector<std::tuple<long, long, double>> edges;  // i < j, raw NPMI
  for (const auto& [key, c] : counts.pair_windows) {
    (void)c;
    auto val = npmi(counts, key.first, key.second);
    if (val && *val > threshold) edges.emplace_back(key.first, key.second, *val);
  }

  VocabGraph graph;
  graph.size = v;
  graph.threshold = threshold;
  graph.edge_count = static_cast<long>(edges.size());

  std::vector<std::tuple<long, long, double>> trip;
  trip.reserve(edges.size() * 2 + v);
  for (long i = 0; i < v; ++i) trip.emplace_back(i, i, 1.0);
  for (const auto& [i, j, w] : edges) {
    trip.emplace_back(i, j, w);
    trip.emplace_back(j, i, w);
  }
  graph.adjacency = std::make_shared<CsrMatrix>(CsrMatrix::from_triplets(v, v, trip));
  attach_normalized(graph);
  return graph;
}

std::vector<std::pair<long, double>> subgraph_slice(
    const VocabGraph& graph, const std::vector<std::pair<int, int>>& vocab_tf) {
  std::vector<double> acc(graph.size, 0.0);
  const CsrMatrix& A = *graph.normalized;
  for (const auto& [id, count] : vocab_tf) {
    if (id < 0 || id >= graph.size) throw GraphError("vocab_tf id out of graph range");
    if (count == 0) continue;
    for (long k = A.indptr[id]; k < A.indptr[id + 1]; ++k)
      acc[A.indices[k]] += static_cast<double>(count) * A.values[k];
  }
  std::vector<std::pair<long, double>> out;
  for (long i = 0; i < graph.size; ++i)
    if (acc[i] != 0.0) out.emplace_back(i, acc[i]);
  return out;
}

std::string VocabGraph::to_json() const {
  nlohmann::json j;
  j["version"] = 1;
  j["threshold"] = threshold;
  j["size"] = size;
  nlohmann::json edges = nlohmann::json::array();
  const CsrMatrix& A = *adjacency;
  for (long i = 0; i < size; ++i)
    for (long k = A.indptr[i]; k < A.indptr[i + 1]; ++k) {
      long col = A.indices[k];
      if (col > i) edges.push_back({i, col, A.values[k]});
    }
  j["edges"] = std::move(edges);
  return j.dump();
}

VocabGraph VocabGraph::from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw Error("unsupported graph file version");
  long v = j["size"].get<long>();
  double threshold = j["threshold"].get<double>();

  std::vector<std::tuple<long, long, double>> trip;
  long edge_count = 0;
  for (long i = 0; i < v; ++i) trip.emplace_back(i, i, 1.0);
  for (const auto& e : j["edges"]) {
    long a = e[0].get<long>(), b = e[1].get<long>();
    double w = e[2].get<double>();
    if (a < 0 || b < 0 || a >= v || b >= v || a >= b) throw Error("malformed graph edge entry");
    trip.emplace_back(a, b, w);
    trip.emplace_back(b, a, w);
    ++edge_count;
  }
  VocabGraph graph;
  graph.size = v;
  graph.threshold = threshold;
  graph.edge_count = edge_count;
  graph.adjacency = std::make_shared<CsrMatrix>(CsrMatrix::from_triplets(v, v, trip));
  attach_normalized(graph);
  return graph;
}

void VocabGraph::save(const std::string& path) const { write_file_atomic(path, to_json()); }

VocabGraph VocabGraph::load(const std::string& path) { return from_json(read_file(path)); }

}  // namespace vgcnfuse
