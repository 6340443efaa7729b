#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "testutil.hpp"
#include "vgcnfuse/explain.hpp"
#include "vgcnfuse/io.hpp"
#include "vgcnfuse/trainer.hpp"

using namespace vgcnfuse;
using testutil::ToyWorld;

namespace {

VocabGraph diag_graph(long v) {
  std::ostringstream js;
  js << "{\"version\":1,\"threshold\":0.2,\"size\":" << v << ",\"edges\":[]}";
  return VocabGraph::from_json(js.str());
}

ModelConfig explain_model_config(const ToyWorld& world, ModelMode mode) {
  ModelConfig cfg;
  cfg.mode = mode;
  cfg.classes = 2;
  cfg.seed = 5;
  cfg.vocab_size = world.vocab.size();
  cfg.encoder.layers = 1;
  cfg.encoder.heads = 2;
  cfg.encoder.model_dim = 8;
  cfg.encoder.dropout = 0.0;
  cfg.encoder.max_len = 8;
  cfg.encoder.graph_tokens = 2;
  cfg.vgcn.hidden = 4;
  cfg.vgcn.graph_embed = 2;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("explain");

TEST_CASE("one-hot footprint on a diagonal graph promotes its own word everywhere") {
  ToyWorld world = ToyWorld::make(501, 12, 8);
  VocabGraph g = diag_graph(world.vocab.size());
  long i = Vocabulary::kNumSpecials + 1;
  std::vector<std::vector<double>> slab(world.vocab.size(), std::vector<double>(3, 1.0));
  auto dims = dimension_words({{static_cast<int>(i), 1}}, g, slab, 2, world.vocab);
  REQUIRE(dims.size() == 3);
  for (const auto& rank : dims) {
    REQUIRE(rank.size() == 1);  // only the footprint word is a candidate
    CHECK(rank[0].id == i);
    CHECK(rank[0].word == world.vocab.tokens[i]);
  }
}

TEST_CASE("empty footprint declares empty rankings") {
  ToyWorld world = ToyWorld::make(503, 12, 8);
  std::vector<std::vector<double>> slab(world.vocab.size(), std::vector<double>(2, 1.0));
  auto dims = dimension_words({}, world.graph, slab, 2, world.vocab);
  for (const auto& rank : dims) CHECK(rank.empty());
}

TEST_CASE("ties break by ascending word id") {
  ToyWorld world = ToyWorld::make(507, 12, 8);
  VocabGraph g = diag_graph(world.vocab.size());
  int a = Vocabulary::kNumSpecials, b = a + 2;
  std::vector<std::vector<double>> slab(world.vocab.size(), std::vector<double>(1, 1.0));
  auto dims = dimension_words({{b, 1}, {a, 1}}, g, slab, 2, world.vocab);
  REQUIRE(dims[0].size() == 2);
  CHECK(dims[0][0].id == a);
  CHECK(dims[0][1].id == b);
}

TEST_CASE("rankings match a dense recomputation on the toy graph") {
  ToyWorld world = ToyWorld::make(509, 40, 8);
  Rng rng(510);
  long v = world.vocab.size(), g = 3;
  std::vector<std::vector<double>> slab(v, std::vector<double>(g));
  for (auto& row : slab)
    for (auto& x : row) x = rng.uniform(-1, 1);

  for (int t = 0; t < 10; ++t) {
    const auto& doc = world.docs[t];
    auto dims = dimension_words(doc.vocab_tf, world.graph, slab, 4, world.vocab);

    // dense route
    auto An = world.graph.normalized->to_dense();
    std::vector<double> x(v, 0.0), s(v, 0.0);
    for (const auto& [id, c] : doc.vocab_tf) x[id] = c;
    for (long i = 0; i < v; ++i)
      for (long j = 0; j < v; ++j) s[j] += x[i] * An[i][j];
    for (long dim = 0; dim < g; ++dim) {
      std::vector<std::pair<double, long>> z;
      for (long j = 0; j < v; ++j)
        if (s[j] != 0.0) z.push_back({s[j] * slab[j][dim], j});
      std::sort(z.begin(), z.end(), [](const auto& p, const auto& q) {
        if (p.first != q.first) return p.first > q.first;
        return p.second < q.second;
      });
      size_t k = std::min<size_t>(4, z.size());
      REQUIRE(dims[dim].size() == k);
      for (size_t r = 0; r < k; ++r) {
        CHECK(dims[dim][r].id == z[r].second);
        CHECK(dims[dim][r].score == doctest::Approx(z[r].first).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("effective weight slab is the product of the two VGCN layers") {
  ToyWorld world = ToyWorld::make(511, 12, 8);
  Model<float> model(explain_model_config(world, ModelMode::kVgcnBert));
  auto slab = effective_weight_slab(model);
  const auto& wvh = model.vgcn.W_vh;
  const auto& wout = model.vgcn.W_out;
  long v = wvh.dim(0), h = wvh.dim(1), g = wout.dim(1);
  Rng rng(512);
  for (int t = 0; t < 40; ++t) {
    long i = rng.below(v), d = rng.below(g);
    double want = 0;
    for (long p = 0; p < h; ++p)
      want += static_cast<double>(wvh.data()[i * h + p]) *
              static_cast<double>(wout.data()[p * g + d]);
    CHECK(slab[i][d] == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("bert-only mode reports zero graph attention mass") {
  ToyWorld world = ToyWorld::make(521, 12, 8);
  Model<float> model(explain_model_config(world, ModelMode::kBertOnly));
  std::vector<EncodedDocument> batch{world.docs[0]};
  auto fwd = model.forward(batch, world.graph, false, /*retain_attention=*/true);
  ClsAttention attn = cls_attention(fwd, 0, 1);
  REQUIRE(attn.graph_mass.size() == 1);
  for (const auto& head_masses : attn.graph_mass)
    for (double m : head_masses) CHECK(m == 0.0);
  for (const auto& layer : attn.graph)
    for (const auto& head : layer) CHECK(head.empty());
}

TEST_CASE("cls rows over valid positions sum to one") {
  ToyWorld world = ToyWorld::make(523, 12, 8);
  Model<float> model(explain_model_config(world, ModelMode::kVgcnBert));
  std::vector<EncodedDocument> batch{world.docs[1]};
  auto fwd = model.forward(batch, world.graph, false, true);
  ClsAttention attn = cls_attention(fwd, 0, 1);
  for (size_t l = 0; l < attn.word.size(); ++l)
    for (size_t h = 0; h < attn.word[l].size(); ++h) {
      double sum = 0;
      for (double w : attn.word[l][h]) sum += w;
      for (double w : attn.graph[l][h]) sum += w;
      // the CLS self-weight is part of the row: fetch it from the map
      sum += static_cast<double>(fwd.attention_maps[l].at({0, static_cast<long>(h), 0, 0}));
      CHECK(std::abs(sum - 1.0) < 1e-6);
    }
}

TEST_CASE("missing attention maps raise MissingAttention") {
  ToyWorld world = ToyWorld::make(527, 12, 8);
  Model<float> model(explain_model_config(world, ModelMode::kVgcnBert));
  std::vector<EncodedDocument> batch{world.docs[0]};
  auto fwd = model.forward(batch, world.graph, false, /*retain_attention=*/false);
  CHECK_THROWS_AS(cls_attention(fwd, 0, 1), MissingAttention);
}

TEST_CASE("attention reports round-trip byte-identically and match the golden file") {
  ToyWorld world = ToyWorld::make(529, 40, 8);
  Model<float> model(explain_model_config(world, ModelMode::kVgcnBert));
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 8;
  tc.lr = 1e-3;
  train(model, world.docs, world.docs, {}, world.graph, tc);

  std::vector<EncodedDocument> batch{world.docs[2]};
  auto fwd = model.forward(batch, world.graph, false, true);
  ClsAttention attn = cls_attention(fwd, 0, 1);
  auto slab = effective_weight_slab(model);
  auto dims = dimension_words(world.docs[2].vocab_tf, world.graph, slab, 2, world.vocab);
  std::string report = attention_report_json(world.docs[2], world.vocab, attn, dims,
                                             {0.25, 0.75}, 1, world.docs[2].label);

  // lossless round-trip
  CHECK(nlohmann::json::parse(report).dump() == report);

  // golden copy, stored as raw bytes
  std::string path = testutil::test_data_dir() + "/golden_explain_report.json";
  std::ifstream probe(path);
  if (std::getenv("VGCNFUSE_REGEN_GOLDEN") || !probe.good()) {
    write_file_atomic(path, report);
    MESSAGE("golden_explain_report.json regenerated");
  }
  CHECK(read_file(path) == report);
}

TEST_SUITE_END();
