// vgcnfuse: NPMI vocabulary graphs + graph-token fusion encoders for
// text classification. Subcommands: build-graph, train, eval, predict,
// explain.

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vgcnfuse/checkpoint.hpp"
#include "vgcnfuse/explain.hpp"
#include "vgcnfuse/graph.hpp"
#include "vgcnfuse/io.hpp"
#include "vgcnfuse/runconfig.hpp"
#include "vgcnfuse/trainer.hpp"

namespace {

using namespace vgcnfuse;

int thread_cap(int requested) {
  if (const char* env = std::getenv("VGCN_FUSE_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1) return std::min(requested, cap);
  }
  return requested;
}

void echo_config(const RunConfig& cfg) { std::cerr << cfg.to_json() << "\n"; }

std::vector<EncodedDocument> encode_all(const std::vector<RawDocument>& docs,
                                        const Vocabulary& vocab, long max_len) {
  std::vector<EncodedDocument> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(encode(d, vocab, static_cast<int>(max_len)));
  return out;
}

struct LoadedArtifacts {
  Vocabulary vocab;
  VocabGraph graph;
  std::string graph_hash;
};

LoadedArtifacts load_artifacts(const RunConfig& cfg) {
  LoadedArtifacts a;
  a.vocab = Vocabulary::load(cfg.vocab);
  a.graph = VocabGraph::load(cfg.graph);
  a.graph_hash = fnv1a64_hex(read_file(cfg.graph));
  if (a.graph.size != a.vocab.size())
    throw ConfigMismatch("graph size " + std::to_string(a.graph.size) +
                         " does not match vocabulary size " + std::to_string(a.vocab.size()));
  return a;
}

void require_matching_hash(const Model<float>& model, const LoadedArtifacts& a) {
  if (model.graph_hash != a.graph_hash)
    throw GraphHashMismatch("checkpoint was trained against graph " + model.graph_hash +
                            " but --graph hashes to " + a.graph_hash);
}

int cmd_build_graph(RunConfig cfg, int threads) {
  echo_config(cfg);
  std::vector<RawDocument> docs = load_jsonl(cfg.corpus, /*require_labels=*/false);
  threads = thread_cap(threads);
  Vocabulary vocab = build_vocab(docs, cfg.min_freq, threads);
  std::vector<EncodedDocument> enc = encode_all(docs, vocab, cfg.model.encoder.max_len);
  CooccurrenceCounts counts = count_windows(enc, vocab.size(), threads);
  VocabGraph graph = build_graph(counts, cfg.npmi_threshold);
  vocab.save(cfg.vocab);
  graph.save(cfg.graph);
  nlohmann::json summary = {{"vocab_size", vocab.size()},
                            {"edges", graph.edge_count},
                            {"density", graph.density()},
                            {"vocab_file", cfg.vocab},
                            {"graph_file", cfg.graph}};
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_train(RunConfig cfg, const std::string& metrics_path) {
  echo_config(cfg);
  LoadedArtifacts a = load_artifacts(cfg);
  cfg.model.vocab_size = a.vocab.size();

  auto train_docs = encode_all(load_jsonl(cfg.corpus, true), a.vocab, cfg.model.encoder.max_len);
  auto val_docs = cfg.val.empty()
                      ? train_docs
                      : encode_all(load_jsonl(cfg.val, true), a.vocab, cfg.model.encoder.max_len);
  std::vector<EncodedDocument> test_docs;
  if (!cfg.test.empty())
    test_docs = encode_all(load_jsonl(cfg.test, true), a.vocab, cfg.model.encoder.max_len);

  Model<float> model(cfg.model);
  model.graph_hash = a.graph_hash;
  TrainResult result = train(model, train_docs, val_docs, test_docs, a.graph, cfg.trainer);

  save_checkpoint(model, cfg.out);
  std::string metrics = train_result_to_json(result, cfg.trainer, cfg.model);
  if (!metrics_path.empty()) write_file_atomic(metrics_path, metrics + "\n");
  std::cout << metrics << "\n";
  return 0;
}

int cmd_eval(RunConfig cfg) {
  echo_config(cfg);
  LoadedArtifacts a = load_artifacts(cfg);
  Model<float> model = load_checkpoint(cfg.checkpoint);
  require_matching_hash(model, a);
  auto docs = encode_all(load_jsonl(cfg.corpus, true), a.vocab, model.config.encoder.max_len);
  EvalReport report = evaluate(model, docs, a.graph, cfg.trainer);
  std::string out = report.to_json();
  if (!cfg.out.empty()) write_file_atomic(cfg.out, out + "\n");
  std::cout << out << "\n";
  return 0;
}

std::vector<double> softmax_row(const std::vector<float>& logits, long row, long C) {
  double mx = logits[row * C];
  for (long c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(logits[row * C + c]));
  std::vector<double> p(C);
  double denom = 0.0;
  for (long c = 0; c < C; ++c) {
    p[c] = std::exp(static_cast<double>(logits[row * C + c]) - mx);
    denom += p[c];
  }
  for (double& v : p) v /= denom;
  return p;
}

int cmd_predict(RunConfig cfg) {
  echo_config(cfg);
  LoadedArtifacts a = load_artifacts(cfg);
  Model<float> model = load_checkpoint(cfg.checkpoint);
  require_matching_hash(model, a);
  auto docs = encode_all(load_jsonl(cfg.corpus, false), a.vocab, model.config.encoder.max_len);

  std::string out;
  long C = model.config.classes;
  for (size_t start = 0; start < docs.size(); start += cfg.trainer.batch_size) {
    size_t end = std::min(docs.size(), start + cfg.trainer.batch_size);
    std::vector<EncodedDocument> batch(docs.begin() + start, docs.begin() + end);
    ForwardResult<float> fwd = model.forward(batch, a.graph, /*train=*/false);
    for (size_t i = 0; i < batch.size(); ++i) {
      std::vector<double> probs = softmax_row(fwd.logits.data(), static_cast<long>(i), C);
      int label = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
      nlohmann::json row = {{"label", label}, {"probs", probs}};
      out += row.dump();
      out += "\n";
    }
  }
  if (!cfg.out.empty())
    write_file_atomic(cfg.out, out);
  else
    std::cout << out;
  return 0;
}

int cmd_explain(RunConfig cfg, long topk) {
  echo_config(cfg);
  LoadedArtifacts a = load_artifacts(cfg);
  Model<float> model = load_checkpoint(cfg.checkpoint);
  require_matching_hash(model, a);
  if (!model.config.uses_encoder())
    throw ConfigMismatch("explain needs an attention-bearing mode (not vgcn-only)");
  auto docs = encode_all(load_jsonl(cfg.corpus, false), a.vocab, model.config.encoder.max_len);

  std::vector<std::vector<double>> slab;
  if (model.config.uses_vgcn()) slab = effective_weight_slab(model);

  std::string out;
  long C = model.config.classes;
  for (size_t i = 0; i < docs.size(); ++i) {
    std::vector<EncodedDocument> batch{docs[i]};
    ForwardResult<float> fwd = model.forward(batch, a.graph, false, /*retain_attention=*/true);
    ClsAttention attn = cls_attention(fwd, 0, 1);
    std::vector<std::vector<DimensionWord>> dims;
    if (model.config.uses_vgcn())
      dims = dimension_words(docs[i].vocab_tf, a.graph, slab, topk, a.vocab);
    std::vector<double> probs = softmax_row(fwd.logits.data(), 0, C);
    int label = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    out += attention_report_json(docs[i], a.vocab, attn, dims, probs, label, docs[i].label);
    out += "\n";
  }
  if (!cfg.out.empty())
    write_file_atomic(cfg.out, out);
  else
    std::cout << out;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NPMI vocabulary graph + graph-token fusion text classifier"};
  app.require_subcommand(1);

  std::string config_path;
  RunConfig cfg;
  bool have_config = false;

  // flag storage; only flags the user passed override the config file
  std::string corpus, val, test, vocab, graph, checkpoint, out, mode, loss, metrics;
  int min_freq = 2, epochs = 9, batch = 16, threads = 1;
  double npmi_threshold = 0.2, lr = 1e-5, weight_decay = 0.01;
  std::uint64_t seed = 42;
  long topk = 2, max_len = 200;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run config");
    sub->add_option("--corpus", corpus, "JSONL corpus path");
    sub->add_option("--vocab", vocab, "vocabulary file");
    sub->add_option("--graph", graph, "graph file");
    sub->add_option("--checkpoint", checkpoint, "model checkpoint");
    sub->add_option("--out", out, "output path");
    sub->add_option("--seed", seed, "run seed");
    sub->add_option("--batch", batch, "mini-batch size");
  };

  CLI::App* sb = app.add_subcommand("build-graph", "build vocabulary + NPMI graph");
  add_common(sb);
  sb->add_option("--min-freq", min_freq, "vocabulary frequency floor")->capture_default_str();
  sb->add_option("--npmi-threshold", npmi_threshold, "NPMI edge threshold")
      ->capture_default_str();
  sb->add_option("--max-len", max_len, "max sequence length")->capture_default_str();
  sb->add_option("--threads", threads, "worker threads (capped by VGCN_FUSE_THREADS)");

  CLI::App* st = app.add_subcommand("train", "train a classifier");
  add_common(st);
  st->add_option("--val", val, "validation split JSONL");
  st->add_option("--test", test, "test split JSONL");
  st->add_option("--mode", mode, "vgcn-bert|bert-only|vgcn-only|vanilla-concat");
  st->add_option("--epochs", epochs, "training epochs")->capture_default_str();
  st->add_option("--lr", lr, "learning rate")->capture_default_str();
  st->add_option("--weight-decay", weight_decay, "decoupled L2 weight decay")
      ->capture_default_str();
  st->add_option("--loss", loss, "weighted-cross-entropy|mse-soft-labels");
  st->add_option("--metrics", metrics, "metrics JSON output path");

  CLI::App* se = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  add_common(se);

  CLI::App* sp = app.add_subcommand("predict", "predict labels/probs for a JSONL file");
  add_common(sp);

  CLI::App* sx = app.add_subcommand("explain", "attention attribution reports");
  add_common(sx);
  sx->add_option("--topk", topk, "words per graph dimension")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    if (!config_path.empty()) {
      cfg = RunConfig::from_file(config_path);
      have_config = true;
    }
    (void)have_config;

    auto passed = [&](const char* name) { return sub->count(name) > 0; };
    if (passed("--corpus")) cfg.corpus = corpus;
    if (passed("--vocab")) cfg.vocab = vocab;
    if (passed("--graph")) cfg.graph = graph;
    if (passed("--checkpoint")) cfg.checkpoint = checkpoint;
    if (passed("--out")) cfg.out = out;
    if (passed("--batch")) cfg.trainer.batch_size = batch;
    if (passed("--seed")) {
      cfg.model.seed = seed;
      cfg.trainer.seed = seed;
    }

    if (sub == sb) {
      if (passed("--min-freq")) cfg.min_freq = min_freq;
      if (passed("--npmi-threshold")) cfg.npmi_threshold = npmi_threshold;
      if (passed("--max-len")) cfg.model.encoder.max_len = max_len;
      if (cfg.corpus.empty() || cfg.vocab.empty() || cfg.graph.empty())
        throw ConfigMismatch("build-graph needs --corpus, --vocab and --graph");
      return cmd_build_graph(cfg, threads);
    }
    if (sub == st) {
      if (passed("--val")) cfg.val = val;
      if (passed("--test")) cfg.test = test;
      if (passed("--mode")) cfg.model.mode = mode_from(mode);
      if (passed("--epochs")) cfg.trainer.epochs = epochs;
      if (passed("--lr")) cfg.trainer.lr = lr;
      if (passed("--weight-decay")) cfg.trainer.weight_decay = weight_decay;
      if (passed("--loss")) cfg.trainer.loss = loss_from(loss);
      if (cfg.corpus.empty() || cfg.vocab.empty() || cfg.graph.empty() || cfg.out.empty())
        throw ConfigMismatch("train needs --corpus, --vocab, --graph and --out");
      return cmd_train(cfg, metrics);
    }
    if (sub == se) {
      if (cfg.corpus.empty() || cfg.vocab.empty() || cfg.graph.empty() ||
          cfg.checkpoint.empty())
        throw ConfigMismatch("eval needs --corpus, --vocab, --graph and --checkpoint");
      return cmd_eval(cfg);
    }
    if (sub == sp) {
      if (cfg.corpus.empty() || cfg.vocab.empty() || cfg.graph.empty() ||
          cfg.checkpoint.empty())
        throw ConfigMismatch("predict needs --corpus, --vocab, --graph and --checkpoint");
      return cmd_predict(cfg);
    }
    if (sub == sx) {
      if (cfg.corpus.empty() || cfg.vocab.empty() || cfg.graph.empty() ||
          cfg.checkpoint.empty())
        throw ConfigMismatch("explain needs --corpus, --vocab, --graph and --checkpoint");
      return cmd_explain(cfg, topk);
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const EmptyVocabulary& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const GraphHashMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const CheckpointVersionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
