#pragma once

#include <cmath>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "vgcnfuse/graph.hpp"
#include "vgcnfuse/tensor.hpp"
#include "vgcnfuse/text.hpp"

namespace testutil {

using vgcnfuse::Tape;
using vgcnfuse::TapeScope;
using vgcnfuse::Tensor;
using vgcnfuse::TensorD;

// Central finite differences against the taped adjoints. make_loss must
// recompute the forward pass from the current parameter data each call.
struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;  // param index / element of the worst error
};

inline GradCheckResult check_gradients(std::vector<TensorD> params,
                                       const std::function<TensorD()>& make_loss,
                                       double step = 1e-3) {
  std::vector<std::vector<double>> analytic;
  {
    for (auto& p : params) p.zero_grad();
    Tape<double> tape;
    TapeScope<double> scope(tape);
    TensorD loss = make_loss();
    vgcnfuse::backward(loss);
    for (auto& p : params) analytic.push_back(p.grad());
  }
  GradCheckResult result;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& data = params[pi].data();
    for (size_t i = 0; i < data.size(); ++i) {
      double keep = data[i];
      data[i] = keep + step;
      double up = make_loss().item();
      data[i] = keep - step;
      double down = make_loss().item();
      data[i] = keep;
      double fd = (up - down) / (2.0 * step);
      double g = analytic[pi][i];
      double rel = std::abs(g - fd) / std::max({std::abs(g), std::abs(fd), 1.0});
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst = "param " + std::to_string(pi) + " elem " + std::to_string(i) +
                       " analytic " + std::to_string(g) + " fd " + std::to_string(fd);
      }
    }
  }
  return result;
}

inline std::string test_data_dir() {
  const char* env = std::getenv("VGCNFUSE_TEST_DATA");
  return env ? env : "tests/data";
}

inline std::string cli_bin() {
  const char* env = std::getenv("VGCNFUSE_CLI_BIN");
  return env ? env : "";
}

// Self-golden values: the reference run regenerates the file under
// VGCNFUSE_REGEN_GOLDEN=1; afterwards every run must match bit-exactly.
// Returns true when the file was (re)generated.
bool golden_check(const std::string& name, const std::vector<double>& values,
                  std::vector<double>* stored_out = nullptr);

// Two-class color corpus with shared fillers; enough co-occurrence
// structure for a non-trivial NPMI graph.
struct ToyWorld {
  vgcnfuse::Vocabulary vocab;
  vgcnfuse::VocabGraph graph;
  std::vector<vgcnfuse::EncodedDocument> docs;  // labeled

  static ToyWorld make(std::uint64_t seed, int n_docs, int max_len,
                       double threshold = 0.1) {
    using namespace vgcnfuse;
    const std::string cues[2][3] = {{"red", "crimson", "scarlet"}, {"blue", "azure", "navy"}};
    const std::string fillers[] = {"the", "movie", "was", "plot", "actor", "scene"};
    Rng rng(seed);
    std::vector<RawDocument> raw;
    for (int d = 0; d < n_docs; ++d) {
      int label = static_cast<int>(rng.below(2));
      std::string text;
      int n = 3 + static_cast<int>(rng.below(4));
      for (int i = 0; i < n; ++i) {
        bool cue = rng.below(2) == 0;
        text += cue ? cues[label][rng.below(3)] : fillers[rng.below(std::size(fillers))];
        text += " ";
      }
      text += cues[label][0];  // every doc carries its anchor cue
      raw.push_back({text, label, {}});
    }
    ToyWorld world;
    world.vocab = build_vocab(raw, 1);
    for (const auto& r : raw) world.docs.push_back(encode(r, world.vocab, max_len));
    world.graph = build_graph(count_windows(world.docs, world.vocab.size()), threshold);
    return world;
  }
};

}  // namespace testutil
