#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vgcnfuse/checkpoint.hpp"
#include "vgcnfuse/metrics.hpp"
#include "vgcnfuse/model.hpp"

namespace vgcnfuse {

enum class LossKind { kWeightedCrossEntropy, kMseSoftLabels };

inline std::string loss_name(LossKind k) {
  return k == LossKind::kWeightedCrossEntropy ? "weighted-cross-entropy" : "mse-soft-labels";
}

inline LossKind loss_from(const std::string& s) {
  if (s == "weighted-cross-entropy") return LossKind::kWeightedCrossEntropy;
  if (s == "mse-soft-labels") return LossKind::kMseSoftLabels;
  throw ConfigMismatch("unknown loss: " + s);
}

struct TrainConfig {
  int epochs = 9;
  int batch_size = 16;
  double lr = 1e-5;
  double weight_decay = 0.01;
  LossKind loss = LossKind::kWeightedCrossEntropy;
  std::uint64_t seed = 42;

  void validate() const {
    if (epochs < 1) throw ConfigMismatch("epochs must be >= 1");
    if (lr < 0.0) throw ConfigMismatch("lr must be >= 0");
    if (batch_size < 1) throw ConfigMismatch("batch size must be >= 1");
  }
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  EvalReport validation;
};

struct TrainResult {
  std::vector<EpochLog> epoch_log;
  int best_epoch = 0;           // 1-based epoch whose weights were kept
  double best_weighted_f1 = 0.0;
  EvalReport test;              // empty confusion when no test split given
  bool has_test = false;
};

EvalReport evaluate(Model<float>& model, const std::vector<EncodedDocument>& split,
                    const VocabGraph& graph, const TrainConfig& cfg);

// Fixed epoch count; after each epoch evaluates on the validation split
// and keeps the parameters with the best validation weighted F1 (ties:
// earliest epoch). The model is left holding the best parameters.
TrainResult train(Model<float>& model, const std::vector<EncodedDocument>& train_split,
                  const std::vector<EncodedDocument>& val_split,
                  const std::vector<EncodedDocument>& test_split, const VocabGraph& graph,
                  const TrainConfig& cfg);

std::string train_result_to_json(const TrainResult& result, const TrainConfig& cfg,
                                 const ModelConfig& mcfg);

}  // namespace vgcnfuse
