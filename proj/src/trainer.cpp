#include "vgcnfuse/trainer.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "vgcnfuse/adam.hpp"
#include "vgcnfuse/losses.hpp"

namespace vgcnfuse {

namespace {

// hard label if present, argmax of the soft labels otherwise
int gold_of(const EncodedDocument& doc) {
  if (doc.label) return *doc.label;
  if (doc.soft_labels) {
    const auto& s = *doc.soft_labels;
    return static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
  }
  throw ConfigMismatch("document without label/soft_labels in a supervised split");
}

int argmax_row(const std::vector<float>& data, long row, long C) {
  int best = 0;
  for (long c = 1; c < C; ++c)
    if (data[row * C + c] > data[row * C + best]) best = static_cast<int>(c);
  return best;
}

Tensor<float> soft_target_matrix(const std::vector<EncodedDocument>& batch, long C) {
  Tensor<float> t = Tensor<float>::zeros({static_cast<long>(batch.size()), C});
  auto& d = t.data();
  for (size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].soft_labels) {
      const auto& s = *batch[i].soft_labels;
      if (static_cast<long>(s.size()) != C)
        throw ConfigMismatch("soft label width does not match class count");
      for (long c = 0; c < C; ++c) d[i * C + c] = static_cast<float>(s[c]);
    } else {
      d[i * C + gold_of(batch[i])] = 1.0f;
    }
  }
  return t;
}

Tensor<float> make_loss(const Tensor<float>& logits, const std::vector<EncodedDocument>& batch,
                        const TrainConfig& cfg, const std::vector<double>& weights) {
  if (cfg.loss == LossKind::kMseSoftLabels)
    return mse_soft(logits, soft_target_matrix(batch, logits.dim(1)));
  std::vector<int32_t> labels(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) labels[i] = gold_of(batch[i]);
  return weighted_cross_entropy(logits, labels, weights);
}

}  // namespace

EvalReport evaluate(Model<float>& model, const std::vector<EncodedDocument>& split,
                    const VocabGraph& graph, const TrainConfig& cfg) {
  std::vector<int> predictions, gold;
  double loss_sum = 0.0;
  long C = model.config.classes;
  for (size_t start = 0; start < split.size(); start += cfg.batch_size) {
    size_t end = std::min(split.size(), start + cfg.batch_size);
    std::vector<EncodedDocument> batch(split.begin() + start, split.begin() + end);
    ForwardResult<float> fwd = model.forward(batch, graph, /*train=*/false);
    // eval loss is unweighted so it is comparable across splits
    Tensor<float> loss = make_loss(fwd.logits, batch, cfg, {});
    loss_sum += static_cast<double>(loss.item()) * static_cast<double>(batch.size());
    for (size_t i = 0; i < batch.size(); ++i) {
      predictions.push_back(argmax_row(fwd.logits.data(), static_cast<long>(i), C));
      gold.push_back(gold_of(batch[i]));
    }
  }
  EvalReport report = f1_report(predictions, gold, static_cast<int>(C));
  report.loss = split.empty() ? 0.0 : loss_sum / static_cast<double>(split.size());
  return report;
}

TrainResult train(Model<float>& model, const std::vector<EncodedDocument>& train_split,
                  const std::vector<EncodedDocument>& val_split,
                  const std::vector<EncodedDocument>& test_split, const VocabGraph& graph,
                  const TrainConfig& cfg) {
  cfg.validate();
  if (train_split.empty()) throw ConfigMismatch("empty training split");

  std::vector<double> weights;
  if (cfg.loss == LossKind::kWeightedCrossEntropy) {
    std::vector<long> counts(model.config.classes, 0);
    for (const auto& doc : train_split) counts[gold_of(doc)]++;
    bool all_present = std::all_of(counts.begin(), counts.end(), [](long c) { return c > 0; });
    // Eq. 8 weights need every class populated; otherwise fall back to units
    weights = all_present ? class_weights(counts) : std::vector<double>{};
  }

  std::vector<Tensor<float>> params = model.parameters();
  AdamState<float> adam;
  adam.lr = cfg.lr;
  adam.weight_decay = cfg.weight_decay;
  adam.init(params);

  TrainResult result;
  double best_f1 = -1.0;
  std::vector<std::vector<float>> best_snapshot;

  std::vector<size_t> order(train_split.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Fisher-Yates on the single run generator
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[model.rng.below(i)]);

    double loss_sum = 0.0;
    for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
      size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<EncodedDocument> batch;
      batch.reserve(end - start);
      for (size_t i = start; i < end; ++i) batch.push_back(train_split[order[i]]);

      model.zero_grads();
      Tape<float> tape;
      TapeScope<float> scope(tape);
      ForwardResult<float> fwd = model.forward(batch, graph, /*train=*/true);
      Tensor<float> loss = make_loss(fwd.logits, batch, cfg, weights);
      backward(loss);
      adam_step(adam, params);
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(batch.size());
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(train_split.size());
    log.validation = evaluate(model, val_split, graph, cfg);
    if (log.validation.weighted_f1 > best_f1) {
      best_f1 = log.validation.weighted_f1;
      result.best_epoch = epoch;
      best_snapshot.clear();
      for (auto& p : params) best_snapshot.push_back(p.data());
    }
    result.epoch_log.push_back(std::move(log));
  }

  if (!best_snapshot.empty())
    for (size_t i = 0; i < params.size(); ++i) params[i].data() = best_snapshot[i];
  result.best_weighted_f1 = best_f1;
  if (!test_split.empty()) {
    result.test = evaluate(model, test_split, graph, cfg);
    result.has_test = true;
  }
  return result;
}

std::string train_result_to_json(const TrainResult& result, const TrainConfig& cfg,
                                 const ModelConfig& mcfg) {
  const EvalReport& head = result.has_test
                               ? result.test
                               : result.epoch_log[result.best_epoch - 1].validation;
  nlohmann::json j = nlohmann::json::parse(head.to_json());
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : result.epoch_log)
    log.push_back({{"epoch", e.epoch},
                   {"train_loss", e.train_loss},
                   {"validation", nlohmann::json::parse(e.validation.to_json())}});
  j["epoch_log"] = std::move(log);
  j["best_epoch"] = result.best_epoch;
  j["config"] = {{"train",
                  {{"epochs", cfg.epochs},
                   {"batch_size", cfg.batch_size},
                   {"lr", cfg.lr},
                   {"weight_decay", cfg.weight_decay},
                   {"loss", loss_name(cfg.loss)},
                   {"seed", cfg.seed}}},
                 {"model", nlohmann::json::parse(model_config_to_json(mcfg))}};
  return j.dump();
}

}  // namespace vgcnfuse
