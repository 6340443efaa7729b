#include "vgcnfuse/metrics.hpp"

#include <json.hpp>

namespace vgcnfuse {

std::vector<double> class_weights(const std::vector<long>& label_counts) {
  long total = 0;
  for (long c : label_counts) {
    if (c <= 0) throw Error("class_weights: every class needs at least one example");
    total += c;
  }
  double classes = static_cast<double>(label_counts.size());
  std::vector<double> w(label_counts.size());
  for (size_t i = 0; i < label_counts.size(); ++i)
    w[i] = static_cast<double>(total) / (classes * static_cast<double>(label_counts[i]));
  return w;
}

EvalReport f1_report(const std::vector<int>& predictions, const std::vector<int>& gold,
                     int num_classes) {
  if (predictions.size() != gold.size())
    throw Error("f1_report: predictions and gold differ in length");
  EvalReport r;
  r.confusion.assign(num_classes, std::vector<long>(num_classes, 0));
  for (size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] >= num_classes || predictions[i] < 0 ||
        predictions[i] >= num_classes)
      throw Error("f1_report: label outside [0, C)");
    r.confusion[gold[i]][predictions[i]]++;
  }
  r.precision.assign(num_classes, 0.0);
  r.recall.assign(num_classes, 0.0);
  r.f1.assign(num_classes, 0.0);
  long total = static_cast<long>(gold.size());
  double macro = 0.0, weighted = 0.0;
  for (int c = 0; c < num_classes; ++c) {
    long tp = r.confusion[c][c];
    long pred_c = 0, gold_c = 0;
    for (int k = 0; k < num_classes; ++k) {
      pred_c += r.confusion[k][c];
      gold_c += r.confusion[c][k];
    }
    double p = pred_c > 0 ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
    double rc = gold_c > 0 ? static_cast<double>(tp) / static_cast<double>(gold_c) : 0.0;
    double f = (p + rc) > 0.0 ? 2.0 * p * rc / (p + rc) : 0.0;
    r.precision[c] = p;
    r.recall[c] = rc;
    r.f1[c] = f;
    macro += f;
    if (total > 0) weighted += f * static_cast<double>(gold_c) / static_cast<double>(total);
  }
  r.macro_f1 = num_classes > 0 ? macro / static_cast<double>(num_classes) : 0.0;
  r.weighted_f1 = weighted;
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["weighted_f1"] = weighted_f1;
  j["macro_f1"] = macro_f1;
  j["loss"] = loss;
  nlohmann::json per = nlohmann::json::array();
  for (size_t c = 0; c < f1.size(); ++c)
    per.push_back({{"precision", precision[c]}, {"recall", recall[c]}, {"f1", f1[c]}});
  j["per_class"] = std::move(per);
  j["confusion"] = confusion;
  return j.dump();
}

}  // namespace vgcnfuse
