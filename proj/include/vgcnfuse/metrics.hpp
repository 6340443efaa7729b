#pragma once

#include <string>
#include <vector>

#include "vgcnfuse/errors.hpp"

namespace vgcnfuse {

struct EvalReport {
  double weighted_f1 = 0.0;
  double macro_f1 = 0.0;
  double loss = 0.0;
  std::vector<double> precision;  // per class
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<std::vector<long>> confusion;  // [gold][predicted]

  std::string to_json() const;
};

// W_classes = #dataset / (#classes * #every_class)
std::vector<double> class_weights(const std::vector<long>& label_counts);

// weighted F1 uses gold support shares, macro the unweighted mean;
// classes absent from both gold and predictions score F1 = 0
EvalReport f1_report(const std::vector<int>& predictions, const std::vector<int>& gold,
                     int num_classes);

}  // namespace vgcnfuse
