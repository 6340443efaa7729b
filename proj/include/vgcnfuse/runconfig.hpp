#pragma once

#include <string>

#include "vgcnfuse/model.hpp"
#include "vgcnfuse/trainer.hpp"

namespace vgcnfuse {

// Merged view of model + trainer + path settings. Loaded from a JSON
// config file (unknown keys rejected), then overridden by CLI flags.
struct RunConfig {
  std::string corpus;      // train corpus or generic input
  std::string val;
  std::string test;
  std::string vocab;
  std::string graph;
  std::string checkpoint;
  std::string out;

  ModelConfig model;
  TrainConfig trainer;

  int min_freq = 2;
  double npmi_threshold = 0.2;
  int threads = 1;  // capped by VGCN_FUSE_THREADS

  static RunConfig from_json(const std::string& text);
  static RunConfig from_file(const std::string& path);
  std::string to_json() const;  // resolved-config echo
};

}  // namespace vgcnfuse
