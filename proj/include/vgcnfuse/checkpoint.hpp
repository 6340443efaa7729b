#pragma once

#include <string>

#include "vgcnfuse/model.hpp"

// Checkpoint file: one line of JSON header followed by a raw blob of
// little-endian IEEE-754 float32 values. Offsets in the header count
// elements into the blob. Save -> load -> save is byte-identical.

namespace vgcnfuse {

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& text);

void save_checkpoint(Model<float>& model, const std::string& path);
Model<float> load_checkpoint(const std::string& path);

// header-only peek used for the graph-hash precondition
std::string checkpoint_graph_hash(const std::string& path);

}  // namespace vgcnfuse
