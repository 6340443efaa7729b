#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "testutil.hpp"
#include "vgcnfuse/io.hpp"

namespace testutil {

bool golden_check(const std::string& name, const std::vector<double>& values,
                  std::vector<double>* stored_out) {
  std::string path = test_data_dir() + "/" + name;
  bool regen = std::getenv("VGCNFUSE_REGEN_GOLDEN") != nullptr;
  std::ifstream probe(path);
  if (regen || !probe.good()) {
    nlohmann::json j = values;
    vgcnfuse::write_file_atomic(path, j.dump());
    if (stored_out) *stored_out = values;
    return true;
  }
  nlohmann::json j = nlohmann::json::parse(vgcnfuse::read_file(path));
  if (stored_out) *stored_out = j.get<std::vector<double>>();
  return false;
}

}  // namespace testutil
