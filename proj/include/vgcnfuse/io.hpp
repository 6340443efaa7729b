#pragma once

#include <cstdint>
#include <string>

namespace vgcnfuse {

std::string read_file(const std::string& path);

// write to <path>.tmp then rename, so partial writes never land
void write_file_atomic(const std::string& path, const std::string& contents);

// FNV-1a 64-bit, hex encoded; used for content-addressing artifacts
std::string fnv1a64_hex(const std::string& bytes);

}  // namespace vgcnfuse
