#pragma once

#include <stdexcept>
#include <string>

namespace vgcnfuse {

// Base for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeMismatch : public Error {
 public:
  explicit ShapeMismatch(const std::string& msg) : Error("shape mismatch: " + msg) {}
};

class EmptyVocabulary : public Error {
 public:
  explicit EmptyVocabulary(const std::string& msg) : Error(msg) {}
};

class NoTape : public Error {
 public:
  NoTape() : Error("backward() called outside of tape recording") {}
};

class ConfigMismatch : public Error {
 public:
  explicit ConfigMismatch(const std::string& msg) : Error(msg) {}
};

class MissingAttention : public Error {
 public:
  MissingAttention() : Error("attention maps were not retained by the forward pass") {}
};

class GraphError : public Error {
 public:
  explicit GraphError(const std::string& msg) : Error(msg) {}
};

// Carries the 1-based line number of the offending JSONL row.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, long line) : Error(msg), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

class GraphHashMismatch : public Error {
 public:
  explicit GraphHashMismatch(const std::string& msg) : Error(msg) {}
};

class CheckpointVersionError : public Error {
 public:
  explicit CheckpointVersionError(const std::string& msg) : Error(msg) {}
};

}  // namespace vgcnfuse
