#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vgcnfuse/errors.hpp"

namespace vgcnfuse {

struct RawDocument {
  std::string text;
  std::optional<int> label;
  std::optional<std::vector<double>> soft_labels;

  bool has_supervision() const { return label.has_value() || soft_labels.has_value(); }
};

struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kSep = 3;
  static constexpr int kNumSpecials = 4;

  std::vector<std::string> tokens;  // full token list, specials at ids 0..3
  std::unordered_map<std::string, int> ids;
  std::vector<long> freqs;  // training-corpus counts, 0 for specials
  int min_freq = 2;

  long size() const { return static_cast<long>(tokens.size()); }
  static bool is_special(int id) { return id >= 0 && id < kNumSpecials; }

  // unknown tokens map to [UNK]
  int id_of(const std::string& tok) const {
    auto it = ids.find(tok);
    return it == ids.end() ? kUnk : it->second;
  }

  std::string to_json() const;
  static Vocabulary from_json(const std::string& json_text);
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);
};

struct EncodedDocument {
  std::vector<int32_t> token_ids;    // [CLS] + body + [PAD]..., length max_len
  std::vector<int8_t> attention_mask;
  std::vector<std::pair<int, int>> vocab_tf;  // (token id, count), id-sorted, specials excluded
  std::optional<int> label;
  std::optional<std::vector<double>> soft_labels;
};

// URL / @-mention stripping, lower-casing, whitespace collapsing; idempotent
std::string clean(const std::string& text);

// whitespace split with punctuation characters as standalone tokens;
// expects cleaned text
std::vector<std::string> tokenize(const std::string& text);

// tokens with count >= min_freq, ordered by (count desc, token asc)
// after the specials; parallel over documents when threads > 1
Vocabulary build_vocab(const std::vector<RawDocument>& corpus, int min_freq, int threads = 1);

EncodedDocument encode(const RawDocument& doc, const Vocabulary& vocab, int max_len);

// token strings for the non-pad positions (test helper / explain labels)
std::vector<std::string> decode(const EncodedDocument& doc, const Vocabulary& vocab);

// JSON Lines corpus: {"text": str, "label": int} or {"text": str,
// "soft_labels": [...]}. Rows without supervision are accepted unless
// require_labels is set (graph building uses unlabeled corpora).
std::vector<RawDocument> load_jsonl(const std::string& path, bool require_labels);

}  // namespace vgcnfuse
