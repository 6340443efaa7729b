#include "vgcnfuse/text.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "vgcnfuse/io.hpp"

namespace vgcnfuse {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open file for writing: " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error("rename failed: " + tmp + " -> " + path);
}

std::string fnv1a64_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string clean(const std::string& text) {
  static const std::regex url_scheme(R"([A-Za-z][A-Za-z0-9+.\-]*://\S+)");
  static const std::regex url_www(R"((^|\s)www\.\S+)");
  static const std::regex mention(R"((^|\s)@\S+)");

  std::string s = std::regex_replace(text, url_scheme, " ");
  s = std::regex_replace(s, url_www, "$1");
  s = std::regex_replace(s, mention, "$1");

  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

namespace {
// ASCII alnum and any multi-byte UTF-8 unit count as word characters
bool word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }
}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> toks;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!cur.empty()) {
        toks.push_back(cur);
        cur.clear();
      }
    } else if (word_char(c)) {
      cur.push_back(static_cast<char>(c));
    } else {
      if (!cur.empty()) {
        toks.push_back(cur);
        cur.clear();
      }
      toks.emplace_back(1, static_cast<char>(c));
    }
  }
  if (!cur.empty()) toks.push_back(cur);
  return toks;
}

namespace {

using CountMap = std::unordered_map<std::string, long>;

void count_range(const std::vector<RawDocument>& corpus, size_t lo, size_t hi, CountMap& out) {
  for (size_t i = lo; i < hi; ++i)
    for (const auto& tok : tokenize(clean(corpus[i].text))) out[tok]++;
}

}  // namespace

Vocabulary build_vocab(const std::vector<RawDocument>& corpus, int min_freq, int threads) {
  if (corpus.empty()) throw EmptyVocabulary("cannot build a vocabulary from an empty corpus");
  if (min_freq < 1) throw Error("min_freq must be >= 1");

  CountMap counts;
  threads = std::max(1, threads);
  if (threads == 1 || corpus.size() < 64) {
    count_range(corpus, 0, corpus.size(), counts);
  } else {
    size_t n = corpus.size();
    size_t nthreads = std::min<size_t>(threads, n);
    std::vector<CountMap> partial(nthreads);
    std::vector<std::thread> pool;
    for (size_t t = 0; t < nthreads; ++t) {
      size_t lo = n * t / nthreads, hi = n * (t + 1) / nthreads;
      pool.emplace_back(count_range, std::cref(corpus), lo, hi, std::ref(partial[t]));
    }
    for (auto& th : pool) th.join();
    // merge is plain addition: totals are independent of the split
    for (const auto& part : partial)
      for (const auto& [tok, c] : part) counts[tok] += c;
  }

  std::vector<std::pair<std::string, long>> kept;
  for (const auto& [tok, c] : counts)
    if (c >= min_freq) kept.emplace_back(tok, c);
  if (kept.empty())
    throw EmptyVocabulary("no token reaches min_freq=" + std::to_string(min_freq));
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  vocab.min_freq = min_freq;
  vocab.tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  vocab.freqs = {0, 0, 0, 0};
  for (const auto& [tok, c] : kept) {
    vocab.ids[tok] = static_cast<int>(vocab.tokens.size());
    vocab.tokens.push_back(tok);
    vocab.freqs.push_back(c);
  }
  for (int i = 0; i < Vocabulary::kNumSpecials; ++i) vocab.ids[vocab.tokens[i]] = i;
  return vocab;
}

EncodedDocument encode(const RawDocument& doc, const Vocabulary& vocab, int max_len) {
  if (max_len < 2) throw Error("max_len must be >= 2");
  EncodedDocument enc;
  enc.label = doc.label;
  enc.soft_labels = doc.soft_labels;

  std::vector<std::string> toks = tokenize(clean(doc.text));
  long body = std::min<long>(static_cast<long>(toks.size()), max_len - 1);

  enc.token_ids.reserve(max_len);
  enc.token_ids.push_back(Vocabulary::kCls);
  std::map<int, int> tf;
  for (long i = 0; i < body; ++i) {
    int id = vocab.id_of(toks[i]);
    enc.token_ids.push_back(id);
    if (!Vocabulary::is_special(id)) tf[id]++;
  }
  enc.attention_mask.assign(enc.token_ids.size(), 1);
  while (static_cast<long>(enc.token_ids.size()) < max_len) {
    enc.token_ids.push_back(Vocabulary::kPad);
    enc.attention_mask.push_back(0);
  }
  enc.vocab_tf.assign(tf.begin(), tf.end());
  return enc;
}

std::vector<std::string> decode(const EncodedDocument& doc, const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (size_t i = 0; i < doc.token_ids.size(); ++i) {
    if (!doc.attention_mask[i]) break;
    out.push_back(vocab.tokens[doc.token_ids[i]]);
  }
  return out;
}

std::string Vocabulary::to_json() const {
  nlohmann::json j;
  j["version"] = 1;
  j["min_freq"] = min_freq;
  j["tokens"] = std::vector<std::string>(tokens.begin() + kNumSpecials, tokens.end());
  j["freqs"] = std::vector<long>(freqs.begin() + kNumSpecials, freqs.end());
  return j.dump();
}

Vocabulary Vocabulary::from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw Error("unsupported vocabulary file version");
  Vocabulary vocab;
  vocab.min_freq = j["min_freq"].get<int>();
  vocab.tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  vocab.freqs = {0, 0, 0, 0};
  auto toks = j["tokens"].get<std::vector<std::string>>();
  auto fr = j["freqs"].get<std::vector<long>>();
  if (toks.size() != fr.size()) throw Error("vocabulary tokens/freqs length mismatch");
  for (size_t i = 0; i < toks.size(); ++i) {
    vocab.ids[toks[i]] = static_cast<int>(vocab.tokens.size());
    vocab.tokens.push_back(toks[i]);
    vocab.freqs.push_back(fr[i]);
  }
  for (int i = 0; i < kNumSpecials; ++i) vocab.ids[vocab.tokens[i]] = i;
  return vocab;
}

void Vocabulary::save(const std::string& path) const { write_file_atomic(path, to_json()); }

Vocabulary Vocabulary::load(const std::string& path) { return from_json(read_file(path)); }

std::vector<RawDocument> load_jsonl(const std::string& path, bool require_labels) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open corpus file: " + path, 0);
  std::vector<RawDocument> docs;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what(), lineno);
    }
    RawDocument doc;
    if (!j.contains("text") || !j["text"].is_string())
      throw ParseError(path + ":" + std::to_string(lineno) + ": missing string field \"text\"",
                       lineno);
    doc.text = j["text"].get<std::string>();
    bool has_label = j.contains("label");
    bool has_soft = j.contains("soft_labels");
    if (has_label && has_soft)
      throw ParseError(path + ":" + std::to_string(lineno) +
                           ": exactly one of label/soft_labels allowed",
                       lineno);
    if (has_label) {
      if (!j["label"].is_number_integer() || j["label"].get<long>() < 0)
        throw ParseError(path + ":" + std::to_string(lineno) + ": label must be an integer >= 0",
                         lineno);
      doc.label = j["label"].get<int>();
    } else if (has_soft) {
      std::vector<double> soft;
      try {
        soft = j["soft_labels"].get<std::vector<double>>();
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what(), lineno);
      }
      double sum = 0.0;
      for (double p : soft) {
        if (p < 0.0)
          throw ParseError(path + ":" + std::to_string(lineno) + ": soft label < 0", lineno);
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw ParseError(path + ":" + std::to_string(lineno) + ": soft labels must sum to 1",
                         lineno);
      doc.soft_labels = std::move(soft);
    } else if (require_labels) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": row has no label/soft_labels",
                       lineno);
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace vgcnfuse
