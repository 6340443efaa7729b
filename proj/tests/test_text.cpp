#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "testutil.hpp"
#include "vgcnfuse/io.hpp"
#include "vgcnfuse/text.hpp"

using namespace vgcnfuse;

TEST_SUITE_BEGIN("text");

TEST_CASE("clean strips urls and mentions, lower-cases, collapses spaces") {
  CHECK(clean("Check https://x.co NOW @bob") == "check now");
  CHECK(clean("") == "");
  CHECK(clean("Already clean text") == "already clean text");
  CHECK(clean("go to www.example.com/page now") == "go to now");
  CHECK(clean("mail a@b.org stays") == "mail a@b.org stays");  // not a mention
  CHECK(clean("  spaced\tout\n lines ") == "spaced out lines");
  CHECK(clean("ftp://files.example.org/x done") == "done");
}

TEST_CASE("clean is idempotent on random strings") {
  Rng rng(21);
  const std::string pieces[] = {"Hello", "WORLD", "@user", "https://a.b/c?d=1",
                                "www.site.io",  "it's",  "—",    "naïve",
                                "x@y",  "123",  "...",   "\tTAB"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string s;
    int n = static_cast<int>(rng.below(12));
    for (int i = 0; i < n; ++i) {
      s += pieces[rng.below(std::size(pieces))];
      s += rng.below(4) == 0 ? "  " : " ";
    }
    std::string once = clean(s);
    CHECK(clean(once) == once);
  }
}

TEST_CASE("tokenize splits words and punctuation deterministically") {
  CHECK(tokenize("it's a bit smug.") ==
        std::vector<std::string>{"it", "'", "s", "a", "bit", "smug", "."});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("word") == std::vector<std::string>{"word"});
  CHECK(tokenize("a,b") == std::vector<std::string>{"a", ",", "b"});
}

TEST_CASE("build_vocab keeps tokens above min_freq in (count, lex) order") {
  std::vector<RawDocument> corpus{{"a b", {}, {}}, {"a c", {}, {}}};
  SUBCASE("min_freq 2") {
    Vocabulary v = build_vocab(corpus, 2);
    REQUIRE(v.size() == 5);
    CHECK(v.tokens[4] == "a");
    CHECK(v.freqs[4] == 2);
  }
  SUBCASE("min_freq 1") {
    Vocabulary v = build_vocab(corpus, 1);
    REQUIRE(v.size() == 7);
    CHECK(v.tokens[4] == "a");  // highest count first
    CHECK(v.tokens[5] == "b");  // then lexicographic among ties
    CHECK(v.tokens[6] == "c");
  }
}

TEST_CASE("build_vocab raises EmptyVocabulary when nothing survives") {
  std::vector<RawDocument> corpus{{"a b c", {}, {}}};
  CHECK_THROWS_AS(build_vocab(corpus, 2), EmptyVocabulary);
}

TEST_CASE("build_vocab counts match a brute-force recount on 1000 random docs") {
  Rng rng(77);
  const std::string words[] = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta",
                               "eta",   "theta", "iota",  "kappa", "mu",      "nu"};
  std::vector<RawDocument> corpus;
  for (int d = 0; d < 1000; ++d) {
    std::string text;
    int n = 1 + static_cast<int>(rng.below(9));
    for (int i = 0; i < n; ++i) {
      text += words[rng.below(std::size(words))];
      text += " ";
    }
    corpus.push_back({text, {}, {}});
  }
  // independent oracle: plain map over a second tokenization pass
  std::map<std::string, long> oracle;
  for (const auto& doc : corpus) {
    std::istringstream ss(doc.text);
    std::string w;
    while (ss >> w) oracle[w]++;
  }
  Vocabulary v = build_vocab(corpus, 3);
  for (long i = Vocabulary::kNumSpecials; i < v.size(); ++i)
    CHECK(v.freqs[i] == oracle[v.tokens[i]]);
  for (const auto& [w, c] : oracle)
    if (c >= 3) CHECK(v.ids.count(w) == 1);

  SUBCASE("threaded counting merges to the same totals") {
    Vocabulary v4 = build_vocab(corpus, 3, 4);
    CHECK(v4.tokens == v.tokens);
    CHECK(v4.freqs == v.freqs);
  }
}

TEST_CASE("encode pads, truncates and counts term frequencies") {
  std::vector<RawDocument> corpus{{"a b", {}, {}}, {"a b", {}, {}}};
  Vocabulary v = build_vocab(corpus, 1);
  int a = v.id_of("a"), b = v.id_of("b");

  SUBCASE("padding") {
    EncodedDocument e = encode({"a b", {}, {}}, v, 5);
    CHECK(e.token_ids == std::vector<int32_t>{Vocabulary::kCls, a, b, Vocabulary::kPad,
                                              Vocabulary::kPad});
    CHECK(e.attention_mask == std::vector<int8_t>{1, 1, 1, 0, 0});
  }
  SUBCASE("term frequencies count kept body tokens") {
    EncodedDocument e = encode({"a a b", {}, {}}, v, 8);
    REQUIRE(e.vocab_tf.size() == 2);
    CHECK(e.vocab_tf[0] == std::pair<int, int>{a, 2});
    CHECK(e.vocab_tf[1] == std::pair<int, int>{b, 1});
  }
  SUBCASE("unknown tokens hit [UNK] and stay out of vocab_tf") {
    EncodedDocument e = encode({"a z", {}, {}}, v, 5);
    CHECK(e.token_ids[2] == Vocabulary::kUnk);
    REQUIRE(e.vocab_tf.size() == 1);
    CHECK(e.vocab_tf[0].first == a);
  }
  SUBCASE("truncation forces full length") {
    std::string text;
    for (int i = 0; i < 300; ++i) text += "a ";
    EncodedDocument e = encode({text, {}, {}}, v, 200);
    CHECK(e.token_ids.size() == 200);
    CHECK(std::all_of(e.attention_mask.begin(), e.attention_mask.end(),
                      [](int8_t m) { return m == 1; }));
    CHECK(e.vocab_tf[0].second == 199);  // only the kept body counts
  }
}

TEST_CASE("encode invariants hold on random documents") {
  Rng rng(31);
  const std::string words[] = {"red", "green", "blue", "cyan", "pink", "q!", "z."};
  std::vector<RawDocument> corpus;
  for (int d = 0; d < 60; ++d) {
    std::string text;
    int n = static_cast<int>(rng.below(30));
    for (int i = 0; i < n; ++i) {
      text += words[rng.below(std::size(words))];
      text += " ";
    }
    corpus.push_back({text, {}, {}});
  }
  Vocabulary v = build_vocab(corpus, 2);
  for (const auto& doc : corpus) {
    EncodedDocument e = encode(doc, v, 12);
    // sum(mask) = 1 + kept body tokens
    long mask_sum = 0, kept = 0;
    for (int8_t m : e.attention_mask) mask_sum += m;
    for (size_t i = 1; i < e.token_ids.size(); ++i)
      if (e.attention_mask[i]) ++kept;
    CHECK(mask_sum == 1 + kept);
    // decoded multiset minus specials/UNK is contained in the cleaned tokens
    std::multiset<std::string> source;
    for (const auto& t : tokenize(clean(doc.text))) source.insert(t);
    for (const auto& t : decode(e, v)) {
      if (t == "[CLS]" || t == "[UNK]") continue;
      auto it = source.find(t);
      REQUIRE(it != source.end());
      source.erase(it);
    }
    // vocab_tf never contains special ids
    for (const auto& [id, count] : e.vocab_tf) {
      CHECK_FALSE(Vocabulary::is_special(id));
      CHECK(count > 0);
    }
  }
}

TEST_CASE("vocabulary file round-trips") {
  std::vector<RawDocument> corpus{{"a b b c c c", {}, {}}};
  Vocabulary v = build_vocab(corpus, 1);
  std::string path = "vocab_roundtrip_test.json";
  v.save(path);
  Vocabulary w = Vocabulary::load(path);
  CHECK(w.tokens == v.tokens);
  CHECK(w.freqs == v.freqs);
  CHECK(w.min_freq == v.min_freq);
  CHECK(w.id_of("c") == v.id_of("c"));
  std::remove(path.c_str());
}

TEST_CASE("jsonl loader enforces the row contract") {
  auto write_tmp = [](const std::string& body) {
    std::string path = "corpus_loader_test.jsonl";
    write_file_atomic(path, body);
    return path;
  };

  SUBCASE("valid rows, hard and soft labels") {
    std::string p = write_tmp(
        "{\"text\": \"good movie\", \"label\": 1}\n"
        "{\"text\": \"bad one\", \"soft_labels\": [0.75, 0.25]}\n");
    auto docs = load_jsonl(p, true);
    REQUIRE(docs.size() == 2);
    CHECK(*docs[0].label == 1);
    CHECK((*docs[1].soft_labels)[0] == doctest::Approx(0.75));
    std::remove(p.c_str());
  }
  SUBCASE("malformed json reports the line") {
    std::string p = write_tmp("{\"text\": \"ok\", \"label\": 0}\n{oops\n");
    try {
      load_jsonl(p, true);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    std::remove(p.c_str());
  }
  SUBCASE("label and soft_labels together are rejected") {
    std::string p =
        write_tmp("{\"text\": \"x\", \"label\": 0, \"soft_labels\": [0.5, 0.5]}\n");
    CHECK_THROWS_AS(load_jsonl(p, true), ParseError);
    std::remove(p.c_str());
  }
  SUBCASE("soft labels must sum to one") {
    std::string p = write_tmp("{\"text\": \"x\", \"soft_labels\": [0.5, 0.4]}\n");
    CHECK_THROWS_AS(load_jsonl(p, false), ParseError);
    std::remove(p.c_str());
  }
  SUBCASE("unlabeled rows pass only when labels are not required") {
    std::string p = write_tmp("{\"text\": \"no label here\"}\n");
    CHECK(load_jsonl(p, false).size() == 1);
    CHECK_THROWS_AS(load_jsonl(p, true), ParseError);
    std::remove(p.c_str());
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_jsonl("no_such_file.jsonl", true), ParseError); }
}

TEST_SUITE_END();
