#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <map>
#include <sstream>

#include "clap/rng.hpp"
#include "clap/text.hpp"

using namespace clap;

TEST_CASE("build_vocab: small corpus") {
  Vocabulary v = build_vocab({"a b", "a"}, 10);
  CHECK(v.size() == 5);  // 3 reserved + {a, b}
  CHECK(v.id_of("a") == 3);  // most frequent first
  CHECK(v.id_of("b") == 4);
  CHECK(v.id_of("zebra") == Vocabulary::kUnk);
}

TEST_CASE("build_vocab: deterministic") {
  std::vector<std::string> corpus{"the cat sat", "the dog", "cat and dog"};
  Vocabulary a = build_vocab(corpus, 50);
  Vocabulary b = build_vocab(corpus, 50);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a.token_of((int)i) == b.token_of((int)i));
}

TEST_CASE("build_vocab: frequency ordering matches brute-force count") {
  Rng rng(4);
  std::vector<std::string> words{"alpha", "beta", "gamma", "delta", "eps"};
  std::vector<std::string> corpus;
  for (int i = 0; i < 200; ++i) {
    std::string line;
    int n = 1 + (int)rng.below(6);
    for (int j = 0; j < n; ++j) {
      if (!line.empty()) line += " ";
      line += words[rng.below(words.size())];
    }
    corpus.push_back(line);
  }
  // independent counting pass
  std::map<std::string, int> counts;
  for (const auto& line : corpus) {
    std::istringstream in(line);
    std::string w;
    while (in >> w) counts[w]++;
  }
  Vocabulary v = build_vocab(corpus, 100);
  int prev_count = INT32_MAX;
  std::string prev_token;
  for (std::size_t id = 3; id < v.size(); ++id) {
    int c = counts.at(v.token_of((int)id));
    CHECK(c <= prev_count);
    if (c == prev_count) CHECK(prev_token < v.token_of((int)id));
    prev_count = c;
    prev_token = v.token_of((int)id);
  }
}

TEST_CASE("encode: empty text is [EOT, PAD...]") {
  Vocabulary v = build_vocab({"a b"}, 10);
  TokenSequence seq = encode("", v, 8);
  CHECK(seq.ids.size() == 8);
  CHECK(seq.ids[0] == Vocabulary::kEot);
  CHECK(seq.eot_position == 0);
  for (std::size_t i = 1; i < 8; ++i) CHECK(seq.ids[i] == Vocabulary::kPad);
}

TEST_CASE("encode: 'a b' layout") {
  Vocabulary v = build_vocab({"a b", "a"}, 10);
  TokenSequence seq = encode("a b", v, 8);
  CHECK(seq.ids[0] == v.id_of("a"));
  CHECK(seq.ids[1] == v.id_of("b"));
  CHECK(seq.ids[2] == Vocabulary::kEot);
  CHECK(seq.eot_position == 2);
  CHECK(seq.ids[3] == Vocabulary::kPad);
}

TEST_CASE("encode: truncation keeps the EOT") {
  Vocabulary v = build_vocab({"a b c d e f"}, 20);
  TokenSequence seq = encode("a b c d e f", v, 4);
  CHECK(seq.ids.size() == 4);
  CHECK(seq.eot_position == 3);
  CHECK(seq.ids[3] == Vocabulary::kEot);
}

TEST_CASE("property: decode(encode(t)) reproduces in-vocab words in order") {
  std::vector<std::string> words{"red", "green", "blue", "loud", "soft",
                                 "hum", "hiss", "tone", "sweep", "click"};
  std::vector<std::string> corpus;
  for (const auto& w : words) corpus.push_back(w);
  Vocabulary v = build_vocab(corpus, 64);
  Rng rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    std::string text;
    int n = 1 + (int)rng.below(10);
    for (int j = 0; j < n; ++j) {
      if (!text.empty()) text += " ";
      text += words[rng.below(words.size())];
    }
    TokenSequence seq = encode(text, v, 32);
    CHECK(decode(seq, v) == text);
  }
}

TEST_CASE("property: exactly one EOT, after all content tokens") {
  Vocabulary v = build_vocab({"one two three four five six"}, 32);
  Rng rng(8);
  std::vector<std::string> pool{"one", "two", "three", "four",
                                "five", "six", "unknownword"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string text;
    int n = (int)rng.below(12);
    for (int j = 0; j < n; ++j) {
      if (!text.empty()) text += " ";
      text += pool[rng.below(pool.size())];
    }
    TokenSequence seq = encode(text, v, 10);
    int eots = 0;
    for (int id : seq.ids)
      if (id == Vocabulary::kEot) ++eots;
    CHECK(eots == 1);
    CHECK(seq.ids[seq.eot_position] == Vocabulary::kEot);
    for (std::size_t i = seq.eot_position + 1; i < seq.ids.size(); ++i)
      CHECK(seq.ids[i] == Vocabulary::kPad);
    for (std::size_t i = 0; i < seq.eot_position; ++i)
      CHECK(seq.ids[i] != Vocabulary::kPad);
  }
}

TEST_CASE("tokenizer lowercases and strips punctuation") {
  auto words = tokenize_words("Hello, World! it's 2-fold.");
  REQUIRE(words.size() == 6);
  CHECK(words[0] == "hello");
  CHECK(words[1] == "world");
  CHECK(words[2] == "it");
  CHECK(words[3] == "s");
  CHECK(words[4] == "2");
  CHECK(words[5] == "fold");
}

TEST_CASE("vocabulary file round trip") {
  Vocabulary v = build_vocab({"alpha beta gamma alpha"}, 16);
  auto path = std::filesystem::temp_directory_path() / "clap_vocab_test.txt";
  v.save(path.string());
  Vocabulary r = Vocabulary::load(path.string());
  REQUIRE(r.size() == v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    CHECK(r.token_of((int)i) == v.token_of((int)i));
  std::filesystem::remove(path);
}
