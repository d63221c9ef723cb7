// Word-level text front-end. Every encoded sequence ends in a single EOT
// token whose hidden state serves as the sentence representation.

#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace clap {

struct TextError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kEot = 1;
  static constexpr int kUnk = 2;

  Vocabulary() {
    id_to_token_ = {"<pad>", "<eot>", "<unk>"};
    for (int i = 0; i < 3; ++i) token_to_id_[id_to_token_[i]] = i;
  }

  int add(const std::string& token) {
    auto it = token_to_id_.find(token);
    if (it != token_to_id_.end()) return it->second;
    int id = (int)id_to_token_.size();
    id_to_token_.push_back(token);
    token_to_id_[token] = id;
    return id;
  }

  int id_of(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  const std::string& token_of(int id) const {
    if (id < 0 || (std::size_t)id >= id_to_token_.size())
      throw TextError("Vocabulary: id out of range: " + std::to_string(id));
    return id_to_token_[id];
  }

  std::size_t size() const { return id_to_token_.size(); }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw TextError("Vocabulary::save: cannot open " + path);
    for (const auto& t : id_to_token_) out << t << "\n";
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TextError("Vocabulary::load: cannot open " + path);
    Vocabulary v;
    std::string line;
    int id = 0;
    while (std::getline(in, line)) {
      if (id < 3) {
        if (line != v.id_to_token_[id])
          throw TextError("Vocabulary::load: reserved token mismatch on line " +
                          std::to_string(id));
      } else {
        v.add(line);
      }
      ++id;
    }
    if (id < 3) throw TextError("Vocabulary::load: file too short");
    return v;
  }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, int> token_to_id_;
};

struct TokenSequence {
  std::vector<int> ids;      // padded to fixed length
  std::size_t eot_position = 0;
};

// Lowercase, strip punctuation, split on whitespace.
inline std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    unsigned char c = (unsigned char)ch;
    if (std::isalnum(c)) {
      cur.push_back((char)std::tolower(c));
    } else if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

// The max_size - 3 most frequent words, ties broken lexicographically.
inline Vocabulary build_vocab(const std::vector<std::string>& texts,
                              std::size_t max_size) {
  if (texts.empty()) throw TextError("build_vocab: empty corpus");
  if (max_size < 4) throw TextError("build_vocab: max_size must be >= 4");
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts)
    for (const auto& w : tokenize_words(t)) counts[w] += 1;
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  for (const auto& [word, count] : ranked) {
    (void)count;
    if (v.size() >= max_size) break;
    v.add(word);
  }
  return v;
}

// Word ids (UNK if out of vocabulary), truncated to max_text_len - 1,
// EOT appended, PAD-filled to max_text_len.
inline TokenSequence encode(const std::string& text, const Vocabulary& vocab,
                            std::size_t max_text_len) {
  if (max_text_len < 2) throw TextError("encode: max_text_len must be >= 2");
  TokenSequence seq;
  seq.ids.reserve(max_text_len);
  for (const auto& w : tokenize_words(text)) {
    if (seq.ids.size() >= max_text_len - 1) break;
    seq.ids.push_back(vocab.id_of(w));
  }
  seq.eot_position = seq.ids.size();
  seq.ids.push_back(Vocabulary::kEot);
  seq.ids.resize(max_text_len, Vocabulary::kPad);
  return seq;
}

inline std::string decode(const TokenSequence& seq, const Vocabulary& vocab) {
  std::string out;
  for (int id : seq.ids) {
    if (id == Vocabulary::kEot || id == Vocabulary::kPad) break;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token_of(id);
  }
  return out;
}

}  // namespace clap
