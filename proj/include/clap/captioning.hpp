// Captioning on top of the joint model: a mapper network that turns an audio
// embedding into a prefix of pseudo-tokens, the prefix-conditioned
// autoregressive loss, greedy decoding, and the token-overlap caption score.

#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "clap/encoders.hpp"
#include "clap/nn.hpp"
#include "clap/tensor.hpp"
#include "clap/text.hpp"

namespace clap {

struct MapperConfig {
  std::size_t audio_width = 128;  // V, mapper input
  std::size_t text_width = 128;   // U, per-prefix-vector output
  std::size_t k = 4;              // prefix length is 2k
  std::size_t hidden = 256;

  std::size_t prefix_len() const { return 2 * k; }
};

// Two-layer GELU MLP from one audio vector to 2k prefix vectors in the text
// model's embedding space.
class Mapper {
 public:
  Mapper() = default;
  Mapper(ParameterStore& store, const std::string& prefix,
         const MapperConfig& cfg, Rng& rng)
      : cfg_(cfg) {
    fc1_ = Linear(store, prefix + ".fc1", cfg.audio_width, cfg.hidden, rng);
    fc2_ = Linear(store, prefix + ".fc2", cfg.hidden,
                  cfg.prefix_len() * cfg.text_width, rng);
  }

  const MapperConfig& config() const { return cfg_; }

  // [1, V] -> [2k, U]
  Tensor forward(Graph& g, Tensor audio_vec) const {
    if (audio_vec.ndim() != 2 || audio_vec.rows() != 1 ||
        audio_vec.cols() != cfg_.audio_width)
      throw DimensionError("mapper: expected [1x" +
                           std::to_string(cfg_.audio_width) + "] input, got " +
                           shape_str(audio_vec.shape()));
    Tensor flat = fc2_.forward(g, gelu(g, fc1_.forward(g, audio_vec)));
    std::vector<Tensor> rows;
    for (std::size_t p = 0; p < cfg_.prefix_len(); ++p)
      rows.push_back(
          slice_cols(g, flat, p * cfg_.text_width, (p + 1) * cfg_.text_width));
    return concat_rows(g, rows);
  }

 private:
  MapperConfig cfg_;
  Linear fc1_;
  Linear fc2_;
};

// Prefix-conditioned negative log-likelihood of the caption tokens
// c_1..c_l (content plus the closing EOT; PAD never contributes). The sum is
// over token positions, so uniform logits give exactly l * ln(vocab_size).
inline Tensor captioning_loss(Graph& g, const TextModel& model, Tensor prefix,
                              const TokenSequence& caption) {
  if (caption.eot_position >= caption.ids.size() ||
      caption.ids[caption.eot_position] != Vocabulary::kEot)
    throw std::logic_error("captioning_loss: caption has no EOT");
  const std::size_t prefix_len = prefix.rows();
  const std::size_t l = caption.eot_position + 1;  // c_1..c_l, c_l = EOT
  std::vector<int> targets(caption.ids.begin(), caption.ids.begin() + l);
  std::vector<int> inputs(targets.begin(), targets.end() - 1);  // c_1..c_{l-1}
  Tensor logits = model.decode_logits(g, inputs, prefix);
  // positions prefix_len-1 .. prefix_len+l-2 predict c_1 .. c_l
  Tensor predicted = slice_rows(g, logits, prefix_len - 1, prefix_len + l - 1);
  Tensor logp = gather_cols(g, log_softmax_rows(g, predicted), targets);
  return scale(g, sum_all(g, logp), -1.0);
}

// Greedy decoding from a prefix until EOT or the length budget.
inline std::vector<int> generate_caption_ids(const TextModel& model,
                                             Tensor prefix,
                                             std::size_t max_decode_len) {
  std::vector<int> ids;
  const std::size_t prefix_len = prefix.rows();
  for (std::size_t step = 0; step < max_decode_len; ++step) {
    Graph g;  // inference graph, discarded each step
    Tensor logits = model.decode_logits(g, ids, prefix);
    const std::size_t last = prefix_len + ids.size() - 1;
    const std::size_t vocab = logits.cols();
    std::size_t argmax = 0;
    for (std::size_t j = 1; j < vocab; ++j)
      if (logits.value()[last * vocab + j] >
          logits.value()[last * vocab + argmax])
        argmax = j;
    if ((int)argmax == Vocabulary::kEot) break;
    ids.push_back((int)argmax);
    g.clear();
  }
  return ids;
}

inline std::string generate_caption(const TextModel& model, Tensor prefix,
                                    const Vocabulary& vocab,
                                    std::size_t max_decode_len) {
  std::vector<int> ids = generate_caption_ids(model, prefix, max_decode_len);
  std::string text;
  for (int id : ids) {
    // the embedding table may be larger than the built vocabulary; rows past
    // its end (and specials) have no surface form
    if (id < 0 || (std::size_t)id >= vocab.size()) continue;
    if (id == Vocabulary::kPad || id == Vocabulary::kEot ||
        id == Vocabulary::kUnk)
      continue;
    if (!text.empty()) text += " ";
    text += vocab.token_of(id);
  }
  return text;
}

namespace detail {

inline std::map<std::string, int> word_counts(const std::string& text) {
  std::map<std::string, int> counts;
  for (const auto& w : tokenize_words(text)) counts[w]++;
  return counts;
}

}  // namespace detail

// Token multiset F1 between a candidate and one reference.
inline double caption_token_f1(const std::string& candidate,
                               const std::string& reference) {
  auto c = detail::word_counts(candidate);
  auto r = detail::word_counts(reference);
  int overlap = 0, n_c = 0, n_r = 0;
  for (const auto& [w, n] : c) {
    n_c += n;
    auto it = r.find(w);
    if (it != r.end()) overlap += std::min(n, it->second);
  }
  for (const auto& [w, n] : r) n_r += n;
  if (n_c + n_r == 0) return 0.0;
  return 2.0 * overlap / (double)(n_c + n_r);
}

// Caption quality: the best token F1 over all reference captions.
inline double caption_overlap_score(const std::string& candidate,
                                    const std::vector<std::string>& references) {
  double best = 0.0;
  for (const auto& ref : references)
    best = std::max(best, caption_token_f1(candidate, ref));
  return best;
}

}  // namespace clap
