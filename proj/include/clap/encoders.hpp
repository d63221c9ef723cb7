// The two encoders: a ViT-style patch transformer over log-mel spectrograms
// and a causal decoder-only text model whose end-of-text hidden state is the
// sentence representation.

#pragma once

#include <string>
#include <vector>

#include "clap/audio.hpp"
#include "clap/nn.hpp"
#include "clap/optim.hpp"
#include "clap/tensor.hpp"
#include "clap/text.hpp"

namespace clap {

struct AudioEncoderConfig {
  std::size_t patch_freq = 8;
  std::size_t patch_time = 8;
  std::size_t width = 128;  // V
  std::size_t depth = 4;
  std::size_t heads = 4;
  std::size_t max_patches = 1024;

  void validate(std::size_t n_mels) const {
    if (n_mels % patch_freq != 0)
      throw DimensionError("audio encoder: " + std::to_string(n_mels) +
                           " mel bins not divisible by patch_freq " +
                           std::to_string(patch_freq));
    if (width % heads != 0)
      throw DimensionError("audio encoder: width not divisible by heads");
  }
};

class AudioEncoder {
 public:
  AudioEncoder() = default;
  AudioEncoder(ParameterStore& store, const std::string& prefix,
               const AudioEncoderConfig& cfg, Rng& rng)
      : cfg_(cfg) {
    const std::size_t patch_dim = cfg.patch_freq * cfg.patch_time;
    patch_embed_ = Linear(store, prefix + ".patch_embed", patch_dim, cfg.width, rng);
    pos_embed_ = store.create(prefix + ".pos_embed", {cfg.max_patches, cfg.width});
    for (std::size_t i = 0; i < cfg.depth; ++i)
      blocks_.emplace_back(store, prefix + ".block" + std::to_string(i),
                           cfg.width, cfg.heads, rng);
    ln_f_ = LayerNormModule(store, prefix + ".ln_f", cfg.width);
  }

  const AudioEncoderConfig& config() const { return cfg_; }

  // Non-overlapping patch grid over [F x T]; a trailing partial time patch is
  // dropped. Cell values are shifted/scaled so silence maps to 0 and full
  // scale is O(1).
  Tensor patchify(const MelSpectrogram& spec) const {
    cfg_.validate(spec.n_mels);
    if (spec.n_frames < cfg_.patch_time)
      throw DimensionError("audio encoder: " + std::to_string(spec.n_frames) +
                           " frames shorter than patch_time " +
                           std::to_string(cfg_.patch_time));
    const std::size_t fp = spec.n_mels / cfg_.patch_freq;
    const std::size_t tp = spec.n_frames / cfg_.patch_time;
    const std::size_t n_patches = fp * tp;
    if (n_patches > cfg_.max_patches)
      throw DimensionError("audio encoder: " + std::to_string(n_patches) +
                           " patches exceed max_patches " +
                           std::to_string(cfg_.max_patches));
    const double floor_val = std::log(spec.config.log_epsilon);
    const double scale = 1.0 / -floor_val;
    const std::size_t pd = cfg_.patch_freq * cfg_.patch_time;
    Tensor patches = Tensor::zeros({n_patches, pd});
    for (std::size_t pf = 0; pf < fp; ++pf)
      for (std::size_t pt = 0; pt < tp; ++pt) {
        const std::size_t p = pf * tp + pt;
        for (std::size_t i = 0; i < cfg_.patch_freq; ++i)
          for (std::size_t j = 0; j < cfg_.patch_time; ++j) {
            double v = spec.at(pf * cfg_.patch_freq + i, pt * cfg_.patch_time + j);
            patches.value()[p * pd + i * cfg_.patch_time + j] =
                (v - floor_val) * scale;
          }
      }
    return patches;
  }

  // One V-vector per clip: patch embed -> +pos -> blocks -> ln -> mean pool.
  Tensor encode(Graph& g, const MelSpectrogram& spec) const {
    Tensor x = patch_embed_.forward(g, patchify(spec));
    Tensor pos = slice_rows(g, pos_embed_, 0, x.rows());
    x = add(g, x, pos);
    Tensor no_mask;
    for (const auto& block : blocks_) x = block.forward(g, x, no_mask);
    x = ln_f_.forward(g, x);
    return mean(g, x, 0);  // [1, V]
  }

  Tensor encode_batch(Graph& g, const std::vector<MelSpectrogram>& specs) const {
    std::vector<Tensor> rows;
    rows.reserve(specs.size());
    for (const auto& s : specs) rows.push_back(encode(g, s));
    return concat_rows(g, rows);  // [N, V]
  }

 private:
  AudioEncoderConfig cfg_;
  Linear patch_embed_;
  Tensor pos_embed_;
  std::vector<TransformerBlock> blocks_;
  LayerNormModule ln_f_;
};

struct TextModelConfig {
  std::size_t vocab_size = 512;
  std::size_t width = 128;  // U
  std::size_t depth = 4;
  std::size_t heads = 4;
  std::size_t max_text_len = 32;
  std::size_t max_prefix_len = 16;

  std::size_t max_seq_len() const { return max_text_len + max_prefix_len; }
};

// Decoder-only causal transformer. Doubles as the contrastive text encoder
// (EOT hidden state) and as the captioning decoder (tied-embedding logits).
class TextModel {
 public:
  TextModel() = default;
  TextModel(ParameterStore& store, const std::string& prefix,
            const TextModelConfig& cfg, Rng& rng)
      : cfg_(cfg) {
    if (cfg.width % cfg.heads != 0)
      throw DimensionError("text model: width not divisible by heads");
    tok_embed_ = store.create_normal(prefix + ".tok_embed",
                                     {cfg.vocab_size, cfg.width}, rng, 0.02);
    pos_embed_ = store.create(prefix + ".pos_embed",
                              {cfg.max_seq_len(), cfg.width});
    for (std::size_t i = 0; i < cfg.depth; ++i)
      blocks_.emplace_back(store, prefix + ".block" + std::to_string(i),
                           cfg.width, cfg.heads, rng);
    ln_f_ = LayerNormModule(store, prefix + ".ln_f", cfg.width);
  }

  const TextModelConfig& config() const { return cfg_; }

  // Hidden states for (optional continuous prefix) ++ token embeddings under
  // a causal mask. Returns [prefix_len + ids.size(), width].
  Tensor forward_hidden(Graph& g, const std::vector<int>& ids,
                        Tensor prefix = Tensor()) const {
    std::size_t plen = 0;
    if (prefix.defined()) {
      if (prefix.ndim() != 2 || prefix.cols() != cfg_.width)
        throw DimensionError("text model: prefix width " +
                             shape_str(prefix.shape()) + " != model width " +
                             std::to_string(cfg_.width));
      plen = prefix.rows();
    }
    const std::size_t len = plen + ids.size();
    if (len == 0) throw DimensionError("text model: empty input");
    if (len > cfg_.max_seq_len())
      throw DimensionError("text model: sequence of " + std::to_string(len) +
                           " exceeds max length " +
                           std::to_string(cfg_.max_seq_len()));
    Tensor x;
    if (ids.empty()) {
      x = prefix;
    } else {
      Tensor toks = embedding_lookup(g, tok_embed_, ids);
      x = prefix.defined() ? concat_rows(g, {prefix, toks}) : toks;
    }
    x = add(g, x, slice_rows(g, pos_embed_, 0, len));
    Tensor mask = causal_mask(len);
    for (const auto& block : blocks_) x = block.forward(g, x, mask);
    return ln_f_.forward(g, x);
  }

  // Sentence representation: hidden state at the EOT position. Trailing PAD
  // is excluded from the computation entirely, so the representation is
  // exactly PAD-invariant.
  Tensor encode(Graph& g, const TokenSequence& seq) const {
    if (seq.eot_position >= seq.ids.size() ||
        seq.ids[seq.eot_position] != Vocabulary::kEot)
      throw std::logic_error("text model: sequence has no EOT at eot_position");
    std::vector<int> content(seq.ids.begin(),
                             seq.ids.begin() + seq.eot_position + 1);
    Tensor h = forward_hidden(g, content);
    return slice_rows(g, h, h.rows() - 1, h.rows());  // [1, U]
  }

  Tensor encode_batch(Graph& g, const std::vector<TokenSequence>& seqs) const {
    std::vector<Tensor> rows;
    rows.reserve(seqs.size());
    for (const auto& s : seqs) rows.push_back(encode(g, s));
    return concat_rows(g, rows);  // [N, U]
  }

  // Next-token logits at every position (tied embeddings).
  // Position i's logits depend only on the prefix and tokens <= i.
  Tensor decode_logits(Graph& g, const std::vector<int>& ids,
                       Tensor prefix = Tensor()) const {
    Tensor h = forward_hidden(g, ids, prefix);
    return matmul(g, h, transpose(g, tok_embed_));
  }

  Tensor token_embedding_table() const { return tok_embed_; }

 private:
  TextModelConfig cfg_;
  Tensor tok_embed_;
  Tensor pos_embed_;
  std::vector<TransformerBlock> blocks_;
  LayerNormModule ln_f_;
};

}  // namespace clap
