// The joint audio-text model: both encoders, linear projection heads into the
// shared embedding space, the learnable temperature, and the symmetric
// contrastive objective.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "clap/encoders.hpp"
#include "clap/nn.hpp"
#include "clap/optim.hpp"
#include "clap/tensor.hpp"

namespace clap {

struct ClapConfig {
  MelConfig mel;
  AudioEncoderConfig audio;
  TextModelConfig text;
  std::size_t embed_dim = 64;        // d, shared space width
  double temperature_init = 0.007;   // logits are similarities / temperature
  double scale_min = 1.0;            // clamp on exp(log_scale)
  double scale_max = 200.0;

  void validate() const {
    mel.validate();
    audio.validate(mel.n_mels);
    if (embed_dim == 0) throw DimensionError("clap: embed_dim must be positive");
    if (temperature_init <= 0.0)
      throw DimensionError("clap: temperature must be positive");
  }
};

class ClapModel {
 public:
  explicit ClapModel(const ClapConfig& cfg, std::uint64_t seed)
      : cfg_(cfg) {
    cfg.validate();
    Rng rng(seed);
    audio_encoder_ = AudioEncoder(store_, "audio", cfg.audio, rng);
    text_model_ = TextModel(store_, "text", cfg.text, rng);
    proj_audio_ = Linear(store_, "proj_audio", cfg.audio.width, cfg.embed_dim,
                         rng, /*with_bias=*/false);
    proj_text_ = Linear(store_, "proj_text", cfg.text.width, cfg.embed_dim,
                        rng, /*with_bias=*/false);
    log_scale_ = store_.create("temp.log_scale", {1, 1});
    log_scale_.value()[0] = std::log(1.0 / cfg.temperature_init);
  }

  const ClapConfig& config() const { return cfg_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  AudioEncoder& audio_encoder() { return audio_encoder_; }
  const AudioEncoder& audio_encoder() const { return audio_encoder_; }
  TextModel& text_model() { return text_model_; }
  const TextModel& text_model() const { return text_model_; }

  double logit_scale() const { return std::exp(log_scale_.value()[0]); }

  // Adam steps move log_scale freely; the clamp keeps exp(log_scale) inside
  // [scale_min, scale_max] so training cannot collapse the softmax.
  void clamp_temperature() {
    double lo = std::log(cfg_.scale_min), hi = std::log(cfg_.scale_max);
    double& v = log_scale_.value()[0];
    v = std::min(std::max(v, lo), hi);
  }

  // Unit-norm audio embedding in the shared space, [1, d].
  Tensor embed_audio(Graph& g, const MelSpectrogram& spec) const {
    Tensor v = audio_encoder_.encode(g, spec);
    return l2_normalize_rows(g, proj_audio_.forward(g, v));
  }

  Tensor embed_audio_batch(Graph& g,
                           const std::vector<MelSpectrogram>& specs) const {
    Tensor v = audio_encoder_.encode_batch(g, specs);
    return l2_normalize_rows(g, proj_audio_.forward(g, v));
  }

  // Unit-norm text embedding in the shared space, [1, d].
  Tensor embed_text(Graph& g, const TokenSequence& seq) const {
    Tensor u = text_model_.encode(g, seq);
    return l2_normalize_rows(g, proj_text_.forward(g, u));
  }

  Tensor embed_text_batch(Graph& g,
                          const std::vector<TokenSequence>& seqs) const {
    Tensor u = text_model_.encode_batch(g, seqs);
    return l2_normalize_rows(g, proj_text_.forward(g, u));
  }

  // Scaled similarity matrix C[i,j] = exp(log_scale) * <text_i, audio_j> over
  // unit-norm embeddings.
  Tensor similarity(Graph& g, Tensor text_embeddings,
                    Tensor audio_embeddings) const {
    Tensor sim = matmul(g, text_embeddings, transpose(g, audio_embeddings));
    return scale_by(g, sim, exp(g, log_scale_));
  }

 private:
  ClapConfig cfg_;
  ParameterStore store_;
  AudioEncoder audio_encoder_;
  TextModel text_model_;
  Linear proj_audio_;
  Linear proj_text_;
  Tensor log_scale_;
};

// Symmetric InfoNCE over a square similarity matrix whose diagonal holds the
// matched pairs: the average of text->audio and audio->text cross-entropies.
inline Tensor clap_loss(Graph& g, Tensor similarity_matrix) {
  if (similarity_matrix.ndim() != 2 ||
      similarity_matrix.rows() != similarity_matrix.cols())
    throw DimensionError("clap_loss: need a square similarity matrix, got " +
                         shape_str(similarity_matrix.shape()));
  Tensor lt = mean_all(g, diag(g, log_softmax_rows(g, similarity_matrix)));
  Tensor la = mean_all(
      g, diag(g, log_softmax_rows(g, transpose(g, similarity_matrix))));
  return scale(g, add(g, lt, la), -0.5);
}

}  // namespace clap
