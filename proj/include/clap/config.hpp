// Run configuration: one JSON document that pins the corpus, the feature
// frontend, the model sizes and every training knob. Loading is strict --
// unknown keys are an error, so typos cannot silently fall back to defaults.

#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "clap/captioning.hpp"
#include "clap/corpus.hpp"
#include "clap/model.hpp"
#include "clap/train.hpp"

namespace clap {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  CorpusConfig corpus;
  MelConfig mel;
  ClapConfig model;  // model.mel is kept in sync with `mel`
  MapperConfig mapper;
  TrainOptions train;
  PretrainOptions pretrain;
  CaptionTrainOptions caption;
  std::size_t vocab_size = 512;
  std::size_t max_text_len = 32;
  std::size_t max_decode_len = 24;

  void finalize() {
    // clips are exactly clip_seconds long, so truncation never randomizes
    mel.clip_seconds = corpus.clip_seconds;
    model.mel = mel;
    model.text.vocab_size = vocab_size;
    model.text.max_text_len = max_text_len;
    model.text.max_prefix_len = std::max<std::size_t>(mapper.prefix_len(),
                                                      model.text.max_prefix_len);
    mapper.audio_width = model.audio.width;
    mapper.text_width = model.text.width;
    model.validate();
  }
};

// Desk-scale reference run: small transformers, 1 s clips, minutes of training.
inline RunConfig desk_config() {
  RunConfig cfg;
  cfg.corpus.n_classes = 6;
  cfg.corpus.n_train = 2000;
  cfg.corpus.n_val = 200;
  cfg.corpus.n_test = 400;
  cfg.corpus.clip_seconds = 1.0;
  cfg.corpus.seed = 7;
  cfg.model.audio.width = 64;
  cfg.model.audio.depth = 2;
  cfg.model.audio.heads = 4;
  cfg.model.audio.patch_time = 16;
  cfg.model.text.width = 64;
  cfg.model.text.depth = 2;
  cfg.model.text.heads = 4;
  cfg.model.embed_dim = 64;
  cfg.mapper.k = 4;
  cfg.mapper.hidden = 128;
  cfg.train.batch_size = 32;
  cfg.train.epochs = 75;
  cfg.train.learning_rate = 1e-3;
  cfg.train.plateau_patience = 25;
  cfg.finalize();
  return cfg;
}

// Full-scale preset: the sizes a real run would use. Provided for
// completeness; it is far beyond a desktop CPU budget.
inline RunConfig paper_config() {
  RunConfig cfg = desk_config();
  cfg.corpus.clip_seconds = 7.0;
  cfg.model.audio.width = 768;
  cfg.model.audio.depth = 12;
  cfg.model.audio.heads = 12;
  cfg.model.text.width = 768;
  cfg.model.text.depth = 12;
  cfg.model.text.heads = 12;
  cfg.model.embed_dim = 1024;
  cfg.train.batch_size = 1536;
  cfg.vocab_size = 50000;
  cfg.max_text_len = 77;
  cfg.finalize();
  return cfg;
}

namespace detail {

inline void reject_unknown(const nlohmann::json& j,
                           const std::vector<std::string>& known,
                           const std::string& section) {
  if (!j.is_object())
    throw ConfigError("config: section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ConfigError("config: unknown key '" + key + "' in section '" +
                        section + "'");
  }
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
  return nlohmann::json{
      {"corpus",
       {{"n_classes", cfg.corpus.n_classes},
        {"n_train", cfg.corpus.n_train},
        {"n_val", cfg.corpus.n_val},
        {"n_test", cfg.corpus.n_test},
        {"clip_seconds", cfg.corpus.clip_seconds},
        {"sample_rate", cfg.corpus.sample_rate},
        {"mixture_fraction", cfg.corpus.mixture_fraction},
        {"qa_fraction", cfg.corpus.qa_fraction},
        {"retrieval_pool", cfg.corpus.retrieval_pool},
        {"seed", cfg.corpus.seed}}},
      {"mel",
       {{"sample_rate_hz", cfg.mel.sample_rate_hz},
        {"window_size", cfg.mel.window_size},
        {"hop_size", cfg.mel.hop_size},
        {"n_mels", cfg.mel.n_mels},
        {"fmin_hz", cfg.mel.fmin_hz},
        {"fmax_hz", cfg.mel.fmax_hz},
        {"log_epsilon", cfg.mel.log_epsilon}}},
      {"model",
       {{"audio_width", cfg.model.audio.width},
        {"audio_depth", cfg.model.audio.depth},
        {"audio_heads", cfg.model.audio.heads},
        {"patch_freq", cfg.model.audio.patch_freq},
        {"patch_time", cfg.model.audio.patch_time},
        {"text_width", cfg.model.text.width},
        {"text_depth", cfg.model.text.depth},
        {"text_heads", cfg.model.text.heads},
        {"embed_dim", cfg.model.embed_dim},
        {"temperature_init", cfg.model.temperature_init},
        {"mapper_k", cfg.mapper.k},
        {"mapper_hidden", cfg.mapper.hidden},
        {"vocab_size", cfg.vocab_size},
        {"max_text_len", cfg.max_text_len},
        {"max_decode_len", cfg.max_decode_len}}},
      {"train",
       {{"batch_size", cfg.train.batch_size},
        {"epochs", cfg.train.epochs},
        {"steps_per_epoch", cfg.train.steps_per_epoch},
        {"learning_rate", cfg.train.learning_rate},
        {"plateau_patience", cfg.train.plateau_patience},
        {"plateau_factor", cfg.train.plateau_factor},
        {"seed", cfg.train.seed}}},
      {"pretrain",
       {{"steps", cfg.pretrain.steps},
        {"batch_size", cfg.pretrain.batch_size},
        {"learning_rate", cfg.pretrain.learning_rate},
        {"seed", cfg.pretrain.seed}}},
      {"caption",
       {{"steps", cfg.caption.steps},
        {"batch_size", cfg.caption.batch_size},
        {"learning_rate", cfg.caption.learning_rate},
        {"seed", cfg.caption.seed}}}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown(
      j, {"corpus", "mel", "model", "train", "pretrain", "caption"}, "root");
  RunConfig cfg = desk_config();
  if (j.contains("corpus")) {
    const auto& c = j.at("corpus");
    detail::reject_unknown(c,
                           {"n_classes", "n_train", "n_val", "n_test",
                            "clip_seconds", "sample_rate", "mixture_fraction",
                            "qa_fraction", "retrieval_pool", "seed"},
                           "corpus");
    detail::maybe(c, "n_classes", cfg.corpus.n_classes);
    detail::maybe(c, "n_train", cfg.corpus.n_train);
    detail::maybe(c, "n_val", cfg.corpus.n_val);
    detail::maybe(c, "n_test", cfg.corpus.n_test);
    detail::maybe(c, "clip_seconds", cfg.corpus.clip_seconds);
    detail::maybe(c, "sample_rate", cfg.corpus.sample_rate);
    detail::maybe(c, "mixture_fraction", cfg.corpus.mixture_fraction);
    detail::maybe(c, "qa_fraction", cfg.corpus.qa_fraction);
    detail::maybe(c, "retrieval_pool", cfg.corpus.retrieval_pool);
    detail::maybe(c, "seed", cfg.corpus.seed);
  }
  if (j.contains("mel")) {
    const auto& m = j.at("mel");
    detail::reject_unknown(m,
                           {"sample_rate_hz", "window_size", "hop_size",
                            "n_mels", "fmin_hz", "fmax_hz", "log_epsilon"},
                           "mel");
    detail::maybe(m, "sample_rate_hz", cfg.mel.sample_rate_hz);
    detail::maybe(m, "window_size", cfg.mel.window_size);
    detail::maybe(m, "hop_size", cfg.mel.hop_size);
    detail::maybe(m, "n_mels", cfg.mel.n_mels);
    detail::maybe(m, "fmin_hz", cfg.mel.fmin_hz);
    detail::maybe(m, "fmax_hz", cfg.mel.fmax_hz);
    detail::maybe(m, "log_epsilon", cfg.mel.log_epsilon);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::reject_unknown(
        m,
        {"audio_width", "audio_depth", "audio_heads", "patch_freq",
         "patch_time", "text_width", "text_depth", "text_heads", "embed_dim",
         "temperature_init", "mapper_k", "mapper_hidden", "vocab_size",
         "max_text_len", "max_decode_len"},
        "model");
    detail::maybe(m, "audio_width", cfg.model.audio.width);
    detail::maybe(m, "audio_depth", cfg.model.audio.depth);
    detail::maybe(m, "audio_heads", cfg.model.audio.heads);
    detail::maybe(m, "patch_freq", cfg.model.audio.patch_freq);
    detail::maybe(m, "patch_time", cfg.model.audio.patch_time);
    detail::maybe(m, "text_width", cfg.model.text.width);
    detail::maybe(m, "text_depth", cfg.model.text.depth);
    detail::maybe(m, "text_heads", cfg.model.text.heads);
    detail::maybe(m, "embed_dim", cfg.model.embed_dim);
    detail::maybe(m, "temperature_init", cfg.model.temperature_init);
    detail::maybe(m, "mapper_k", cfg.mapper.k);
    detail::maybe(m, "mapper_hidden", cfg.mapper.hidden);
    detail::maybe(m, "vocab_size", cfg.vocab_size);
    detail::maybe(m, "max_text_len", cfg.max_text_len);
    detail::maybe(m, "max_decode_len", cfg.max_decode_len);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::reject_unknown(t,
                           {"batch_size", "epochs", "steps_per_epoch",
                            "learning_rate", "plateau_patience",
                            "plateau_factor", "seed"},
                           "train");
    detail::maybe(t, "batch_size", cfg.train.batch_size);
    detail::maybe(t, "epochs", cfg.train.epochs);
    detail::maybe(t, "steps_per_epoch", cfg.train.steps_per_epoch);
    detail::maybe(t, "learning_rate", cfg.train.learning_rate);
    detail::maybe(t, "plateau_patience", cfg.train.plateau_patience);
    detail::maybe(t, "plateau_factor", cfg.train.plateau_factor);
    detail::maybe(t, "seed", cfg.train.seed);
  }
  if (j.contains("pretrain")) {
    const auto& p = j.at("pretrain");
    detail::reject_unknown(
        p, {"steps", "batch_size", "learning_rate", "seed"}, "pretrain");
    detail::maybe(p, "steps", cfg.pretrain.steps);
    detail::maybe(p, "batch_size", cfg.pretrain.batch_size);
    detail::maybe(p, "learning_rate", cfg.pretrain.learning_rate);
    detail::maybe(p, "seed", cfg.pretrain.seed);
  }
  if (j.contains("caption")) {
    const auto& c = j.at("caption");
    detail::reject_unknown(
        c, {"steps", "batch_size", "learning_rate", "seed"}, "caption");
    detail::maybe(c, "steps", cfg.caption.steps);
    detail::maybe(c, "batch_size", cfg.caption.batch_size);
    detail::maybe(c, "learning_rate", cfg.caption.learning_rate);
    detail::maybe(c, "seed", cfg.caption.seed);
  }
  cfg.finalize();
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: parse error in " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

inline void save_run_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw ConfigError("config: cannot write " + path);
  out << run_config_to_json(cfg).dump(2) << "\n";
}

// Canonical serialization; stored in checkpoints and compared on resume.
inline std::string run_config_digest(const RunConfig& cfg) {
  return run_config_to_json(cfg).dump();
}

}  // namespace clap
