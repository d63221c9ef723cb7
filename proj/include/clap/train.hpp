// Training loops: dataset preparation, contrastive training with plateau
// learning-rate decay and checkpointing, multitask generative pretraining of
// the audio encoder, and the frozen-everything captioning head.

#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "clap/captioning.hpp"
#include "clap/checkpoint.hpp"
#include "clap/corpus.hpp"
#include "clap/model.hpp"
#include "clap/zeroshot.hpp"

namespace clap {

// --- dataset: cached features + tokenized captions ---------------------------

struct Dataset {
  Corpus corpus;
  Vocabulary vocab;
  std::size_t max_text_len = 32;
  std::map<std::string, MelSpectrogram> features;           // by entry id
  std::map<std::string, std::vector<TokenSequence>> tokens;  // by entry id

  const MelSpectrogram& feature(const std::string& id) const {
    auto it = features.find(id);
    if (it == features.end())
      throw CorpusError("dataset: no features for entry " + id);
    return it->second;
  }

  std::vector<std::string> contrastive_ids(const std::string& split) const {
    std::vector<std::string> ids;
    for (const auto* e : corpus.split_entries(split))
      if (e->has_tag("contrastive")) ids.push_back(e->id);
    return ids;
  }
};

// Extra strings folded into the vocabulary so prompts and pretraining targets
// never degrade to <unk>.
inline std::vector<std::string> auxiliary_vocab_text(const Corpus& corpus) {
  std::vector<std::string> text{
      "this is a",     "the sound is", "question what sound is this answer",
      "question how loud is the sound answer",
      "question is the sound tonal answer yes no",
      "a tonal sound", "a noisy sound", "a soft sound", "a moderate sound",
      "a loud sound"};
  for (const auto& cls : sound_classes()) {
    text.push_back(cls.noun);
    for (const auto& v : cls.variants) text.push_back(v);
  }
  for (const auto& l : loudness_levels()) text.push_back(l);
  (void)corpus;
  return text;
}

inline Dataset prepare_dataset(const Corpus& corpus, const MelConfig& mel,
                               std::size_t vocab_size,
                               std::size_t max_text_len) {
  Dataset ds;
  ds.corpus = corpus;
  ds.max_text_len = max_text_len;
  std::vector<std::string> vocab_corpus;
  for (const auto* e : corpus.split_entries("train"))
    for (const auto& c : e->captions) vocab_corpus.push_back(c);
  for (const auto& s : auxiliary_vocab_text(corpus)) vocab_corpus.push_back(s);
  ds.vocab = build_vocab(vocab_corpus, vocab_size);
  for (const auto& e : corpus.entries) {
    ds.features.emplace(e.id, log_mel(e.render(corpus.config.sample_rate), mel));
    std::vector<TokenSequence> seqs;
    for (const auto& c : e.captions)
      seqs.push_back(encode(c, ds.vocab, max_text_len));
    ds.tokens.emplace(e.id, std::move(seqs));
  }
  return ds;
}

// --- zero-shot evaluation against a trained model -----------------------------

struct ZeroShotReport {
  std::vector<std::pair<std::string, double>> per_task;  // name -> metric
  double aggregate = 0.0;

  double metric_of(const std::string& name_suffix) const {
    for (const auto& [name, value] : per_task)
      if (name.size() >= name_suffix.size() &&
          name.compare(name.size() - name_suffix.size(), name_suffix.size(),
                       name_suffix) == 0)
        return value;
    throw MetricError("zero-shot report: no task matching " + name_suffix);
  }
};

inline ZeroShotReport evaluate_zero_shot(const ClapModel& model,
                                         const Dataset& ds,
                                         const std::vector<TaskSpec>& tasks) {
  std::map<std::string, std::vector<double>> audio_cache, text_cache;
  auto embed_audio = [&](const std::string& id) {
    auto it = audio_cache.find(id);
    if (it != audio_cache.end()) return it->second;
    Graph g;
    Tensor e = model.embed_audio(g, ds.feature(id));
    g.clear();
    return audio_cache.emplace(id, e.value()).first->second;
  };
  auto embed_text = [&](const std::string& prompt) {
    auto it = text_cache.find(prompt);
    if (it != text_cache.end()) return it->second;
    Graph g;
    Tensor e = model.embed_text(g, encode(prompt, ds.vocab, ds.max_text_len));
    g.clear();
    return text_cache.emplace(prompt, e.value()).first->second;
  };
  ZeroShotReport report;
  std::vector<double> values;
  for (const auto& task : tasks) {
    double v = evaluate_task(task, embed_audio, embed_text, model.logit_scale());
    report.per_task.emplace_back(task.name, v);
    values.push_back(v);
  }
  report.aggregate = zero_shot_score(values);
  return report;
}

// --- contrastive training -----------------------------------------------------

struct TrainOptions {
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  std::size_t steps_per_epoch = 0;  // 0 = one full pass over the train split
  double learning_rate = 1e-3;
  std::size_t plateau_patience = 15;
  double plateau_factor = 0.1;
  double plateau_min_delta = 1e-4;
  std::uint64_t seed = 1;
  std::string run_dir;  // checkpoints + history land here; "" = in-memory only
  std::string config_digest;
  std::string resume_from;  // checkpoint to continue from, "" = fresh start
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double learning_rate = 0.0;
  double zero_shot = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  double best_zero_shot = 0.0;
  std::string best_checkpoint;
  std::string last_checkpoint;
};

namespace detail {

inline double clap_batch_loss(ClapModel& model, const Dataset& ds,
                              const std::vector<std::string>& ids,
                              const std::vector<std::size_t>& caption_choice,
                              bool backward) {
  Graph g;
  std::vector<MelSpectrogram> specs;
  std::vector<TokenSequence> seqs;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    specs.push_back(ds.feature(ids[i]));
    const auto& options = ds.tokens.at(ids[i]);
    seqs.push_back(options[caption_choice[i] % options.size()]);
  }
  Tensor ea = model.embed_audio_batch(g, specs);
  Tensor et = model.embed_text_batch(g, seqs);
  Tensor loss = clap_loss(g, model.similarity(g, et, ea));
  double value = loss.item();
  if (backward) g.backward(loss);
  g.clear();
  return value;
}

inline void append_history(const std::string& run_dir, const EpochRecord& r) {
  if (run_dir.empty()) return;
  std::ofstream out(run_dir + "/history.jsonl", std::ios::app);
  out << nlohmann::json{{"epoch", r.epoch},
                        {"train_loss", r.train_loss},
                        {"val_loss", r.val_loss},
                        {"learning_rate", r.learning_rate},
                        {"zero_shot", r.zero_shot}}
             .dump()
      << "\n";
}

}  // namespace detail

inline TrainResult train_clap(
    ClapModel& model, const Dataset& ds, const TrainOptions& opt,
    const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  if (!opt.run_dir.empty()) std::filesystem::create_directories(opt.run_dir);
  AdamState adam;
  adam.learning_rate = opt.learning_rate;
  std::size_t start_epoch = 1;
  if (!opt.resume_from.empty()) {
    CheckpointMeta meta = load_checkpoint(opt.resume_from, model.parameters(),
                                          adam);
    if (!opt.config_digest.empty() && !meta.config_digest.empty() &&
        meta.config_digest != opt.config_digest)
      throw CheckpointError(
          "train_clap: checkpoint " + opt.resume_from +
          " was written under a different configuration; refusing to resume");
    start_epoch = meta.epoch + 1;
  }

  std::vector<std::string> train_ids = ds.contrastive_ids("train");
  std::vector<std::string> val_ids = ds.contrastive_ids("val");
  if (train_ids.size() < opt.batch_size)
    throw CorpusError("train_clap: train split smaller than one batch");
  std::vector<TaskSpec> val_tasks = build_task_suite(ds.corpus, "val");

  TrainResult result;
  double best_val_loss = 1e300;
  std::size_t epochs_since_improvement = 0;

  for (std::size_t epoch = start_epoch; epoch <= opt.epochs; ++epoch) {
    // one stream per epoch, so interrupted-and-resumed runs replay the exact
    // batch order of an uninterrupted run
    Rng rng(opt.seed * 1000003 + epoch);
    std::sort(train_ids.begin(), train_ids.end());
    rng.shuffle(train_ids);
    const std::size_t full_steps = train_ids.size() / opt.batch_size;
    const std::size_t steps =
        opt.steps_per_epoch == 0 ? full_steps
                                 : std::min(opt.steps_per_epoch, full_steps);
    double train_loss = 0.0;
    for (std::size_t s = 0; s < steps; ++s) {
      std::vector<std::string> batch(
          train_ids.begin() + s * opt.batch_size,
          train_ids.begin() + (s + 1) * opt.batch_size);
      std::vector<std::size_t> choice;
      for (std::size_t i = 0; i < batch.size(); ++i)
        choice.push_back(rng.below(4));
      train_loss +=
          detail::clap_batch_loss(model, ds, batch, choice, /*backward=*/true);
      adam_step(model.parameters(), adam);
      model.clamp_temperature();
    }
    train_loss /= (double)steps;

    // deterministic validation pass: fixed order, first caption
    double val_loss = 0.0;
    std::size_t val_steps = 0;
    for (std::size_t s = 0; (s + 1) * opt.batch_size <= val_ids.size(); ++s) {
      std::vector<std::string> batch(
          val_ids.begin() + s * opt.batch_size,
          val_ids.begin() + (s + 1) * opt.batch_size);
      std::vector<std::size_t> choice(batch.size(), 0);
      val_loss +=
          detail::clap_batch_loss(model, ds, batch, choice, /*backward=*/false);
      ++val_steps;
    }
    val_loss /= (double)std::max<std::size_t>(val_steps, 1);

    ZeroShotReport zs = evaluate_zero_shot(model, ds, val_tasks);

    EpochRecord rec{epoch, train_loss, val_loss, adam.learning_rate,
                    zs.aggregate};
    result.history.push_back(rec);
    detail::append_history(opt.run_dir, rec);
    if (on_epoch) on_epoch(rec);

    if (!opt.run_dir.empty()) {
      CheckpointMeta meta{opt.config_digest, epoch, zs.aggregate};
      result.last_checkpoint = opt.run_dir + "/last.ckpt";
      save_checkpoint(result.last_checkpoint, model.parameters(), adam, meta);
      if (zs.aggregate >= result.best_zero_shot) {
        result.best_checkpoint = opt.run_dir + "/best.ckpt";
        save_checkpoint(result.best_checkpoint, model.parameters(), adam, meta);
      }
    }
    result.best_zero_shot = std::max(result.best_zero_shot, zs.aggregate);

    // reduce-on-plateau: decay when the validation loss stops improving
    if (val_loss < best_val_loss - opt.plateau_min_delta) {
      best_val_loss = val_loss;
      epochs_since_improvement = 0;
    } else if (++epochs_since_improvement >= opt.plateau_patience) {
      adam.learning_rate *= opt.plateau_factor;
      epochs_since_improvement = 0;
    }
  }
  return result;
}

// --- multitask generative pretraining of the audio encoder --------------------

// Audio encoder + mapper + decoder trained to emit task-dependent text:
// captions, class statements, attribute statements, and Q&A answers.
struct PretrainModel {
  ParameterStore store;
  AudioEncoder audio_encoder;
  Mapper mapper;
  TextModel decoder;

  PretrainModel(const AudioEncoderConfig& audio_cfg,
                const TextModelConfig& text_cfg, const MapperConfig& map_cfg,
                std::uint64_t seed) {
    Rng rng(seed);
    audio_encoder = AudioEncoder(store, "audio", audio_cfg, rng);
    mapper = Mapper(store, "mapper", map_cfg, rng);
    decoder = TextModel(store, "text", text_cfg, rng);
  }

  Tensor loss(Graph& g, const MelSpectrogram& spec,
              const TokenSequence& target) const {
    Tensor prefix = mapper.forward(g, audio_encoder.encode(g, spec));
    return captioning_loss(g, decoder, prefix, target);
  }
};

// Task-dependent target sentence for one manifest entry.
inline std::string pretrain_target_text(const ManifestEntry& e,
                                        const std::string& task, Rng& rng) {
  if (task == "pretrain:caption")
    return e.captions[rng.below(e.captions.size())];
  if (task == "pretrain:qa") return e.captions[0];
  if (task == "pretrain:classify") return "this is a " + e.labels[0];
  if (task == "pretrain:attr")
    return "the sound is " + e.loudness + " and " + e.variant;
  throw CorpusError("pretrain: unknown task tag " + task);
}

struct PretrainOptions {
  std::size_t steps = 200;
  std::size_t batch_size = 8;  // examples summed per optimizer step
  double learning_rate = 1e-3;
  std::uint64_t seed = 2;
};

struct PretrainResult {
  double initial_loss = 0.0;  // mean per-token NLL over the first batch
  double final_loss = 0.0;
};

inline PretrainResult pretrain_audio_encoder(PretrainModel& model,
                                             const Dataset& ds,
                                             const PretrainOptions& opt) {
  // pool of (entry, task) examples, sampled uniformly
  std::vector<std::pair<const ManifestEntry*, std::string>> pool;
  for (const auto* e : ds.corpus.split_entries("train"))
    for (const auto& task : e->tasks)
      if (task.rfind("pretrain:", 0) == 0) pool.emplace_back(e, task);
  if (pool.empty()) throw CorpusError("pretrain: no pretraining examples");

  Rng rng(opt.seed);
  AdamState adam;
  adam.learning_rate = opt.learning_rate;
  PretrainResult result;
  for (std::size_t step = 0; step < opt.steps; ++step) {
    Graph g;
    std::vector<Tensor> losses;
    std::size_t total_tokens = 0;
    for (std::size_t b = 0; b < opt.batch_size; ++b) {
      const auto& [entry, task] = pool[rng.below(pool.size())];
      TokenSequence target = encode(pretrain_target_text(*entry, task, rng),
                                    ds.vocab, ds.max_text_len);
      losses.push_back(model.loss(g, ds.feature(entry->id), target));
      total_tokens += target.eot_position + 1;
    }
    Tensor total = losses[0];
    for (std::size_t i = 1; i < losses.size(); ++i)
      total = add(g, total, losses[i]);
    Tensor loss = scale(g, total, 1.0 / (double)total_tokens);
    double value = loss.item();
    if (step == 0) result.initial_loss = value;
    result.final_loss = value;
    g.backward(loss);
    g.clear();
    adam_step(model.store, adam);
  }
  return result;
}

// Copies every parameter under `prefix` from src into dst (names must match).
inline std::size_t transfer_parameters(const ParameterStore& src,
                                       ParameterStore& dst,
                                       const std::string& prefix) {
  std::size_t copied = 0;
  for (const auto& name : src.names_with_prefix(prefix)) {
    if (!dst.has(name)) continue;
    Tensor from = src.get(name);
    Tensor to = dst.get(name);
    if (from.shape() != to.shape())
      throw DimensionError("transfer_parameters: shape mismatch for " + name);
    to.value() = from.value();
    ++copied;
  }
  if (copied == 0)
    throw std::logic_error("transfer_parameters: no parameters under prefix " +
                           prefix);
  return copied;
}

// --- captioning head over a frozen joint model --------------------------------

// Own store seeded with copies of the trained encoders; only the mapper
// trains. After training, the frozen parameters are asserted bit-identical.
struct Captioner {
  ParameterStore store;
  AudioEncoder audio_encoder;
  Mapper mapper;
  TextModel decoder;

  Captioner(const ClapModel& trained, const MapperConfig& map_cfg,
            std::uint64_t seed) {
    Rng rng(seed);
    audio_encoder =
        AudioEncoder(store, "audio", trained.audio_encoder().config(), rng);
    mapper = Mapper(store, "mapper", map_cfg, rng);
    decoder = TextModel(store, "text", trained.text_model().config(), rng);
    transfer_parameters(trained.parameters(), store, "audio.");
    transfer_parameters(trained.parameters(), store, "text.");
  }

  Tensor prefix_for(Graph& g, const MelSpectrogram& spec) const {
    return mapper.forward(g, audio_encoder.encode(g, spec));
  }

  std::string caption(const MelSpectrogram& spec, const Vocabulary& vocab,
                      std::size_t max_decode_len) const {
    Graph g;
    Tensor prefix = prefix_for(g, spec);
    g.clear();
    return generate_caption(decoder, prefix, vocab, max_decode_len);
  }
};

struct CaptionTrainOptions {
  std::size_t steps = 300;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  std::uint64_t seed = 3;
};

struct CaptionTrainResult {
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

inline CaptionTrainResult train_captioner(Captioner& cap, const Dataset& ds,
                                          const CaptionTrainOptions& opt) {
  cap.store.freeze_all_except_prefix("mapper.");
  // snapshot the frozen values so the contract can be asserted afterwards
  std::map<std::string, std::vector<double>> frozen_snapshot;
  for (const auto& name : cap.store.names())
    if (cap.store.is_frozen(name))
      frozen_snapshot[name] = cap.store.get(name).value();

  std::vector<const ManifestEntry*> pool;
  for (const auto* e : ds.corpus.split_entries("train"))
    if (e->has_tag("pretrain:caption")) pool.push_back(e);
  if (pool.empty()) throw CorpusError("train_captioner: no caption examples");

  Rng rng(opt.seed);
  AdamState adam;
  adam.learning_rate = opt.learning_rate;
  CaptionTrainResult result;
  for (std::size_t step = 0; step < opt.steps; ++step) {
    Graph g;
    std::vector<Tensor> losses;
    std::size_t total_tokens = 0;
    for (std::size_t b = 0; b < opt.batch_size; ++b) {
      const ManifestEntry* e = pool[rng.below(pool.size())];
      const auto& seqs = ds.tokens.at(e->id);
      const TokenSequence& target = seqs[rng.below(seqs.size())];
      Tensor prefix = cap.prefix_for(g, ds.feature(e->id));
      losses.push_back(captioning_loss(g, cap.decoder, prefix, target));
      total_tokens += target.eot_position + 1;
    }
    Tensor total = losses[0];
    for (std::size_t i = 1; i < losses.size(); ++i)
      total = add(g, total, losses[i]);
    Tensor loss = scale(g, total, 1.0 / (double)total_tokens);
    double value = loss.item();
    if (step == 0) result.initial_loss = value;
    result.final_loss = value;
    g.backward(loss);
    g.clear();
    adam_step(cap.store, adam);
  }

  for (const auto& [name, values] : frozen_snapshot)
    if (cap.store.get(name).value() != values)
      throw std::logic_error("train_captioner: frozen parameter " + name +
                             " changed during training");
  cap.store.unfreeze_all();
  return result;
}

}  // namespace clap
