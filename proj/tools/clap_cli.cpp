// Command-line driver: synthesize the corpus, pretrain, train, evaluate,
// retrieve, and caption, all against artifacts on disk.

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>

#include "clap/config.hpp"

namespace fs = std::filesystem;
using namespace clap;

namespace {

RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return desk_config();
  return load_run_config(path);
}

Corpus require_manifest(const std::string& path) {
  if (!fs::exists(path))
    throw CorpusError("manifest not found at '" + path +
                      "'; run `clap_cli synth-data` first to create it");
  return load_manifest(path);
}

void require_checkpoint_file(const std::string& path, const std::string& hint) {
  if (!fs::exists(path))
    throw CheckpointError("checkpoint not found at '" + path + "'; " + hint);
}

Dataset build_dataset(const RunConfig& cfg, const std::string& manifest_path) {
  Corpus corpus = require_manifest(manifest_path);
  return prepare_dataset(corpus, cfg.mel, cfg.vocab_size, cfg.max_text_len);
}

int cmd_synth_data(const std::string& config_path, const std::string& out_dir) {
  RunConfig cfg = load_config_or_default(config_path);
  fs::create_directories(out_dir);
  Corpus corpus = generate_corpus(cfg.corpus);
  save_manifest(out_dir + "/manifest.jsonl", corpus);
  save_tasks(out_dir + "/tasks_val.jsonl", build_task_suite(corpus, "val"));
  save_tasks(out_dir + "/tasks_test.jsonl", build_task_suite(corpus, "test"));
  save_run_config(out_dir + "/config.json", cfg);
  std::size_t train = 0, val = 0, test = 0;
  for (const auto& e : corpus.entries) {
    train += e.split == "train";
    val += e.split == "val";
    test += e.split == "test";
  }
  std::cout << "wrote " << corpus.entries.size() << " entries (" << train
            << " train / " << val << " val / " << test << " test) to "
            << out_dir << "/manifest.jsonl\n";
  return 0;
}

int cmd_pretrain(const std::string& config_path, const std::string& manifest,
                 const std::string& run_dir) {
  RunConfig cfg = load_config_or_default(config_path);
  Dataset ds = build_dataset(cfg, manifest);
  fs::create_directories(run_dir);
  PretrainModel model(cfg.model.audio, cfg.model.text, cfg.mapper,
                      cfg.pretrain.seed);
  std::cout << "pretraining audio encoder: " << cfg.pretrain.steps
            << " steps, batch " << cfg.pretrain.batch_size << "\n";
  PretrainResult res = pretrain_audio_encoder(model, ds, cfg.pretrain);
  AdamState adam;
  CheckpointMeta meta{run_config_digest(cfg), cfg.pretrain.steps, 0.0};
  save_checkpoint(run_dir + "/pretrain.ckpt", model.store, adam, meta);
  std::cout << "per-token loss " << res.initial_loss << " -> " << res.final_loss
            << "\nwrote " << run_dir << "/pretrain.ckpt\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& manifest,
              const std::string& run_dir, const std::string& init_audio,
              bool resume) {
  RunConfig cfg = load_config_or_default(config_path);
  Dataset ds = build_dataset(cfg, manifest);
  fs::create_directories(run_dir);
  save_run_config(run_dir + "/config.json", cfg);

  ClapModel model(cfg.model, cfg.train.seed);
  if (!init_audio.empty()) {
    require_checkpoint_file(init_audio,
                            "run `clap_cli pretrain-audio` to produce it");
    PretrainModel pre(cfg.model.audio, cfg.model.text, cfg.mapper,
                      cfg.pretrain.seed);
    AdamState scratch;
    load_checkpoint(init_audio, pre.store, scratch);
    std::size_t copied =
        transfer_parameters(pre.store, model.parameters(), "audio.");
    std::cout << "initialized " << copied
              << " audio encoder parameters from " << init_audio << "\n";
  }

  TrainOptions opt = cfg.train;
  opt.run_dir = run_dir;
  opt.config_digest = run_config_digest(cfg);
  if (resume) {
    require_checkpoint_file(run_dir + "/last.ckpt",
                            "nothing to resume; train without --resume first");
    opt.resume_from = run_dir + "/last.ckpt";
  }

  TrainResult res = train_clap(model, ds, opt, [](const EpochRecord& r) {
    std::cout << "epoch " << std::setw(3) << r.epoch << "  train "
              << std::fixed << std::setprecision(4) << r.train_loss << "  val "
              << r.val_loss << "  lr " << std::setprecision(6)
              << r.learning_rate << "  zero-shot " << std::setprecision(4)
              << r.zero_shot << "\n";
  });
  std::cout << "best zero-shot " << res.best_zero_shot << "; checkpoints in "
            << run_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& config_path, const std::string& manifest,
             const std::string& ckpt, const std::string& split,
             const std::string& tasks_path) {
  RunConfig cfg = load_config_or_default(config_path);
  Dataset ds = build_dataset(cfg, manifest);
  require_checkpoint_file(ckpt, "run `clap_cli train-clap` to produce one");
  ClapModel model(cfg.model, cfg.train.seed);
  AdamState adam;
  load_checkpoint(ckpt, model.parameters(), adam);
  std::vector<TaskSpec> tasks = tasks_path.empty()
                                    ? build_task_suite(ds.corpus, split)
                                    : load_tasks(tasks_path);
  ZeroShotReport report = evaluate_zero_shot(model, ds, tasks);
  for (const auto& [name, value] : report.per_task)
    std::cout << std::left << std::setw(28) << name << std::fixed
              << std::setprecision(4) << value << "\n";
  std::cout << std::left << std::setw(28) << "aggregate" << std::fixed
            << std::setprecision(4) << report.aggregate << "\n";
  return 0;
}

int cmd_retrieve(const std::string& config_path, const std::string& manifest,
                 const std::string& ckpt, const std::string& split,
                 const std::string& query, std::size_t top_k) {
  RunConfig cfg = load_config_or_default(config_path);
  Dataset ds = build_dataset(cfg, manifest);
  require_checkpoint_file(ckpt, "run `clap_cli train-clap` to produce one");
  ClapModel model(cfg.model, cfg.train.seed);
  AdamState adam;
  load_checkpoint(ckpt, model.parameters(), adam);

  std::vector<std::string> ids = ds.contrastive_ids(split);
  if (ids.empty()) throw CorpusError("retrieve: split " + split + " is empty");
  Graph g;
  Tensor q = model.embed_text(g, encode(query, ds.vocab, ds.max_text_len));
  g.clear();
  std::vector<std::pair<double, std::string>> scored;
  for (const auto& id : ids) {
    Graph ga;
    Tensor a = model.embed_audio(ga, ds.feature(id));
    ga.clear();
    double dot = 0;
    for (std::size_t k = 0; k < q.size(); ++k)
      dot += q.value()[k] * a.value()[k];
    scored.emplace_back(dot, id);
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::cout << "query: " << query << "\n";
  for (std::size_t r = 0; r < std::min(top_k, scored.size()); ++r) {
    const auto& e = ds.corpus.by_id(scored[r].second);
    std::cout << std::setw(2) << (r + 1) << ". " << std::fixed
              << std::setprecision(4) << scored[r].first << "  "
              << scored[r].second << "  \"" << e.captions[0] << "\"\n";
  }
  return 0;
}

int cmd_train_captioner(const std::string& config_path,
                        const std::string& manifest, const std::string& ckpt,
                        const std::string& run_dir) {
  RunConfig cfg = load_config_or_default(config_path);
  Dataset ds = build_dataset(cfg, manifest);
  require_checkpoint_file(ckpt, "run `clap_cli train-clap` to produce one");
  ClapModel model(cfg.model, cfg.train.seed);
  AdamState adam;
  load_checkpoint(ckpt, model.parameters(), adam);

  fs::create_directories(run_dir);
  Captioner cap(model, cfg.mapper, cfg.caption.seed);
  CaptionTrainResult res = train_captioner(cap, ds, cfg.caption);
  AdamState fresh;
  CheckpointMeta meta{run_config_digest(cfg), cfg.caption.steps, 0.0};
  save_checkpoint(run_dir + "/captioner.ckpt", cap.store, fresh, meta);
  std::cout << "per-token loss " << res.initial_loss << " -> "
            << res.final_loss << "\n";

  // held-out caption quality: best token overlap against the references
  double total = 0;
  std::size_t n = 0;
  for (const auto* e : ds.corpus.split_entries("test")) {
    if (!e->has_tag("contrastive")) continue;
    std::string text =
        cap.caption(ds.feature(e->id), ds.vocab, cfg.max_decode_len);
    total += caption_overlap_score(text, e->captions);
    ++n;
  }
  std::cout << "test caption overlap " << std::fixed << std::setprecision(4)
            << (n ? total / (double)n : 0.0) << " over " << n
            << " clips\nwrote " << run_dir << "/captioner.ckpt\n";
  return 0;
}

int cmd_caption(const std::string& config_path, const std::string& manifest,
                const std::string& ckpt, const std::string& entry_id,
                const std::string& wav_path) {
  RunConfig cfg = load_config_or_default(config_path);
  Dataset ds = build_dataset(cfg, manifest);
  require_checkpoint_file(ckpt,
                          "run `clap_cli train-captioner` to produce one");
  ClapModel scaffold(cfg.model, cfg.train.seed);
  Captioner cap(scaffold, cfg.mapper, cfg.caption.seed);
  AdamState adam;
  load_checkpoint(ckpt, cap.store, adam);

  MelSpectrogram spec;
  if (!wav_path.empty()) {
    Rng rng(0);
    Waveform w = read_wav(wav_path);
    w = truncate_or_pad(w, cfg.mel.clip_seconds, rng);
    spec = log_mel(w, cfg.mel);
  } else {
    spec = ds.feature(entry_id);
  }
  std::cout << generate_caption(cap.decoder,
                                [&] {
                                  Graph g;
                                  Tensor p = cap.prefix_for(g, spec);
                                  g.clear();
                                  return p;
                                }(),
                                ds.vocab, cfg.max_decode_len)
            << "\n";
  return 0;
}

int cmd_gradcheck() {
  ClapConfig cfg;
  cfg.mel.n_mels = 8;
  cfg.audio.patch_freq = 4;
  cfg.audio.patch_time = 4;
  cfg.audio.width = 16;
  cfg.audio.depth = 1;
  cfg.audio.heads = 2;
  cfg.text.vocab_size = 32;
  cfg.text.width = 16;
  cfg.text.depth = 1;
  cfg.text.heads = 2;
  cfg.text.max_text_len = 8;
  cfg.text.max_prefix_len = 4;
  cfg.embed_dim = 8;
  ClapModel model(cfg, 1);
  model.parameters().get("temp.log_scale").value()[0] = std::log(5.0);

  std::vector<MelSpectrogram> specs;
  Rng rng(2);
  for (int s = 0; s < 2; ++s) {
    MelSpectrogram spec;
    spec.n_mels = 8;
    spec.n_frames = 8;
    spec.config = cfg.mel;
    spec.values.resize(64);
    for (auto& v : spec.values) v = rng.uniform(std::log(1e-10), 3.0);
    specs.push_back(spec);
  }
  Vocabulary v = build_vocab({"deep hum loud click"}, 32);
  std::vector<TokenSequence> seqs{encode("deep hum", v, 8),
                                  encode("loud click", v, 8)};
  auto f = [&](Graph& g) {
    Tensor ea = model.embed_audio_batch(g, specs);
    Tensor et = model.embed_text_batch(g, seqs);
    return clap_loss(g, model.similarity(g, et, ea));
  };
  GradCheckReport report = grad_check(f, model.parameters(), 1e-5, 4);
  for (const auto& e : report.entries)
    std::cout << std::left << std::setw(32) << e.name << std::scientific
              << std::setprecision(3) << e.max_rel_err << "  (" << e.checked
              << " coords)\n";
  std::cout << "max relative error " << std::scientific
            << report.max_rel_err << "\n";
  if (!report.within(1e-4)) {
    std::cout << "FAIL: exceeds 1e-4\n";
    return 1;
  }
  std::cout << "OK\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contrastive language-audio toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "data", manifest = "data/manifest.jsonl";
  std::string run_dir = "runs/clap", ckpt, init_audio, split = "test";
  std::string tasks_path, query, entry_id, wav_path;
  std::size_t top_k = 5;
  bool resume = false;

  auto add_common = [&](CLI::App* cmd, bool with_manifest) {
    cmd->add_option("--config", config_path, "run config JSON (default: desk)");
    if (with_manifest)
      cmd->add_option("--manifest", manifest, "corpus manifest path");
  };

  auto* synth = app.add_subcommand("synth-data", "generate the corpus");
  add_common(synth, false);
  synth->add_option("--out", out_dir, "output directory");

  auto* pre = app.add_subcommand("pretrain-audio",
                                 "multitask-pretrain the audio encoder");
  add_common(pre, true);
  pre->add_option("--run-dir", run_dir, "output directory");

  auto* train = app.add_subcommand("train-clap", "contrastive training");
  add_common(train, true);
  train->add_option("--run-dir", run_dir, "checkpoint/history directory");
  train->add_option("--init-audio", init_audio,
                    "pretrained audio encoder checkpoint");
  train->add_flag("--resume", resume, "continue from <run-dir>/last.ckpt");

  auto* eval = app.add_subcommand("eval-zeroshot", "zero-shot evaluation");
  add_common(eval, true);
  eval->add_option("--checkpoint", ckpt, "trained model checkpoint")
      ->required();
  eval->add_option("--split", split, "val or test");
  eval->add_option("--tasks", tasks_path, "task suite JSONL (default: built)");

  auto* retr = app.add_subcommand("retrieve", "text-to-audio retrieval");
  add_common(retr, true);
  retr->add_option("--checkpoint", ckpt, "trained model checkpoint")
      ->required();
  retr->add_option("--split", split, "split to search");
  retr->add_option("--query", query, "free-text query")->required();
  retr->add_option("--top-k", top_k, "results to print");

  auto* traincap =
      app.add_subcommand("train-captioner", "fit the frozen-model captioner");
  add_common(traincap, true);
  traincap->add_option("--checkpoint", ckpt, "trained model checkpoint")
      ->required();
  traincap->add_option("--run-dir", run_dir, "output directory");

  auto* capt = app.add_subcommand("caption", "caption a clip");
  add_common(capt, true);
  capt->add_option("--captioner", ckpt, "captioner checkpoint")->required();
  capt->add_option("--id", entry_id, "manifest entry id");
  capt->add_option("--wav", wav_path, "WAV file to caption instead");

  auto* gc = app.add_subcommand("gradcheck",
                                "finite-difference check of the full loss");
  (void)gc;

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth_data(config_path, out_dir);
    if (pre->parsed()) return cmd_pretrain(config_path, manifest, run_dir);
    if (train->parsed())
      return cmd_train(config_path, manifest, run_dir, init_audio, resume);
    if (eval->parsed())
      return cmd_eval(config_path, manifest, ckpt, split, tasks_path);
    if (retr->parsed())
      return cmd_retrieve(config_path, manifest, ckpt, split, query, top_k);
    if (traincap->parsed())
      return cmd_train_captioner(config_path, manifest, ckpt, run_dir);
    if (capt->parsed()) {
      if (entry_id.empty() && wav_path.empty())
        throw CorpusError("caption: pass --id or --wav");
      return cmd_caption(config_path, manifest, ckpt, entry_id, wav_path);
    }
    if (gc->parsed()) return cmd_gradcheck();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
