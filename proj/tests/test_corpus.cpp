#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "clap/corpus.hpp"

using namespace clap;

namespace {

CorpusConfig tiny_config() {
  CorpusConfig cfg;
  cfg.n_classes = 4;
  cfg.n_train = 60;
  cfg.n_val = 20;
  cfg.n_test = 30;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST_CASE("counting contract: 6 classes, 2000/200/400, seed 7 -> 2600 entries") {
  CorpusConfig cfg;
  cfg.n_classes = 6;
  cfg.n_train = 2000;
  cfg.n_val = 200;
  cfg.n_test = 400;
  cfg.seed = 7;
  Corpus c = generate_corpus(cfg);
  CHECK(c.entries.size() == 2600);
  std::map<std::string, std::size_t> per_split;
  for (const auto& e : c.entries) per_split[e.split]++;
  CHECK(per_split["train"] == 2000);
  CHECK(per_split["val"] == 200);
  CHECK(per_split["test"] == 400);
}

TEST_CASE("splits are disjoint by id and every entry is well-formed") {
  Corpus c = generate_corpus(tiny_config());
  std::set<std::string> ids;
  for (const auto& e : c.entries) {
    CHECK(ids.insert(e.id).second);
    CHECK_FALSE(e.captions.empty());
    CHECK_FALSE(e.events.empty());
    CHECK(e.labels.size() == e.events.size());
    CHECK_FALSE(e.tasks.empty());
    for (const auto& ev : e.events) CHECK_NOTHROW(ev.validate());
  }
}

TEST_CASE("generation is a pure function of the config") {
  Corpus a = generate_corpus(tiny_config());
  Corpus b = generate_corpus(tiny_config());
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].id == b.entries[i].id);
    CHECK(a.entries[i].synth_seed == b.entries[i].synth_seed);
    CHECK(a.entries[i].captions == b.entries[i].captions);
    CHECK(a.entries[i].events[0].freq_hz == b.entries[i].events[0].freq_hz);
  }
  CorpusConfig other = tiny_config();
  other.seed = 12;
  Corpus d = generate_corpus(other);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.entries.size() && !any_diff; ++i)
    any_diff = a.entries[i].events[0].freq_hz != d.entries[i].events[0].freq_hz;
  CHECK(any_diff);
}

TEST_CASE("every caption of a single event contains the canonical class noun") {
  Corpus c = generate_corpus(tiny_config());
  for (const auto& e : c.entries) {
    if (e.events.size() != 1 || !e.has_tag("contrastive")) continue;
    for (const auto& caption : e.captions) {
      CHECK(caption.find(e.labels[0]) != std::string::npos);
      CHECK(caption.find(e.loudness) != std::string::npos);
      CHECK(caption.find(e.variant) != std::string::npos);
    }
  }
}

TEST_CASE("rendering an entry is deterministic and finite") {
  Corpus c = generate_corpus(tiny_config());
  const ManifestEntry& e = c.entries[0];
  Waveform a = e.render();
  Waveform b = e.render();
  REQUIRE(a.samples.size() == b.samples.size());
  CHECK(a.samples.size() ==
        (std::size_t)std::llround(c.config.clip_seconds * 44100.0));
  double peak = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i] == b.samples[i]);
    peak = std::max(peak, std::abs(a.samples[i]));
  }
  CHECK(peak > 0.0);
  CHECK(peak <= 1.5);
}

TEST_CASE("synthesize: sine oracle at a known sample") {
  SoundEvent ev;
  ev.kind = EventKind::SineHigh;
  ev.freq_hz = 4410.0;  // exactly 10 samples per cycle at 44.1 kHz
  ev.amplitude = 0.5;
  ev.duration_s = 1.0;
  Waveform w = synthesize(ev, 0);
  // [DERIVED] sin(2*pi*4410*t) at sample 25 is sin(5*pi) = 0
  CHECK(std::abs(w.samples[25]) < 1e-9);
  // [DERIVED] quarter cycle later (samples 2.5 per quarter): sample 2 is
  // 0.5*sin(0.4*pi) = 0.47552825814757677
  CHECK(w.samples[2] == doctest::Approx(0.47552825814757677).epsilon(1e-12));
}

TEST_CASE("event validation rejects out-of-range parameters") {
  SoundEvent ev;
  ev.kind = EventKind::SineLow;
  ev.freq_hz = 10.0;  // below filterbank fmin
  CHECK_THROWS_AS(ev.validate(), CorpusError);
  ev.freq_hz = 100.0;
  ev.duration_s = 0.1;
  CHECK_THROWS_AS(ev.validate(), CorpusError);
  ev.duration_s = 1.0;
  ev.amplitude = 2.0;
  CHECK_THROWS_AS(ev.validate(), CorpusError);
}

TEST_CASE("manifest round trip preserves everything") {
  Corpus c = generate_corpus(tiny_config());
  auto path = std::filesystem::temp_directory_path() / "clap_manifest_test.jsonl";
  save_manifest(path.string(), c);
  Corpus r = load_manifest(path.string());
  CHECK(r.config.n_classes == c.config.n_classes);
  CHECK(r.config.seed == c.config.seed);
  CHECK(r.config.clip_seconds == c.config.clip_seconds);
  REQUIRE(r.entries.size() == c.entries.size());
  for (std::size_t i = 0; i < c.entries.size(); ++i) {
    CHECK(r.entries[i].id == c.entries[i].id);
    CHECK(r.entries[i].split == c.entries[i].split);
    CHECK(r.entries[i].synth_seed == c.entries[i].synth_seed);
    CHECK(r.entries[i].captions == c.entries[i].captions);
    CHECK(r.entries[i].labels == c.entries[i].labels);
    CHECK(r.entries[i].tasks == c.entries[i].tasks);
    CHECK(r.entries[i].events[0].freq_hz == c.entries[i].events[0].freq_hz);
    CHECK(r.entries[i].events[0].amplitude == c.entries[i].events[0].amplitude);
  }
  std::filesystem::remove(path);
}

TEST_CASE("manifest loader: strict validation with line numbers") {
  auto path = std::filesystem::temp_directory_path() / "clap_manifest_bad.jsonl";
  auto write_lines = [&](const std::vector<std::string>& lines) {
    std::ofstream out(path);
    for (const auto& l : lines) out << l << "\n";
  };
  const std::string header =
      R"({"type":"header","schema":"clap-corpus","version":1,"n_classes":2,)"
      R"("n_train":1,"n_val":1,"n_test":1,"clip_seconds":1.0,)"
      R"("sample_rate":44100.0,"mixture_fraction":0.0,"qa_fraction":0.0,)"
      R"("retrieval_pool":64,"seed":7})";
  const std::string good_entry =
      R"({"type":"entry","id":"train-0","split":"train","seed":1,)"
      R"("events":[{"kind":"sine_low","freq_hz":100.0,"freq2_hz":0.0,)"
      R"("amplitude":0.5,"duration_s":1.0}],"captions":["a deep hum"],)"
      R"("labels":["hum"],"tasks":["contrastive"],"loudness":"soft",)"
      R"("variant":"deep"})";

  write_lines({header, good_entry});
  CHECK_NOTHROW(load_manifest(path.string()));

  // unknown field, with the offending line number in the message
  std::string bad = good_entry;
  bad.insert(bad.size() - 1, R"(,"mystery":3)");
  write_lines({header, good_entry, bad});
  CHECK_THROWS_WITH_AS(load_manifest(path.string()),
                       doctest::Contains("line 3"), CorpusError);
  CHECK_THROWS_WITH_AS(load_manifest(path.string()),
                       doctest::Contains("mystery"), CorpusError);

  // entry without captions names its id
  std::string no_captions = good_entry;
  auto pos = no_captions.find(R"(["a deep hum"])");
  no_captions.replace(pos, std::string(R"(["a deep hum"])").size(), "[]");
  write_lines({header, no_captions});
  CHECK_THROWS_WITH_AS(load_manifest(path.string()),
                       doctest::Contains("train-0"), CorpusError);

  // missing header
  write_lines({good_entry});
  CHECK_THROWS_WITH_AS(load_manifest(path.string()),
                       doctest::Contains("header"), CorpusError);

  // malformed JSON reports the line
  write_lines({header, "{not json"});
  CHECK_THROWS_WITH_AS(load_manifest(path.string()),
                       doctest::Contains("line 2"), CorpusError);
  std::filesystem::remove(path);
}

TEST_CASE("task suite covers all five metrics and validates") {
  Corpus c = generate_corpus(tiny_config());
  for (const std::string split : {"val", "test"}) {
    auto tasks = build_task_suite(c, split);
    std::set<std::string> metrics;
    for (const auto& t : tasks) {
      CHECK(t.split == split);
      CHECK_NOTHROW(t.validate());
      metrics.insert(t.metric);
    }
    CHECK(metrics.count("accuracy") == 1);
    CHECK(metrics.count("f1") == 1);
    CHECK(metrics.count("map") == 1);
    CHECK(metrics.count("recall_at_1") == 1);
    CHECK(metrics.count("map_at_10") == 1);
  }
}

TEST_CASE("retrieval task: item ids are distinct and truths form a bijection") {
  Corpus c = generate_corpus(tiny_config());
  auto tasks = build_task_suite(c, "test");
  for (const auto& t : tasks) {
    if (t.kind != TaskKind::Retrieval) continue;
    std::set<std::string> ids;
    std::set<int> truths;
    for (const auto& item : t.items) {
      CHECK(ids.insert(item.id).second);
      REQUIRE(item.truth.size() == 1);
      CHECK(truths.insert(item.truth[0]).second);
    }
    CHECK(t.items.size() == t.prompts.size());
  }
}

TEST_CASE("mixtures carry two distinct labels") {
  Corpus c = generate_corpus(tiny_config());
  std::size_t mixtures = 0;
  for (const auto& e : c.entries) {
    if (e.events.size() != 2) continue;
    ++mixtures;
    CHECK(e.labels[0] != e.labels[1]);
  }
  CHECK(mixtures > 0);
}

TEST_CASE("qa entries exist in train only and are excluded from contrastive") {
  Corpus c = generate_corpus(tiny_config());
  std::size_t qa = 0;
  for (const auto& e : c.entries)
    if (e.has_tag("pretrain:qa")) {
      ++qa;
      CHECK(e.split == "train");
      CHECK_FALSE(e.has_tag("contrastive"));
      CHECK(e.captions[0].rfind("question ", 0) == 0);
    }
  CHECK(qa > 0);
}

TEST_CASE("classes are acoustically separable with nearest centroids") {
  CorpusConfig cfg = tiny_config();
  cfg.n_classes = 6;
  cfg.n_train = 48;
  cfg.n_test = 36;
  Corpus c = generate_corpus(cfg);
  MelConfig mel;
  double acc = corpus_separability(c, mel);
  // a trivial non-learned classifier already beats chance by a wide margin
  CHECK(acc > 0.6);
}
