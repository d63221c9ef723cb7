// Deterministic synthetic audio-text world: procedural sound events with
// templated captions, multilabel mixtures, Q&A pairs, manifest I/O, and the
// zero-shot task suite derived from it.

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "clap/audio.hpp"
#include "clap/rng.hpp"
#include "clap/zeroshot.hpp"

namespace clap {

struct CorpusError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class EventKind {
  SineLow,
  SineHigh,
  ChirpUp,
  ChirpDown,
  WhiteNoise,
  ClickTrain,
  AmTone,
  SquareWave,
};

inline std::string event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::SineLow: return "sine_low";
    case EventKind::SineHigh: return "sine_high";
    case EventKind::ChirpUp: return "chirp_up";
    case EventKind::ChirpDown: return "chirp_down";
    case EventKind::WhiteNoise: return "white_noise";
    case EventKind::ClickTrain: return "click_train";
    case EventKind::AmTone: return "am_tone";
    case EventKind::SquareWave: return "square_wave";
  }
  throw CorpusError("event_kind_name: bad kind");
}

inline EventKind event_kind_from_name(const std::string& s) {
  for (int k = 0; k <= (int)EventKind::SquareWave; ++k)
    if (event_kind_name((EventKind)k) == s) return (EventKind)k;
  throw CorpusError("unknown event kind " + s);
}

struct SoundEvent {
  EventKind kind = EventKind::SineLow;
  double freq_hz = 220.0;   // carrier / chirp start / noise cutoff / click rate
  double freq2_hz = 0.0;    // chirp end / AM modulation rate
  double amplitude = 0.5;
  double duration_s = 1.0;

  void validate() const {
    bool freq_carries_pitch =
        kind != EventKind::WhiteNoise && kind != EventKind::ClickTrain;
    if (freq_carries_pitch && (freq_hz < 50.0 || freq_hz > 8000.0))
      throw CorpusError("sound event: frequency " + std::to_string(freq_hz) +
                        " Hz outside audible filterbank range [50, 8000]");
    if ((kind == EventKind::ChirpUp || kind == EventKind::ChirpDown) &&
        (freq2_hz < 50.0 || freq2_hz > 8000.0))
      throw CorpusError("sound event: chirp target frequency out of range");
    if (duration_s < 1.0 || duration_s > 7.0)
      throw CorpusError("sound event: duration must be in [1, 7] s");
    if (amplitude < 0.0 || amplitude > 1.0)
      throw CorpusError("sound event: amplitude must be in [0, 1]");
  }
};

// Deterministic 44.1 kHz rendering of one event.
inline Waveform synthesize(const SoundEvent& spec, std::uint64_t seed,
                           double sample_rate = 44100.0) {
  spec.validate();
  Rng rng(seed);
  Waveform w;
  w.sample_rate = sample_rate;
  const std::size_t n = (std::size_t)std::llround(spec.duration_s * sample_rate);
  w.samples.assign(n, 0.0);
  const double dt = 1.0 / sample_rate;
  const double two_pi = 2.0 * 3.141592653589793;
  switch (spec.kind) {
    case EventKind::SineLow:
    case EventKind::SineHigh: {
      for (std::size_t i = 0; i < n; ++i)
        w.samples[i] = spec.amplitude * std::sin(two_pi * spec.freq_hz * i * dt);
      break;
    }
    case EventKind::ChirpUp:
    case EventKind::ChirpDown: {
      // linear sweep freq_hz -> freq2_hz; phase is the integral of f(t)
      const double f0 = spec.freq_hz, f1 = spec.freq2_hz;
      const double T = spec.duration_s;
      for (std::size_t i = 0; i < n; ++i) {
        double t = i * dt;
        double phase = two_pi * (f0 * t + 0.5 * (f1 - f0) * t * t / T);
        w.samples[i] = spec.amplitude * std::sin(phase);
      }
      break;
    }
    case EventKind::WhiteNoise: {
      // seeded white noise through a one-pole lowpass at freq_hz
      const double alpha =
          1.0 - std::exp(-two_pi * spec.freq_hz * dt);
      double y = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double x = rng.uniform(-1.0, 1.0);
        y += alpha * (x - y);
        w.samples[i] = spec.amplitude * y * 3.0;  // rough level make-up
      }
      break;
    }
    case EventKind::ClickTrain: {
      // exponentially decaying bursts at freq_hz clicks per second
      const double rate = std::max(spec.freq_hz, 0.5);
      const std::size_t period = (std::size_t)std::llround(sample_rate / rate);
      for (std::size_t start = 0; start < n; start += period) {
        const std::size_t burst = std::min<std::size_t>(n - start, 256);
        for (std::size_t i = 0; i < burst; ++i)
          w.samples[start + i] +=
              spec.amplitude * std::exp(-(double)i / 32.0) *
              std::sin(two_pi * 3000.0 * i * dt);
      }
      break;
    }
    case EventKind::AmTone: {
      const double fm = spec.freq2_hz > 0 ? spec.freq2_hz : 4.0;
      for (std::size_t i = 0; i < n; ++i) {
        double t = i * dt;
        double env = 0.5 * (1.0 + std::sin(two_pi * fm * t));
        w.samples[i] = spec.amplitude * env * std::sin(two_pi * spec.freq_hz * t);
      }
      break;
    }
    case EventKind::SquareWave: {
      for (std::size_t i = 0; i < n; ++i) {
        double s = std::sin(two_pi * spec.freq_hz * i * dt);
        w.samples[i] = spec.amplitude * (s >= 0 ? 0.7 : -0.7);
      }
      break;
    }
  }
  return w;
}

// --- class metadata ----------------------------------------------------------

struct SoundClass {
  EventKind kind;
  std::string noun;                  // canonical noun, present in every caption
  std::vector<std::string> variants; // tier adjectives, low to high
  bool tonal;
};

// Variant tiers map to parameter tiers; both adjectives carry acoustic
// meaning, which is what makes fine-grained retrieval solvable.
inline const std::vector<SoundClass>& sound_classes() {
  static const std::vector<SoundClass> classes{
      {EventKind::SineLow, "hum", {"deep", "droning", "mellow"}, true},
      {EventKind::SineHigh, "whistle", {"smooth", "bright", "piercing"}, true},
      {EventKind::ChirpUp, "rising sweep", {"gentle", "quick", "steep"}, true},
      {EventKind::ChirpDown, "falling sweep", {"gentle", "quick", "steep"}, true},
      {EventKind::WhiteNoise, "hiss", {"muffled", "dull", "crisp"}, false},
      {EventKind::ClickTrain, "clicking", {"slow", "steady", "rapid"}, false},
      {EventKind::AmTone, "warble", {"slow", "steady", "rapid"}, true},
      {EventKind::SquareWave, "buzz", {"deep", "droning", "mellow"}, true},
  };
  return classes;
}

inline const std::vector<std::string>& loudness_levels() {
  static const std::vector<std::string> levels{"soft", "moderate", "loud"};
  return levels;
}

struct ManifestEntry {
  std::string id;
  std::vector<SoundEvent> events;  // 1 for singles, 2 for mixtures
  std::uint64_t synth_seed = 0;
  std::vector<std::string> captions;
  std::vector<std::string> labels;  // class nouns
  std::vector<std::string> tasks;   // tags, e.g. contrastive / pretrain:qa
  std::string split;                // train | val | test
  std::string loudness;             // soft | moderate | loud  ("" for mixtures)
  std::string variant;              // tier adjective            ("" for mixtures)

  bool has_tag(const std::string& tag) const {
    return std::find(tasks.begin(), tasks.end(), tag) != tasks.end();
  }

  Waveform render(double sample_rate = 44100.0) const {
    Waveform mix;
    mix.sample_rate = sample_rate;
    for (std::size_t e = 0; e < events.size(); ++e) {
      Waveform part = synthesize(events[e], synth_seed + e, sample_rate);
      if (part.samples.size() > mix.samples.size())
        mix.samples.resize(part.samples.size(), 0.0);
      for (std::size_t i = 0; i < part.samples.size(); ++i)
        mix.samples[i] += part.samples[i] / (double)events.size();
    }
    return mix;
  }
};

struct CorpusConfig {
  std::size_t n_classes = 6;   // first n_classes of sound_classes()
  std::size_t n_train = 2000;
  std::size_t n_val = 200;
  std::size_t n_test = 400;
  double clip_seconds = 1.0;   // event duration == clip length at desk scale
  double sample_rate = 44100.0;
  double mixture_fraction = 0.10;
  double qa_fraction = 0.10;
  std::size_t retrieval_pool = 64;
  std::uint64_t seed = 7;

  void validate() const {
    if (n_classes < 2) throw CorpusError("corpus: need at least 2 classes");
    if (n_classes > sound_classes().size())
      throw CorpusError("corpus: at most " +
                        std::to_string(sound_classes().size()) + " classes");
    if (n_train == 0 || n_val == 0 || n_test == 0)
      throw CorpusError("corpus: all splits must be non-empty");
    if (clip_seconds < 1.0 || clip_seconds > 7.0)
      throw CorpusError("corpus: clip_seconds must be in [1, 7]");
  }
};

struct Corpus {
  CorpusConfig config;
  std::vector<ManifestEntry> entries;

  std::vector<std::string> class_nouns() const {
    std::vector<std::string> nouns;
    for (std::size_t c = 0; c < config.n_classes; ++c)
      nouns.push_back(sound_classes()[c].noun);
    return nouns;
  }

  std::vector<const ManifestEntry*> split_entries(const std::string& split) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
      if (e.split == split) out.push_back(&e);
    return out;
  }

  const ManifestEntry& by_id(const std::string& id) const {
    for (const auto& e : entries)
      if (e.id == id) return e;
    throw CorpusError("corpus: unknown entry id " + id);
  }
};

namespace detail {

struct EventDraw {
  SoundEvent event;
  std::size_t variant_tier;
};

// Parameter tiers per class; the tier adjective describes the drawn value.
inline EventDraw draw_event(std::size_t class_idx, std::size_t tier,
                            double loud_amp, double duration, Rng& rng) {
  EventDraw d;
  d.variant_tier = tier;
  SoundEvent& ev = d.event;
  ev.kind = sound_classes()[class_idx].kind;
  ev.amplitude = loud_amp * rng.uniform(0.9, 1.1);
  ev.duration_s = duration;
  auto in_tier = [&](double lo, double mid1, double mid2, double hi) {
    const double edges[4] = {lo, mid1, mid2, hi};
    return rng.uniform(edges[tier], edges[tier + 1]);
  };
  switch (ev.kind) {
    case EventKind::SineLow:
      ev.freq_hz = in_tier(60, 100, 160, 250);
      break;
    case EventKind::SineHigh:
      ev.freq_hz = in_tier(1500, 2400, 3800, 6000);
      break;
    case EventKind::ChirpUp: {
      ev.freq_hz = rng.uniform(200, 600);
      const double ratios[3] = {1.5, 2.5, 4.0};
      ev.freq2_hz = ev.freq_hz * ratios[tier];
      break;
    }
    case EventKind::ChirpDown: {
      ev.freq_hz = rng.uniform(1200, 3000);
      const double ratios[3] = {1.5, 2.5, 4.0};
      ev.freq2_hz = ev.freq_hz / ratios[tier];
      break;
    }
    case EventKind::WhiteNoise:
      ev.freq_hz = in_tier(500, 1000, 2500, 7000);
      break;
    case EventKind::ClickTrain:
      ev.freq_hz = in_tier(3, 5, 10, 22);
      break;
    case EventKind::AmTone:
      ev.freq_hz = rng.uniform(400, 900);
      ev.freq2_hz = in_tier(1.5, 3, 6, 12);
      break;
    case EventKind::SquareWave:
      ev.freq_hz = in_tier(80, 130, 200, 350);
      break;
  }
  return d;
}

inline std::string render_caption(const std::string& noun,
                                  const std::string& variant,
                                  const std::string& loud,
                                  std::size_t template_idx) {
  switch (template_idx % 5) {
    case 0: return "a " + loud + " " + variant + " " + noun;
    case 1: return "the " + variant + " " + noun + " is " + loud;
    case 2: return "you can hear a " + loud + " and " + variant + " " + noun;
    case 3: return "there is a " + variant + " " + noun + " that sounds " + loud;
    default: return "listen to the " + loud + " " + variant + " " + noun;
  }
}

inline std::string render_mixture_caption(const std::string& a,
                                          const std::string& b,
                                          std::size_t template_idx) {
  switch (template_idx % 3) {
    case 0: return "a " + a + " mixed with a " + b;
    case 1: return "a " + a + " together with a " + b;
    default: return a + " and " + b + " at the same time";
  }
}

}  // namespace detail

inline double loudness_amplitude(std::size_t level) {
  const double amps[3] = {0.08, 0.30, 0.85};
  return amps[level];
}

// Procedural corpus: multiclass events, 2-event mixtures, and Q&A entries.
// Pure function of config (the seed lives inside the config).
inline Corpus generate_corpus(const CorpusConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Corpus corpus;
  corpus.config = cfg;

  auto make_split = [&](const std::string& split, std::size_t count,
                        std::size_t id_base) {
    const std::size_t n_mix = (std::size_t)std::llround(cfg.mixture_fraction * count);
    const std::size_t n_qa =
        split == "train" ? (std::size_t)std::llround(cfg.qa_fraction * count) : 0;
    const std::size_t n_single = count - n_mix - n_qa;
    for (std::size_t i = 0; i < count; ++i) {
      ManifestEntry e;
      e.id = split + "-" + std::to_string(id_base + i);
      e.split = split;
      e.synth_seed = rng.next_u64();
      if (i < n_single || i >= n_single + n_mix) {
        // single event (plain caption or Q&A flavor)
        const std::size_t c = rng.below(cfg.n_classes);
        const std::size_t tier = rng.below(3);
        const std::size_t loud = rng.below(3);
        auto draw = detail::draw_event(c, tier, loudness_amplitude(loud),
                                       cfg.clip_seconds, rng);
        const SoundClass& cls = sound_classes()[c];
        e.events.push_back(draw.event);
        e.labels.push_back(cls.noun);
        e.loudness = loudness_levels()[loud];
        e.variant = cls.variants[tier];
        if (i >= n_single + n_mix) {
          // Q&A entry: used for multitask pretraining only
          switch (rng.below(3)) {
            case 0:
              e.captions.push_back("question what sound is this answer " +
                                   cls.noun);
              break;
            case 1:
              e.captions.push_back("question how loud is the sound answer " +
                                   e.loudness);
              break;
            default:
              e.captions.push_back("question is the sound tonal answer " +
                                   std::string(cls.tonal ? "yes" : "no"));
              break;
          }
          e.tasks = {"pretrain:qa"};
        } else {
          std::size_t t0 = rng.below(5);
          std::size_t t1 = (t0 + 1 + rng.below(4)) % 5;
          e.captions.push_back(
              detail::render_caption(cls.noun, e.variant, e.loudness, t0));
          e.captions.push_back(
              detail::render_caption(cls.noun, e.variant, e.loudness, t1));
          e.tasks = {"contrastive", "pretrain:caption", "pretrain:classify",
                     "pretrain:attr"};
        }
      } else {
        // two-event mixture (multilabel)
        std::size_t c1 = rng.below(cfg.n_classes);
        std::size_t c2 = (c1 + 1 + rng.below(cfg.n_classes - 1)) % cfg.n_classes;
        for (std::size_t c : {c1, c2}) {
          auto draw = detail::draw_event(c, rng.below(3),
                                         loudness_amplitude(1 + rng.below(2)),
                                         cfg.clip_seconds, rng);
          e.events.push_back(draw.event);
          e.labels.push_back(sound_classes()[c].noun);
        }
        e.captions.push_back(detail::render_mixture_caption(
            e.labels[0], e.labels[1], rng.below(3)));
        e.tasks = {"contrastive", "pretrain:caption"};
      }
      corpus.entries.push_back(std::move(e));
    }
  };

  make_split("train", cfg.n_train, 0);
  make_split("val", cfg.n_val, cfg.n_train);
  make_split("test", cfg.n_test, cfg.n_train + cfg.n_val);
  return corpus;
}

// --- manifest I/O (line-delimited JSON, schema version 1) -------------------

inline void save_manifest(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw CorpusError("save_manifest: cannot open " + path);
  const CorpusConfig& cfg = corpus.config;
  out << nlohmann::json{{"type", "header"},
                        {"schema", "clap-corpus"},
                        {"version", 1},
                        {"n_classes", cfg.n_classes},
                        {"n_train", cfg.n_train},
                        {"n_val", cfg.n_val},
                        {"n_test", cfg.n_test},
                        {"clip_seconds", cfg.clip_seconds},
                        {"sample_rate", cfg.sample_rate},
                        {"mixture_fraction", cfg.mixture_fraction},
                        {"qa_fraction", cfg.qa_fraction},
                        {"retrieval_pool", cfg.retrieval_pool},
                        {"seed", cfg.seed}}
             .dump()
      << "\n";
  for (const auto& e : corpus.entries) {
    nlohmann::json events = nlohmann::json::array();
    for (const auto& ev : e.events)
      events.push_back({{"kind", event_kind_name(ev.kind)},
                        {"freq_hz", ev.freq_hz},
                        {"freq2_hz", ev.freq2_hz},
                        {"amplitude", ev.amplitude},
                        {"duration_s", ev.duration_s}});
    out << nlohmann::json{{"type", "entry"},
                          {"id", e.id},
                          {"split", e.split},
                          {"seed", e.synth_seed},
                          {"events", events},
                          {"captions", e.captions},
                          {"labels", e.labels},
                          {"tasks", e.tasks},
                          {"loudness", e.loudness},
                          {"variant", e.variant}}
               .dump()
        << "\n";
  }
}

inline Corpus load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("load_manifest: cannot open " + path);
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  std::set<std::string> seen_ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw CorpusError("load_manifest: parse error on line " +
                        std::to_string(lineno) + ": " + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "header") {
      if (j.at("schema") != "clap-corpus" || j.at("version") != 1)
        throw CorpusError("load_manifest: unsupported schema on line " +
                          std::to_string(lineno));
      CorpusConfig& cfg = corpus.config;
      cfg.n_classes = j.at("n_classes").get<std::size_t>();
      cfg.n_train = j.at("n_train").get<std::size_t>();
      cfg.n_val = j.at("n_val").get<std::size_t>();
      cfg.n_test = j.at("n_test").get<std::size_t>();
      cfg.clip_seconds = j.at("clip_seconds").get<double>();
      cfg.sample_rate = j.at("sample_rate").get<double>();
      cfg.mixture_fraction = j.at("mixture_fraction").get<double>();
      cfg.qa_fraction = j.at("qa_fraction").get<double>();
      cfg.retrieval_pool = j.at("retrieval_pool").get<std::size_t>();
      cfg.seed = j.at("seed").get<std::uint64_t>();
      saw_header = true;
      continue;
    }
    if (type != "entry")
      throw CorpusError("load_manifest: unknown record type on line " +
                        std::to_string(lineno));
    static const std::vector<std::string> known{
        "type", "id", "split", "seed", "events", "captions",
        "labels", "tasks", "loudness", "variant"};
    for (const auto& [key, value] : j.items()) {
      (void)value;
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw CorpusError("load_manifest: unknown field '" + key +
                          "' on line " + std::to_string(lineno));
    }
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    e.split = j.at("split").get<std::string>();
    if (e.split != "train" && e.split != "val" && e.split != "test")
      throw CorpusError("load_manifest: bad split '" + e.split + "' on line " +
                        std::to_string(lineno));
    e.synth_seed = j.at("seed").get<std::uint64_t>();
    for (const auto& ev : j.at("events")) {
      SoundEvent s;
      s.kind = event_kind_from_name(ev.at("kind").get<std::string>());
      s.freq_hz = ev.at("freq_hz").get<double>();
      s.freq2_hz = ev.at("freq2_hz").get<double>();
      s.amplitude = ev.at("amplitude").get<double>();
      s.duration_s = ev.at("duration_s").get<double>();
      s.validate();
      e.events.push_back(s);
    }
    e.captions = j.at("captions").get<std::vector<std::string>>();
    e.labels = j.at("labels").get<std::vector<std::string>>();
    e.tasks = j.at("tasks").get<std::vector<std::string>>();
    e.loudness = j.at("loudness").get<std::string>();
    e.variant = j.at("variant").get<std::string>();
    if (e.captions.empty())
      throw CorpusError("load_manifest: entry " + e.id +
                        " has no captions (line " + std::to_string(lineno) + ")");
    if (e.events.empty())
      throw CorpusError("load_manifest: entry " + e.id + " has no events");
    if (!seen_ids.insert(e.id).second)
      throw CorpusError("load_manifest: duplicate id " + e.id + " on line " +
                        std::to_string(lineno));
    corpus.entries.push_back(std::move(e));
  }
  if (!saw_header) throw CorpusError("load_manifest: missing header line");
  return corpus;
}

// --- zero-shot task suite derived from the corpus ----------------------------

inline std::vector<TaskSpec> build_task_suite(const Corpus& corpus,
                                              const std::string& split) {
  const auto nouns = corpus.class_nouns();
  auto class_index = [&](const std::string& noun) {
    for (std::size_t c = 0; c < nouns.size(); ++c)
      if (nouns[c] == noun) return (int)c;
    throw CorpusError("task suite: unknown class noun " + noun);
  };

  std::vector<const ManifestEntry*> singles, mixtures;
  for (const auto* e : corpus.split_entries(split)) {
    if (!e->has_tag("contrastive")) continue;
    (e->events.size() == 1 ? singles : mixtures).push_back(e);
  }
  if (singles.empty())
    throw CorpusError("task suite: split " + split + " has no single events");

  std::vector<TaskSpec> tasks;

  // Class prototype = mean text embedding over rendered caption variations.
  auto class_ensemble = [&](std::size_t c) {
    const SoundClass& cls = sound_classes()[c];
    std::vector<std::string> group{"a " + cls.noun};
    for (const auto& variant : cls.variants)
      for (const auto& loud : loudness_levels())
        group.push_back(detail::render_caption(cls.noun, variant, loud, 0));
    return group;
  };

  TaskSpec multiclass;
  multiclass.name = split + "-multiclass";
  multiclass.kind = TaskKind::Multiclass;
  multiclass.metric = "accuracy";
  multiclass.split = split;
  // caption-style prompts keep the text encoder in-distribution
  for (const auto& noun : nouns) multiclass.prompts.push_back("a " + noun);
  for (std::size_t c = 0; c < nouns.size(); ++c)
    multiclass.prompt_ensembles.push_back(class_ensemble(c));
  for (const auto* e : singles)
    multiclass.items.push_back({e->id, {class_index(e->labels[0])}});
  tasks.push_back(std::move(multiclass));

  TaskSpec binary;
  binary.name = split + "-binary-tonal";
  binary.kind = TaskKind::Binary;
  binary.metric = "accuracy";
  binary.split = split;
  binary.prompts = {"a tonal sound", "a noisy sound"};
  binary.prompt_ensembles.assign(2, {});
  for (std::size_t c = 0; c < nouns.size(); ++c)
    for (const auto& text : class_ensemble(c))
      binary.prompt_ensembles[sound_classes()[c].tonal ? 0 : 1].push_back(text);
  // small corpora may lack one side; fall back to the generic prompts
  if (binary.prompt_ensembles[0].empty() || binary.prompt_ensembles[1].empty())
    binary.prompt_ensembles.clear();
  for (const auto* e : singles) {
    int c = class_index(e->labels[0]);
    binary.items.push_back({e->id, {sound_classes()[c].tonal ? 0 : 1}});
  }
  tasks.push_back(std::move(binary));

  TaskSpec loudness;
  loudness.name = split + "-loudness";
  loudness.kind = TaskKind::Multiclass;
  loudness.metric = "accuracy";
  loudness.split = split;
  loudness.prompts = {"a soft sound", "a moderate sound", "a loud sound"};
  for (const auto& loud : loudness_levels()) {
    std::vector<std::string> group;
    for (std::size_t c = 0; c < nouns.size(); ++c) {
      const SoundClass& cls = sound_classes()[c];
      for (const auto& variant : cls.variants)
        group.push_back(detail::render_caption(cls.noun, variant, loud, 0));
    }
    loudness.prompt_ensembles.push_back(std::move(group));
  }
  for (const auto* e : singles) {
    const auto& levels = loudness_levels();
    int idx = (int)(std::find(levels.begin(), levels.end(), e->loudness) -
                    levels.begin());
    loudness.items.push_back({e->id, {idx}});
  }
  tasks.push_back(std::move(loudness));

  if (!mixtures.empty()) {
    TaskSpec multilabel;
    multilabel.name = split + "-multilabel-map";
    multilabel.kind = TaskKind::Multilabel;
    multilabel.metric = "map";
    multilabel.split = split;
    for (const auto& noun : nouns)
      multilabel.prompts.push_back("a " + noun);
    for (std::size_t c = 0; c < nouns.size(); ++c)
      multilabel.prompt_ensembles.push_back(class_ensemble(c));
    for (const auto* e : mixtures) {
      TaskItem item{e->id, {}};
      for (const auto& label : e->labels) item.truth.push_back(class_index(label));
      multilabel.items.push_back(std::move(item));
    }
    TaskSpec f1 = multilabel;
    f1.name = split + "-multilabel-f1";
    f1.metric = "f1";
    tasks.push_back(std::move(multilabel));
    tasks.push_back(std::move(f1));
  }

  const std::size_t pool =
      std::min(corpus.config.retrieval_pool, singles.size());
  if (pool >= 2) {
    TaskSpec a2t;
    a2t.name = split + "-retrieval-a2t";
    a2t.kind = TaskKind::Retrieval;
    a2t.metric = "recall_at_1";
    a2t.split = split;
    a2t.direction = RetrievalDirection::AudioToText;
    for (std::size_t i = 0; i < pool; ++i) {
      a2t.prompts.push_back(singles[i]->captions[0]);
      a2t.items.push_back({singles[i]->id, {(int)i}});
    }
    TaskSpec t2a = a2t;
    t2a.name = split + "-retrieval-t2a";
    t2a.metric = "map_at_10";
    t2a.direction = RetrievalDirection::TextToAudio;
    tasks.push_back(std::move(a2t));
    tasks.push_back(std::move(t2a));
  }

  for (const auto& t : tasks) t.validate();
  return tasks;
}

// Nearest-centroid separability check on mean log-mel features: guarantees the
// classes are acoustically distinguishable before any learning happens.
inline double corpus_separability(const Corpus& corpus, const MelConfig& mel) {
  auto feature = [&](const ManifestEntry& e) {
    MelSpectrogram spec = log_mel(e.render(corpus.config.sample_rate), mel);
    std::vector<double> f(spec.n_mels, 0.0);
    for (std::size_t m = 0; m < spec.n_mels; ++m) {
      for (std::size_t t = 0; t < spec.n_frames; ++t) f[m] += spec.at(m, t);
      f[m] /= (double)spec.n_frames;
    }
    return f;
  };
  const auto nouns = corpus.class_nouns();
  std::map<std::string, std::vector<double>> centroids;
  std::map<std::string, std::size_t> counts;
  for (const auto* e : corpus.split_entries("train")) {
    if (e->events.size() != 1 || !e->has_tag("contrastive")) continue;
    auto f = feature(*e);
    auto& c = centroids[e->labels[0]];
    if (c.empty()) c.assign(f.size(), 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) c[i] += f[i];
    counts[e->labels[0]] += 1;
  }
  for (auto& [noun, c] : centroids)
    for (auto& v : c) v /= (double)counts[noun];

  std::size_t hits = 0, total = 0;
  for (const auto* e : corpus.split_entries("test")) {
    if (e->events.size() != 1 || !e->has_tag("contrastive")) continue;
    auto f = feature(*e);
    std::string best;
    double best_d = 1e300;
    for (const auto& [noun, c] : centroids) {
      double d = 0;
      for (std::size_t i = 0; i < f.size(); ++i)
        d += (f[i] - c[i]) * (f[i] - c[i]);
      if (d < best_d) {
        best_d = d;
        best = noun;
      }
    }
    hits += (best == e->labels[0]);
    ++total;
  }
  return total == 0 ? 0.0 : (double)hits / (double)total;
}

}  // namespace clap
