// Zero-shot inference: task specifications, cosine-similarity logit tables,
// and task evaluation built on the ranking metrics.

#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "clap/metrics.hpp"

namespace clap {

enum class RetrievalDirection { None, AudioToText, TextToAudio };

struct TaskItem {
  std::string id;             // manifest entry id
  std::vector<int> truth;     // label / prompt indices
};

struct TaskSpec {
  std::string name;
  TaskKind kind = TaskKind::Multiclass;
  std::string metric;  // accuracy | f1 | map | recall_at_1 | map_at_10
  std::string split;   // val | test
  RetrievalDirection direction = RetrievalDirection::None;
  std::vector<std::string> prompts;  // class labels or caption pool
  // Optional prompt ensemble per class: the class embedding is the mean of
  // the (normalized) member embeddings. Empty = use `prompts` directly.
  std::vector<std::vector<std::string>> prompt_ensembles;
  std::vector<TaskItem> items;       // test audios with ground truth

  void validate() const {
    if (prompts.empty()) throw MetricError("task " + name + ": no prompts");
    if (items.empty()) throw MetricError("task " + name + ": no items");
    if (!prompt_ensembles.empty()) {
      if (prompt_ensembles.size() != prompts.size())
        throw MetricError("task " + name +
                          ": ensemble count must match prompt count");
      for (const auto& group : prompt_ensembles)
        if (group.empty())
          throw MetricError("task " + name + ": empty prompt ensemble");
    }
    auto metric_ok = [&](std::initializer_list<const char*> allowed) {
      for (const char* m : allowed)
        if (metric == m) return true;
      return false;
    };
    switch (kind) {
      case TaskKind::Multiclass:
      case TaskKind::Binary:
        if (!metric_ok({"accuracy"}))
          throw MetricError("task " + name + ": metric " + metric +
                            " incompatible with classification");
        break;
      case TaskKind::Multilabel:
        if (!metric_ok({"map", "f1"}))
          throw MetricError("task " + name + ": metric " + metric +
                            " incompatible with multilabel");
        break;
      case TaskKind::Retrieval:
        if (!metric_ok({"recall_at_1", "map_at_10"}))
          throw MetricError("task " + name + ": metric " + metric +
                            " incompatible with retrieval");
        if (direction == RetrievalDirection::None)
          throw MetricError("task " + name + ": retrieval needs a direction");
        break;
    }
    for (const auto& item : items) {
      if (item.truth.empty())
        throw MetricError("task " + name + ": item " + item.id +
                          " has no truth labels");
      for (int t : item.truth)
        if (t < 0 || (std::size_t)t >= prompts.size())
          throw MetricError("task " + name + ": truth index out of range for " +
                            item.id);
    }
  }
};

struct LogitsTable {
  ScoreMatrix logits;  // [n_items x n_prompts]
  PostProcess tag = PostProcess::Raw;
};

// Cosine-similarity logits between each audio and every prompt. Inputs are
// normalized here, so callers may pass raw embeddings. The uniform scale
// cannot change any ranking.
inline LogitsTable zero_shot_logits(
    const std::vector<std::vector<double>>& audio_embeddings,
    const std::vector<std::vector<double>>& prompt_embeddings, TaskKind kind,
    double scale = 1.0) {
  if (prompt_embeddings.empty())
    throw MetricError("zero_shot_logits: empty prompt list");
  if (audio_embeddings.empty())
    throw MetricError("zero_shot_logits: no audio embeddings");
  const std::size_t d = prompt_embeddings[0].size();
  auto unit = [&](const std::vector<double>& v) {
    if (v.size() != d)
      throw MetricError("zero_shot_logits: embedding width mismatch");
    double n = 0;
    for (double x : v) n += x * x;
    n = std::max(std::sqrt(n), 1e-12);
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return out;
  };
  std::vector<std::vector<double>> a, p;
  for (const auto& v : audio_embeddings) a.push_back(unit(v));
  for (const auto& v : prompt_embeddings) p.push_back(unit(v));
  LogitsTable table;
  table.tag = postprocess_for(kind);
  table.logits = ScoreMatrix::zeros(a.size(), p.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j) {
      double dot = 0;
      for (std::size_t k = 0; k < d; ++k) dot += a[i][k] * p[j][k];
      table.logits.at(i, j) = scale * dot;
    }
  return table;
}

inline double apply_metric(const std::string& metric, const ScoreMatrix& scores,
                           const std::vector<std::vector<int>>& truth) {
  if (metric == "accuracy") return metric_accuracy(scores, truth);
  if (metric == "f1") return metric_f1(scores, truth);
  if (metric == "map") return metric_map(scores, truth);
  if (metric == "recall_at_1") return metric_recall_at_1(scores, truth);
  if (metric == "map_at_10") return metric_map_at_10(scores, truth);
  throw MetricError("unknown metric " + metric);
}

// Evaluates one task given embedding providers. For text->audio retrieval the
// logit table is transposed and the relevance sets inverted: the same ranking
// engine serves both directions.
inline double evaluate_task(
    const TaskSpec& task,
    const std::function<std::vector<double>(const std::string&)>& embed_audio,
    const std::function<std::vector<double>(const std::string&)>& embed_text,
    double scale = 1.0) {
  task.validate();
  std::vector<std::vector<double>> audio_emb, prompt_emb;
  for (const auto& item : task.items) audio_emb.push_back(embed_audio(item.id));
  if (task.prompt_ensembles.empty()) {
    for (const auto& prompt : task.prompts)
      prompt_emb.push_back(embed_text(prompt));
  } else {
    for (const auto& group : task.prompt_ensembles) {
      std::vector<double> mean;
      for (const auto& text : group) {
        std::vector<double> e = embed_text(text);
        double n = 0;
        for (double x : e) n += x * x;
        n = std::max(std::sqrt(n), 1e-12);
        if (mean.empty()) mean.assign(e.size(), 0.0);
        if (mean.size() != e.size())
          throw MetricError("task " + task.name +
                            ": ensemble embedding width mismatch");
        for (std::size_t k = 0; k < e.size(); ++k)
          mean[k] += e[k] / (n * (double)group.size());
      }
      prompt_emb.push_back(std::move(mean));
    }
  }
  LogitsTable table = zero_shot_logits(audio_emb, prompt_emb, task.kind, scale);
  ScoreMatrix scores = postprocess(table.logits, table.tag);

  if (task.direction == RetrievalDirection::TextToAudio) {
    ScoreMatrix t = ScoreMatrix::zeros(scores.cols, scores.rows);
    for (std::size_t i = 0; i < scores.rows; ++i)
      for (std::size_t j = 0; j < scores.cols; ++j) t.at(j, i) = scores.at(i, j);
    std::vector<std::vector<int>> truth(scores.cols);
    for (std::size_t i = 0; i < task.items.size(); ++i)
      for (int c : task.items[i].truth) truth[(std::size_t)c].push_back((int)i);
    for (std::size_t j = 0; j < truth.size(); ++j)
      if (truth[j].empty())
        throw MetricError("task " + task.name + ": prompt " +
                          std::to_string(j) + " has no relevant audio");
    return apply_metric(task.metric, t, truth);
  }

  std::vector<std::vector<int>> truth;
  for (const auto& item : task.items) truth.push_back(item.truth);
  return apply_metric(task.metric, scores, truth);
}

// --- task suite file (line-delimited JSON) ----------------------------------

inline std::string kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::Multiclass: return "multiclass";
    case TaskKind::Binary: return "binary";
    case TaskKind::Multilabel: return "multilabel";
    case TaskKind::Retrieval: return "retrieval";
  }
  throw MetricError("kind_name: bad kind");
}

inline TaskKind kind_from_name(const std::string& s) {
  if (s == "multiclass") return TaskKind::Multiclass;
  if (s == "binary") return TaskKind::Binary;
  if (s == "multilabel") return TaskKind::Multilabel;
  if (s == "retrieval") return TaskKind::Retrieval;
  throw MetricError("unknown task kind " + s);
}

inline std::string direction_name(RetrievalDirection d) {
  switch (d) {
    case RetrievalDirection::None: return "none";
    case RetrievalDirection::AudioToText: return "audio_to_text";
    case RetrievalDirection::TextToAudio: return "text_to_audio";
  }
  throw MetricError("direction_name: bad direction");
}

inline RetrievalDirection direction_from_name(const std::string& s) {
  if (s == "none") return RetrievalDirection::None;
  if (s == "audio_to_text") return RetrievalDirection::AudioToText;
  if (s == "text_to_audio") return RetrievalDirection::TextToAudio;
  throw MetricError("unknown retrieval direction " + s);
}

inline void save_tasks(const std::string& path,
                       const std::vector<TaskSpec>& tasks) {
  std::ofstream out(path);
  if (!out) throw MetricError("save_tasks: cannot open " + path);
  out << nlohmann::json{{"type", "header"},
                        {"schema", "clap-tasks"},
                        {"version", 1}}
             .dump()
      << "\n";
  for (const auto& t : tasks) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& item : t.items)
      items.push_back({{"id", item.id}, {"truth", item.truth}});
    out << nlohmann::json{{"type", "task"},
                          {"name", t.name},
                          {"kind", kind_name(t.kind)},
                          {"metric", t.metric},
                          {"split", t.split},
                          {"direction", direction_name(t.direction)},
                          {"prompts", t.prompts},
                          {"ensembles", t.prompt_ensembles},
                          {"items", items}}
               .dump()
        << "\n";
  }
}

inline std::vector<TaskSpec> load_tasks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MetricError("load_tasks: cannot open " + path);
  std::vector<TaskSpec> tasks;
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw MetricError("load_tasks: parse error on line " +
                        std::to_string(lineno) + ": " + e.what());
    }
    const std::string type = j.value("type", "");
    if (type == "header") {
      if (j.at("schema") != "clap-tasks" || j.at("version") != 1)
        throw MetricError("load_tasks: unsupported schema on line " +
                          std::to_string(lineno));
      saw_header = true;
      continue;
    }
    if (type != "task")
      throw MetricError("load_tasks: unknown record type on line " +
                        std::to_string(lineno));
    for (const auto& [key, value] : j.items()) {
      (void)value;
      static const std::vector<std::string> known{
          "type", "name", "kind", "metric", "split", "direction", "prompts",
          "ensembles", "items"};
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw MetricError("load_tasks: unknown field '" + key + "' on line " +
                          std::to_string(lineno));
    }
    TaskSpec t;
    t.name = j.at("name").get<std::string>();
    t.kind = kind_from_name(j.at("kind").get<std::string>());
    t.metric = j.at("metric").get<std::string>();
    t.split = j.at("split").get<std::string>();
    t.direction = direction_from_name(j.at("direction").get<std::string>());
    t.prompts = j.at("prompts").get<std::vector<std::string>>();
    t.prompt_ensembles =
        j.value("ensembles", std::vector<std::vector<std::string>>{});
    for (const auto& item : j.at("items")) {
      TaskItem ti;
      ti.id = item.at("id").get<std::string>();
      ti.truth = item.at("truth").get<std::vector<int>>();
      t.items.push_back(std::move(ti));
    }
    t.validate();
    tasks.push_back(std::move(t));
  }
  if (!saw_header) throw MetricError("load_tasks: missing header line");
  return tasks;
}

}  // namespace clap
