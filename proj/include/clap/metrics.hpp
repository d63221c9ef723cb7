// Evaluation metrics for zero-shot classification and retrieval, plus the
// logit post-processing dispatch and the aggregate score.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iostream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace clap {

struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Row-major [n_rows x n_cols] score matrix.
struct ScoreMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> values;

  static ScoreMatrix zeros(std::size_t r, std::size_t c) {
    return ScoreMatrix{r, c, std::vector<double>(r * c, 0.0)};
  }
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
};

enum class TaskKind { Multiclass, Binary, Multilabel, Retrieval };
enum class PostProcess { Softmax, Sigmoid, Raw };

inline PostProcess postprocess_for(TaskKind kind) {
  switch (kind) {
    case TaskKind::Multiclass:
    case TaskKind::Binary:
      return PostProcess::Softmax;
    case TaskKind::Multilabel:
      return PostProcess::Sigmoid;
    case TaskKind::Retrieval:
      return PostProcess::Raw;
  }
  throw MetricError("postprocess_for: unknown kind");
}

// softmax for binary/multiclass, sigmoid for multilabel, identity for
// retrieval.
inline ScoreMatrix postprocess(const ScoreMatrix& t, PostProcess mode) {
  ScoreMatrix out = t;
  if (mode == PostProcess::Raw) return out;
  for (std::size_t i = 0; i < t.rows; ++i) {
    if (mode == PostProcess::Softmax) {
      double mx = t.at(i, 0);
      for (std::size_t j = 1; j < t.cols; ++j) mx = std::max(mx, t.at(i, j));
      double sum = 0;
      for (std::size_t j = 0; j < t.cols; ++j) {
        out.at(i, j) = std::exp(t.at(i, j) - mx);
        sum += out.at(i, j);
      }
      for (std::size_t j = 0; j < t.cols; ++j) out.at(i, j) /= sum;
    } else {
      for (std::size_t j = 0; j < t.cols; ++j)
        out.at(i, j) = 1.0 / (1.0 + std::exp(-t.at(i, j)));
    }
  }
  return out;
}

// Deterministic ranking: descending score, ascending index on ties.
inline std::vector<std::size_t> rank_row(const ScoreMatrix& s, std::size_t row) {
  std::vector<std::size_t> idx(s.cols);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return s.at(row, a) > s.at(row, b);
  });
  return idx;
}

// Fraction of rows whose argmax equals the single truth label.
inline double metric_accuracy(const ScoreMatrix& scores,
                              const std::vector<std::vector<int>>& truth) {
  if (truth.size() != scores.rows)
    throw MetricError("accuracy: truth size mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.rows; ++i) {
    if (truth[i].size() != 1)
      throw MetricError("accuracy: expected exactly one truth label per item");
    std::size_t argmax = 0;
    for (std::size_t j = 1; j < scores.cols; ++j)
      if (scores.at(i, j) > scores.at(i, argmax)) argmax = j;
    if ((int)argmax == truth[i][0]) ++hits;
  }
  return (double)hits / (double)scores.rows;
}

// Micro-F1 over multilabel decisions at threshold 0.5 (on probabilities).
inline double metric_f1(const ScoreMatrix& probs,
                        const std::vector<std::vector<int>>& truth,
                        double threshold = 0.5) {
  if (truth.size() != probs.rows) throw MetricError("f1: truth size mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < probs.rows; ++i) {
    std::vector<char> is_true(probs.cols, 0);
    for (int c : truth[i]) is_true[(std::size_t)c] = 1;
    for (std::size_t j = 0; j < probs.cols; ++j) {
      bool pred = probs.at(i, j) > threshold;
      if (pred && is_true[j]) ++tp;
      else if (pred && !is_true[j]) ++fp;
      else if (!pred && is_true[j]) ++fn;
    }
  }
  if (2 * tp + fp + fn == 0) return 0.0;
  return 2.0 * (double)tp / (double)(2 * tp + fp + fn);
}

namespace detail {

// AP for one ranking: mean over relevant items of precision at their ranks,
// optionally truncated at k and normalized by min(#relevant, k).
inline double average_precision(const std::vector<std::size_t>& ranking,
                                const std::vector<char>& relevant,
                                std::size_t k) {
  std::size_t n_rel = 0;
  for (char r : relevant) n_rel += (r != 0);
  if (n_rel == 0) return -1.0;  // caller decides how to treat
  const std::size_t depth = std::min(k, ranking.size());
  double score = 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < depth; ++r) {
    if (relevant[ranking[r]]) {
      ++hits;
      score += (double)hits / (double)(r + 1);
    }
  }
  return score / (double)std::min(n_rel, k);
}

}  // namespace detail

// Macro mAP over classes: rank items per class, classes with no positives are
// excluded with a warning.
inline double metric_map(const ScoreMatrix& scores,
                         const std::vector<std::vector<int>>& truth) {
  if (truth.size() != scores.rows) throw MetricError("map: truth size mismatch");
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < scores.cols; ++c) {
    std::vector<char> relevant(scores.rows, 0);
    for (std::size_t i = 0; i < scores.rows; ++i)
      for (int t : truth[i])
        if ((std::size_t)t == c) relevant[i] = 1;
    // rank items by their score for class c
    std::vector<std::size_t> idx(scores.rows);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return scores.at(a, c) > scores.at(b, c);
    });
    double ap = detail::average_precision(idx, relevant, scores.rows);
    if (ap < 0) {
      static bool warned = false;  // once per process; this is expected on
      if (!warned) {               // small multilabel evaluation sets
        std::cerr << "warning: class " << c
                  << " has no positives; excluded from mAP "
                     "(further warnings suppressed)\n";
        warned = true;
      }
      continue;
    }
    total += ap;
    ++counted;
  }
  if (counted == 0) throw MetricError("map: no class has positives");
  return total / (double)counted;
}

// Fraction of query rows whose top-1 item is relevant.
inline double metric_recall_at_1(const ScoreMatrix& scores,
                                 const std::vector<std::vector<int>>& truth) {
  if (truth.size() != scores.rows)
    throw MetricError("recall_at_1: truth size mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < scores.rows; ++i) {
    auto ranking = rank_row(scores, i);
    for (int t : truth[i])
      if ((std::size_t)t == ranking[0]) {
        ++hits;
        break;
      }
  }
  return (double)hits / (double)scores.rows;
}

// Mean over query rows of AP truncated at rank 10, normalized by
// min(#relevant, 10).
inline double metric_map_at_10(const ScoreMatrix& scores,
                               const std::vector<std::vector<int>>& truth) {
  if (truth.size() != scores.rows)
    throw MetricError("map_at_10: truth size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < scores.rows; ++i) {
    std::vector<char> relevant(scores.cols, 0);
    for (int t : truth[i]) relevant[(std::size_t)t] = 1;
    auto ranking = rank_row(scores, i);
    double ap = detail::average_precision(ranking, relevant, 10);
    if (ap < 0) throw MetricError("map_at_10: query " + std::to_string(i) +
                                  " has no relevant items");
    total += ap;
  }
  return total / (double)scores.rows;
}

// Unweighted mean of per-task metric values.
inline double zero_shot_score(const std::vector<double>& task_metrics) {
  if (task_metrics.empty()) throw MetricError("zero_shot_score: no tasks");
  double s = 0;
  for (double v : task_metrics) s += v;
  return s / (double)task_metrics.size();
}

}  // namespace clap
