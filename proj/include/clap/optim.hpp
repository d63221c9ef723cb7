// Parameter registry, Adam optimizer, and a finite-difference gradient checker.

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "clap/rng.hpp"
#include "clap/tensor.hpp"

namespace clap {

// Flat registry of named trainable tensors. Iteration order is creation order.
class ParameterStore {
 public:
  Tensor create(const std::string& name, Shape shape) {
    if (params_.count(name))
      throw std::invalid_argument("ParameterStore: duplicate name " + name);
    Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
    order_.push_back(name);
    params_.emplace(name, t);
    return t;
  }

  Tensor create_normal(const std::string& name, Shape shape, Rng& rng,
                       double stddev) {
    Tensor t = create(name, std::move(shape));
    for (auto& v : t.value()) v = rng.normal(0.0, stddev);
    return t;
  }

  Tensor get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end())
      throw std::invalid_argument("ParameterStore: unknown name " + name);
    return it->second;
  }

  bool has(const std::string& name) const { return params_.count(name) > 0; }
  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }

  std::size_t total_values() const {
    std::size_t n = 0;
    for (const auto& name : order_) n += params_.at(name).size();
    return n;
  }

  void zero_grad() {
    for (const auto& name : order_) params_.at(name).zero_grad();
  }

  // Freeze-mask: frozen names are skipped by the optimizer but stay in the
  // store (and still accumulate gradients).
  void freeze(const std::string& name) { frozen_.insert(name); }
  void unfreeze(const std::string& name) { frozen_.erase(name); }
  bool is_frozen(const std::string& name) const { return frozen_.count(name) > 0; }

  void freeze_all_except_prefix(const std::string& prefix) {
    for (const auto& name : order_)
      if (name.rfind(prefix, 0) != 0) frozen_.insert(name);
  }

  void unfreeze_all() { frozen_.clear(); }

  std::vector<std::string> names_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& name : order_)
      if (name.rfind(prefix, 0) == 0) out.push_back(name);
    return out;
  }

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> params_;
  std::set<std::string> frozen_;
};

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::unordered_map<std::string, std::vector<double>> m, v;
};

// One Adam update with bias correction. Frozen names are skipped; all
// gradients (frozen included) are zeroed afterwards.
inline void adam_step(ParameterStore& store, AdamState& state) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, (double)state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, (double)state.step);
  for (const auto& name : store.names()) {
    Tensor p = store.get(name);
    if (!p.requires_grad() || p.grad().size() != p.size())
      throw std::logic_error("adam_step: parameter " + name +
                             " has no gradient");
    if (store.is_frozen(name)) continue;
    auto& m = state.m[name];
    auto& v = state.v[name];
    if (m.size() != p.size()) m.assign(p.size(), 0.0);
    if (v.size() != p.size()) v.assign(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      double gr = p.grad()[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gr;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gr * gr;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p.value()[i] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
  store.zero_grad();
}

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;

  bool within(double tol) const { return max_rel_err < tol; }
};

// Compares backward gradients against central finite differences.
// f must be a deterministic scalar function of the store's parameters; it is
// given a fresh graph per evaluation. At most max_per_param coordinates are
// probed per parameter (strided, deterministic).
inline GradCheckReport grad_check(
    const std::function<Tensor(Graph&)>& f, ParameterStore& store,
    double step = 1e-5, std::size_t max_per_param = 64) {
  store.zero_grad();
  Graph g;
  Tensor loss = f(g);
  if (!std::isfinite(loss.item()))
    throw std::runtime_error("grad_check: non-finite loss " +
                             std::to_string(loss.item()));
  g.backward(loss);

  std::unordered_map<std::string, std::vector<double>> analytic;
  for (const auto& name : store.names())
    analytic[name] = store.get(name).grad();

  auto eval = [&]() {
    Graph fresh;
    double v = f(fresh).item();
    if (!std::isfinite(v))
      throw std::runtime_error("grad_check: non-finite loss during probing");
    return v;
  };

  GradCheckReport report;
  for (const auto& name : store.names()) {
    Tensor p = store.get(name);
    GradCheckEntry entry{name, 0.0, 0};
    std::size_t n = p.size();
    std::size_t stride = n <= max_per_param ? 1 : (n + max_per_param - 1) / max_per_param;
    for (std::size_t i = 0; i < n; i += stride) {
      double saved = p.value()[i];
      p.value()[i] = saved + step;
      double fp = eval();
      p.value()[i] = saved - step;
      double fm = eval();
      p.value()[i] = saved;
      double numeric = (fp - fm) / (2.0 * step);
      double a = analytic[name][i];
      double rel = std::fabs(a - numeric) /
                   std::max({1.0, std::fabs(a), std::fabs(numeric)});
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
      entry.checked += 1;
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  store.zero_grad();
  return report;
}

}  // namespace clap
