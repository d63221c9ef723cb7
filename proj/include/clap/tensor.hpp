// Reverse-mode differentiable tensor core. All training math is f64.
//
// Computation is recorded on an explicit tape (Graph); backward() replays
// the tape in reverse. Tensors are shared-pointer values: copying a Tensor
// aliases the same storage, which is what the tape closures rely on.

#pragma once

#include <cblas.h>

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

extern "C" void openblas_set_num_threads(int);

namespace clap {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

[[noreturn]] inline void dim_error(const std::string& op, const Shape& a,
                                   const Shape& b) {
  throw DimensionError(op + ": incompatible shapes " + shape_str(a) + " and " +
                       shape_str(b));
}

struct TensorImpl {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty unless requires_grad
  bool requires_grad = false;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto impl = std::make_shared<TensorImpl>();
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    impl->shape = std::move(shape);
    impl->value.assign(n, 0.0);
    impl->requires_grad = requires_grad;
    if (requires_grad) impl->grad.assign(n, 0.0);
    return Tensor(std::move(impl));
  }

  static Tensor from(Shape shape, std::vector<double> data,
                     bool requires_grad = false) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    if (n != data.size())
      throw DimensionError("Tensor::from: " + shape_str(shape) +
                           " does not hold " + std::to_string(data.size()) +
                           " values");
    Tensor t = zeros(std::move(shape), requires_grad);
    t.impl_->value = std::move(data);
    return t;
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from({1, 1}, {v}, requires_grad);
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t size() const { return impl_->value.size(); }
  std::size_t ndim() const { return impl_->shape.size(); }
  std::size_t rows() const { return impl_->shape.at(0); }
  std::size_t cols() const { return impl_->shape.at(1); }

  std::vector<double>& value() { return impl_->value; }
  const std::vector<double>& value() const { return impl_->value; }
  std::vector<double>& grad() { return impl_->grad; }
  const std::vector<double>& grad() const { return impl_->grad; }
  bool requires_grad() const { return impl_->requires_grad; }

  double item() const {
    if (size() != 1)
      throw DimensionError("Tensor::item on non-scalar " + shape_str(shape()));
    return impl_->value[0];
  }

  void zero_grad() {
    if (impl_->requires_grad) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
  }

  bool all_finite() const {
    for (double v : impl_->value)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool same_impl(const Tensor& o) const { return impl_ == o.impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<TensorImpl> impl_;
};

// Tape of backward closures, appended in forward order.
class Graph {
 public:
  void record(std::function<void()> fn) { tape_.push_back(std::move(fn)); }

  void backward(Tensor loss) {
    if (loss.size() != 1)
      throw DimensionError("backward: loss must be scalar, got " +
                           shape_str(loss.shape()));
    if (!loss.requires_grad())
      throw std::logic_error("backward: loss does not require grad");
    loss.grad()[0] = 1.0;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
  }

  void clear() { tape_.clear(); }
  std::size_t size() const { return tape_.size(); }

 private:
  std::vector<std::function<void()>> tape_;
};

namespace detail {

inline void blas_init() {
  static std::once_flag flag;
  // One BLAS thread keeps every step bit-deterministic.
  std::call_once(flag, [] { openblas_set_num_threads(1); });
}

inline Tensor make_output(Shape shape, bool requires_grad) {
  return Tensor::zeros(std::move(shape), requires_grad);
}

inline bool any_grad(std::initializer_list<Tensor> ts) {
  for (const auto& t : ts)
    if (t.requires_grad()) return true;
  return false;
}

}  // namespace detail

// --- core ops -------------------------------------------------------------

inline Tensor matmul(Graph& g, Tensor a, Tensor b) {
  detail::blas_init();
  if (a.ndim() != 2 || b.ndim() != 2 || a.cols() != b.rows())
    dim_error("matmul", a.shape(), b.shape());
  const int m = (int)a.rows(), k = (int)a.cols(), n = (int)b.cols();
  Tensor out = detail::make_output({a.rows(), b.cols()},
                                   detail::any_grad({a, b}));
  cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, m, n, k, 1.0,
              a.value().data(), k, b.value().data(), n, 0.0,
              out.value().data(), n);
  if (out.requires_grad()) {
    g.record([a, b, out, m, k, n]() mutable {
      if (a.requires_grad())
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, m, k, n, 1.0,
                    out.grad().data(), n, b.value().data(), n, 1.0,
                    a.grad().data(), k);
      if (b.requires_grad())
        cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, k, n, m, 1.0,
                    a.value().data(), k, out.grad().data(), n, 1.0,
                    b.grad().data(), n);
    });
  }
  return out;
}

inline Tensor transpose(Graph& g, Tensor a) {
  if (a.ndim() != 2) dim_error("transpose", a.shape(), {});
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out = detail::make_output({c, r}, a.requires_grad());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      out.value()[j * r + i] = a.value()[i * c + j];
  if (out.requires_grad()) {
    g.record([a, out, r, c]() mutable {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          a.grad()[i * c + j] += out.grad()[j * r + i];
    });
  }
  return out;
}

inline Tensor add(Graph& g, Tensor a, Tensor b) {
  if (a.shape() != b.shape()) dim_error("add", a.shape(), b.shape());
  Tensor out = detail::make_output(a.shape(), detail::any_grad({a, b}));
  for (std::size_t i = 0; i < a.size(); ++i)
    out.value()[i] = a.value()[i] + b.value()[i];
  if (out.requires_grad()) {
    g.record([a, b, out]() mutable {
      if (a.requires_grad())
        for (std::size_t i = 0; i < a.size(); ++i) a.grad()[i] += out.grad()[i];
      if (b.requires_grad())
        for (std::size_t i = 0; i < b.size(); ++i) b.grad()[i] += out.grad()[i];
    });
  }
  return out;
}

// a: [n,w], row: [1,w]; adds row to every row of a.
inline Tensor add_rowvec(Graph& g, Tensor a, Tensor row) {
  if (a.ndim() != 2 || row.ndim() != 2 || row.rows() != 1 ||
      row.cols() != a.cols())
    dim_error("add_rowvec", a.shape(), row.shape());
  const std::size_t n = a.rows(), w = a.cols();
  Tensor out = detail::make_output(a.shape(), detail::any_grad({a, row}));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w; ++j)
      out.value()[i * w + j] = a.value()[i * w + j] + row.value()[j];
  if (out.requires_grad()) {
    g.record([a, row, out, n, w]() mutable {
      if (a.requires_grad())
        for (std::size_t i = 0; i < a.size(); ++i) a.grad()[i] += out.grad()[i];
      if (row.requires_grad())
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < w; ++j)
            row.grad()[j] += out.grad()[i * w + j];
    });
  }
  return out;
}

inline Tensor mul(Graph& g, Tensor a, Tensor b) {
  if (a.shape() != b.shape()) dim_error("mul", a.shape(), b.shape());
  Tensor out = detail::make_output(a.shape(), detail::any_grad({a, b}));
  for (std::size_t i = 0; i < a.size(); ++i)
    out.value()[i] = a.value()[i] * b.value()[i];
  if (out.requires_grad()) {
    g.record([a, b, out]() mutable {
      if (a.requires_grad())
        for (std::size_t i = 0; i < a.size(); ++i)
          a.grad()[i] += out.grad()[i] * b.value()[i];
      if (b.requires_grad())
        for (std::size_t i = 0; i < b.size(); ++i)
          b.grad()[i] += out.grad()[i] * a.value()[i];
    });
  }
  return out;
}

inline Tensor scale(Graph& g, Tensor a, double c) {
  Tensor out = detail::make_output(a.shape(), a.requires_grad());
  for (std::size_t i = 0; i < a.size(); ++i) out.value()[i] = a.value()[i] * c;
  if (out.requires_grad()) {
    g.record([a, out, c]() mutable {
      for (std::size_t i = 0; i < a.size(); ++i)
        a.grad()[i] += out.grad()[i] * c;
    });
  }
  return out;
}

// out = a * s where s is a learnable scalar tensor; differentiable in both.
inline Tensor scale_by(Graph& g, Tensor a, Tensor s) {
  if (s.size() != 1) dim_error("scale_by", a.shape(), s.shape());
  const double sv = s.value()[0];
  Tensor out = detail::make_output(a.shape(), detail::any_grad({a, s}));
  for (std::size_t i = 0; i < a.size(); ++i) out.value()[i] = a.value()[i] * sv;
  if (out.requires_grad()) {
    g.record([a, s, out, sv]() mutable {
      if (a.requires_grad())
        for (std::size_t i = 0; i < a.size(); ++i)
          a.grad()[i] += out.grad()[i] * sv;
      if (s.requires_grad()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i)
          acc += out.grad()[i] * a.value()[i];
        s.grad()[0] += acc;
      }
    });
  }
  return out;
}

namespace detail {

template <typename Fwd, typename Dfn>
Tensor elementwise(Graph& g, Tensor a, Fwd f, Dfn df) {
  Tensor out = make_output(a.shape(), a.requires_grad());
  for (std::size_t i = 0; i < a.size(); ++i) out.value()[i] = f(a.value()[i]);
  if (out.requires_grad()) {
    g.record([a, out, df]() mutable {
      for (std::size_t i = 0; i < a.size(); ++i)
        a.grad()[i] += out.grad()[i] * df(a.value()[i]);
    });
  }
  return out;
}

}  // namespace detail

inline Tensor exp(Graph& g, Tensor a) {
  return detail::elementwise(
      g, a, [](double x) { return std::exp(x); },
      [](double x) { return std::exp(x); });
}

inline Tensor log(Graph& g, Tensor a) {
  return detail::elementwise(
      g, a, [](double x) { return std::log(x); },
      [](double x) { return 1.0 / x; });
}

// Exact (erf-based) GELU.
inline Tensor gelu(Graph& g, Tensor a) {
  constexpr double kInvSqrt2 = 0.7071067811865476;
  constexpr double kInvSqrt2Pi = 0.3989422804014327;
  return detail::elementwise(
      g, a,
      [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); },
      [](double x) {
        double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
        double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
        return cdf + x * pdf;
      });
}

inline Tensor sigmoid(Graph& g, Tensor a) {
  return detail::elementwise(
      g, a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double x) {
        double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 - s);
      });
}

// softmax along axis of a 2D tensor (axis 1 = rows, axis 0 = columns).
// Max-subtraction keeps it stable; -1e9 mask entries underflow to exact 0.
inline Tensor softmax(Graph& g, Tensor a, int axis = 1) {
  if (a.ndim() != 2 || (axis != 0 && axis != 1))
    throw DimensionError("softmax: need 2D tensor and axis 0 or 1, got " +
                         shape_str(a.shape()) + " axis " + std::to_string(axis));
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out = detail::make_output(a.shape(), a.requires_grad());
  auto run_line = [&](std::size_t count, std::size_t base, std::size_t stride) {
    double mx = a.value()[base];
    for (std::size_t i = 1; i < count; ++i)
      mx = std::max(mx, a.value()[base + i * stride]);
    double sum = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
      double e = std::exp(a.value()[base + i * stride] - mx);
      out.value()[base + i * stride] = e;
      sum += e;
    }
    for (std::size_t i = 0; i < count; ++i)
      out.value()[base + i * stride] /= sum;
  };
  if (axis == 1)
    for (std::size_t i = 0; i < r; ++i) run_line(c, i * c, 1);
  else
    for (std::size_t j = 0; j < c; ++j) run_line(r, j, c);
  if (out.requires_grad()) {
    g.record([a, out, r, c, axis]() mutable {
      auto back_line = [&](std::size_t count, std::size_t base,
                           std::size_t stride) {
        double dot = 0.0;
        for (std::size_t i = 0; i < count; ++i)
          dot += out.grad()[base + i * stride] * out.value()[base + i * stride];
        for (std::size_t i = 0; i < count; ++i) {
          std::size_t k = base + i * stride;
          a.grad()[k] += out.value()[k] * (out.grad()[k] - dot);
        }
      };
      if (axis == 1)
        for (std::size_t i = 0; i < r; ++i) back_line(c, i * c, 1);
      else
        for (std::size_t j = 0; j < c; ++j) back_line(r, j, c);
    });
  }
  return out;
}

inline Tensor log_softmax_rows(Graph& g, Tensor a) {
  if (a.ndim() != 2) dim_error("log_softmax_rows", a.shape(), {});
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out = detail::make_output(a.shape(), a.requires_grad());
  for (std::size_t i = 0; i < r; ++i) {
    double mx = a.value()[i * c];
    for (std::size_t j = 1; j < c; ++j)
      mx = std::max(mx, a.value()[i * c + j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j)
      sum += std::exp(a.value()[i * c + j] - mx);
    double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < c; ++j)
      out.value()[i * c + j] = a.value()[i * c + j] - lse;
  }
  if (out.requires_grad()) {
    g.record([a, out, r, c]() mutable {
      for (std::size_t i = 0; i < r; ++i) {
        double gsum = 0.0;
        for (std::size_t j = 0; j < c; ++j) gsum += out.grad()[i * c + j];
        for (std::size_t j = 0; j < c; ++j)
          a.grad()[i * c + j] +=
              out.grad()[i * c + j] - std::exp(out.value()[i * c + j]) * gsum;
      }
    });
  }
  return out;
}

// Per-row layer norm with learned gain/bias ([1,w] each).
inline Tensor layer_norm(Graph& g, Tensor a, Tensor gain, Tensor bias,
                         double eps = 1e-5) {
  if (a.ndim() != 2 || gain.cols() != a.cols() || bias.cols() != a.cols())
    dim_error("layer_norm", a.shape(), gain.shape());
  const std::size_t n = a.rows(), w = a.cols();
  Tensor out = detail::make_output(a.shape(), detail::any_grad({a, gain, bias}));
  std::vector<double> xhat(n * w), inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < w; ++j) mean += a.value()[i * w + j];
    mean /= (double)w;
    double var = 0.0;
    for (std::size_t j = 0; j < w; ++j) {
      double d = a.value()[i * w + j] - mean;
      var += d * d;
    }
    var /= (double)w;
    double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < w; ++j) {
      double xh = (a.value()[i * w + j] - mean) * is;
      xhat[i * w + j] = xh;
      out.value()[i * w + j] = xh * gain.value()[j] + bias.value()[j];
    }
  }
  if (out.requires_grad()) {
    g.record([a, gain, bias, out, n, w, xhat = std::move(xhat),
              inv_std = std::move(inv_std)]() mutable {
      for (std::size_t i = 0; i < n; ++i) {
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (std::size_t j = 0; j < w; ++j) {
          double go = out.grad()[i * w + j];
          double dxhat = go * gain.value()[j];
          sum_dxhat += dxhat;
          sum_dxhat_xhat += dxhat * xhat[i * w + j];
          if (gain.requires_grad()) gain.grad()[j] += go * xhat[i * w + j];
          if (bias.requires_grad()) bias.grad()[j] += go;
        }
        if (a.requires_grad()) {
          for (std::size_t j = 0; j < w; ++j) {
            double dxhat = out.grad()[i * w + j] * gain.value()[j];
            a.grad()[i * w + j] +=
                inv_std[i] * (dxhat - (sum_dxhat +
                                       xhat[i * w + j] * sum_dxhat_xhat) /
                                          (double)w);
          }
        }
      }
    });
  }
  return out;
}

// Rows scaled to unit L2 norm; rows with norm below eps are left near-zero.
inline Tensor l2_normalize_rows(Graph& g, Tensor a, double eps = 1e-12) {
  if (a.ndim() != 2) dim_error("l2_normalize_rows", a.shape(), {});
  const std::size_t n = a.rows(), w = a.cols();
  Tensor out = detail::make_output(a.shape(), a.requires_grad());
  std::vector<double> inv_norm(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < w; ++j) {
      double v = a.value()[i * w + j];
      s += v * v;
    }
    double norm = std::max(std::sqrt(s), eps);
    inv_norm[i] = 1.0 / norm;
    for (std::size_t j = 0; j < w; ++j)
      out.value()[i * w + j] = a.value()[i * w + j] * inv_norm[i];
  }
  if (out.requires_grad()) {
    g.record([a, out, n, w, inv_norm = std::move(inv_norm)]() mutable {
      for (std::size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < w; ++j)
          dot += out.grad()[i * w + j] * out.value()[i * w + j];
        for (std::size_t j = 0; j < w; ++j)
          a.grad()[i * w + j] +=
              inv_norm[i] * (out.grad()[i * w + j] - out.value()[i * w + j] * dot);
      }
    });
  }
  return out;
}

// table: [vocab, w]; picks table rows by id. Backward scatter-adds.
inline Tensor embedding_lookup(Graph& g, Tensor table,
                               const std::vector<int>& ids) {
  if (table.ndim() != 2) dim_error("embedding_lookup", table.shape(), {});
  const std::size_t v = table.rows(), w = table.cols();
  for (int id : ids)
    if (id < 0 || (std::size_t)id >= v)
      throw DimensionError("embedding_lookup: id " + std::to_string(id) +
                           " outside table " + shape_str(table.shape()));
  Tensor out = detail::make_output({ids.size(), w}, table.requires_grad());
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = 0; j < w; ++j)
      out.value()[i * w + j] = table.value()[(std::size_t)ids[i] * w + j];
  if (out.requires_grad()) {
    g.record([table, out, ids, w]() mutable {
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < w; ++j)
          table.grad()[(std::size_t)ids[i] * w + j] += out.grad()[i * w + j];
    });
  }
  return out;
}

// mean over axis: axis 0 -> [1,cols], axis 1 -> [rows,1].
inline Tensor mean(Graph& g, Tensor a, int axis) {
  if (a.ndim() != 2 || (axis != 0 && axis != 1))
    throw DimensionError("mean: need 2D tensor and axis 0 or 1");
  const std::size_t r = a.rows(), c = a.cols();
  const std::size_t count = axis == 0 ? r : c;
  Tensor out = detail::make_output(axis == 0 ? Shape{1, c} : Shape{r, 1},
                                   a.requires_grad());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j)
      out.value()[axis == 0 ? j : i] += a.value()[i * c + j] / (double)count;
  if (out.requires_grad()) {
    g.record([a, out, r, c, axis, count]() mutable {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          a.grad()[i * c + j] += out.grad()[axis == 0 ? j : i] / (double)count;
    });
  }
  return out;
}

inline Tensor mean_all(Graph& g, Tensor a) {
  const std::size_t n = a.size();
  Tensor out = detail::make_output({1, 1}, a.requires_grad());
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a.value()[i];
  out.value()[0] = s / (double)n;
  if (out.requires_grad()) {
    g.record([a, out, n]() mutable {
      for (std::size_t i = 0; i < n; ++i)
        a.grad()[i] += out.grad()[0] / (double)n;
    });
  }
  return out;
}

inline Tensor sum_all(Graph& g, Tensor a) {
  Tensor out = detail::make_output({1, 1}, a.requires_grad());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.value()[i];
  out.value()[0] = s;
  if (out.requires_grad()) {
    g.record([a, out]() mutable {
      for (std::size_t i = 0; i < a.size(); ++i) a.grad()[i] += out.grad()[0];
    });
  }
  return out;
}

inline Tensor slice_cols(Graph& g, Tensor a, std::size_t c0, std::size_t c1) {
  if (a.ndim() != 2 || c0 >= c1 || c1 > a.cols())
    throw DimensionError("slice_cols: bad range [" + std::to_string(c0) + "," +
                         std::to_string(c1) + ") for " + shape_str(a.shape()));
  const std::size_t r = a.rows(), c = a.cols(), w = c1 - c0;
  Tensor out = detail::make_output({r, w}, a.requires_grad());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j)
      out.value()[i * w + j] = a.value()[i * c + c0 + j];
  if (out.requires_grad()) {
    g.record([a, out, r, c, w, c0]() mutable {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < w; ++j)
          a.grad()[i * c + c0 + j] += out.grad()[i * w + j];
    });
  }
  return out;
}

inline Tensor slice_rows(Graph& g, Tensor a, std::size_t r0, std::size_t r1) {
  if (a.ndim() != 2 || r0 >= r1 || r1 > a.rows())
    throw DimensionError("slice_rows: bad range [" + std::to_string(r0) + "," +
                         std::to_string(r1) + ") for " + shape_str(a.shape()));
  const std::size_t c = a.cols(), n = r1 - r0;
  Tensor out = detail::make_output({n, c}, a.requires_grad());
  std::copy(a.value().begin() + r0 * c, a.value().begin() + r1 * c,
            out.value().begin());
  if (out.requires_grad()) {
    g.record([a, out, r0, c, n]() mutable {
      for (std::size_t i = 0; i < n * c; ++i)
        a.grad()[r0 * c + i] += out.grad()[i];
    });
  }
  return out;
}

inline Tensor concat_rows(Graph& g, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: empty input");
  const std::size_t c = parts[0].cols();
  std::size_t rows = 0;
  bool rq = false;
  for (const auto& p : parts) {
    if (p.ndim() != 2 || p.cols() != c)
      dim_error("concat_rows", parts[0].shape(), p.shape());
    rows += p.rows();
    rq = rq || p.requires_grad();
  }
  Tensor out = detail::make_output({rows, c}, rq);
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p.value().begin(), p.value().end(), out.value().begin() + off);
    off += p.size();
  }
  if (rq) {
    std::vector<Tensor> held = parts;
    g.record([held, out]() mutable {
      std::size_t off = 0;
      for (auto& p : held) {
        if (p.requires_grad())
          for (std::size_t i = 0; i < p.size(); ++i)
            p.grad()[i] += out.grad()[off + i];
        off += p.size();
      }
    });
  }
  return out;
}

inline Tensor concat_cols(Graph& g, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: empty input");
  const std::size_t r = parts[0].rows();
  std::size_t cols = 0;
  bool rq = false;
  for (const auto& p : parts) {
    if (p.ndim() != 2 || p.rows() != r)
      dim_error("concat_cols", parts[0].shape(), p.shape());
    cols += p.cols();
    rq = rq || p.requires_grad();
  }
  Tensor out = detail::make_output({r, cols}, rq);
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < r; ++i)
      std::copy(p.value().begin() + i * p.cols(),
                p.value().begin() + (i + 1) * p.cols(),
                out.value().begin() + i * cols + off);
    off += p.cols();
  }
  if (rq) {
    std::vector<Tensor> held = parts;
    g.record([held, out, r, cols]() mutable {
      std::size_t off = 0;
      for (auto& p : held) {
        if (p.requires_grad())
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < p.cols(); ++j)
              p.grad()[i * p.cols() + j] += out.grad()[i * cols + off + j];
        off += p.cols();
      }
    });
  }
  return out;
}

// Diagonal of a square matrix as [n,1].
inline Tensor diag(Graph& g, Tensor a) {
  if (a.ndim() != 2 || a.rows() != a.cols())
    throw DimensionError("diag: need square matrix, got " +
                         shape_str(a.shape()));
  const std::size_t n = a.rows();
  Tensor out = detail::make_output({n, 1}, a.requires_grad());
  for (std::size_t i = 0; i < n; ++i) out.value()[i] = a.value()[i * n + i];
  if (out.requires_grad()) {
    g.record([a, out, n]() mutable {
      for (std::size_t i = 0; i < n; ++i) a.grad()[i * n + i] += out.grad()[i];
    });
  }
  return out;
}

// out[i,0] = a[i, cols[i]].
inline Tensor gather_cols(Graph& g, Tensor a, const std::vector<int>& cols) {
  if (a.ndim() != 2 || cols.size() != a.rows())
    throw DimensionError("gather_cols: need one index per row of " +
                         shape_str(a.shape()));
  const std::size_t c = a.cols();
  for (int j : cols)
    if (j < 0 || (std::size_t)j >= c)
      throw DimensionError("gather_cols: column index out of range");
  Tensor out = detail::make_output({cols.size(), 1}, a.requires_grad());
  for (std::size_t i = 0; i < cols.size(); ++i)
    out.value()[i] = a.value()[i * c + (std::size_t)cols[i]];
  if (out.requires_grad()) {
    g.record([a, out, cols, c]() mutable {
      for (std::size_t i = 0; i < cols.size(); ++i)
        a.grad()[i * c + (std::size_t)cols[i]] += out.grad()[i];
    });
  }
  return out;
}

}  // namespace clap
