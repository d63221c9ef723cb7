// Transformer building blocks: linear layers, layer norm, multi-head
// attention, and pre-norm residual blocks.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "clap/optim.hpp"
#include "clap/tensor.hpp"

namespace clap {

constexpr double kMaskValue = -1e9;  // underflows to exact 0 after softmax

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [1, out] (undefined when bias-free)

  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in,
         std::size_t out, Rng& rng, bool with_bias = true,
         double init_std = 0.02) {
    weight = store.create_normal(name + ".weight", {in, out}, rng, init_std);
    if (with_bias) bias = store.create(name + ".bias", {1, out});
  }

  Tensor forward(Graph& g, Tensor x) const {
    Tensor y = matmul(g, x, weight);
    if (bias.defined()) y = add_rowvec(g, y, bias);
    return y;
  }
};

struct LayerNormModule {
  Tensor gain;  // [1, w]
  Tensor bias;  // [1, w]

  LayerNormModule() = default;
  LayerNormModule(ParameterStore& store, const std::string& name,
                  std::size_t width) {
    gain = store.create(name + ".gain", {1, width});
    std::fill(gain.value().begin(), gain.value().end(), 1.0);
    bias = store.create(name + ".bias", {1, width});
  }

  Tensor forward(Graph& g, Tensor x) const {
    return layer_norm(g, x, gain, bias);
  }
};

// Additive attention mask builders. mask[i*len+j] == kMaskValue blocks j as a
// key for query i.
inline Tensor causal_mask(std::size_t len) {
  Tensor m = Tensor::zeros({len, len});
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = i + 1; j < len; ++j) m.value()[i * len + j] = kMaskValue;
  return m;
}

struct MultiHeadAttention {
  Linear qkv;   // [w, 3w]
  Linear proj;  // [w, w]
  std::size_t heads = 1;
  std::size_t width = 0;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore& store, const std::string& name,
                     std::size_t width_, std::size_t heads_, Rng& rng)
      : heads(heads_), width(width_) {
    if (width % heads != 0)
      throw DimensionError("attention: width " + std::to_string(width) +
                           " not divisible by " + std::to_string(heads) +
                           " heads");
    qkv = Linear(store, name + ".qkv", width, 3 * width, rng);
    proj = Linear(store, name + ".proj", width, width, rng);
  }

  Tensor forward(Graph& g, Tensor x, const Tensor& mask) const {
    const std::size_t head_dim = width / heads;
    Tensor fused = qkv.forward(g, x);
    std::vector<Tensor> ctx;
    ctx.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
      Tensor q = slice_cols(g, fused, h * head_dim, (h + 1) * head_dim);
      Tensor k = slice_cols(g, fused, width + h * head_dim,
                            width + (h + 1) * head_dim);
      Tensor v = slice_cols(g, fused, 2 * width + h * head_dim,
                            2 * width + (h + 1) * head_dim);
      Tensor scores =
          scale(g, matmul(g, q, transpose(g, k)), 1.0 / std::sqrt((double)head_dim));
      if (mask.defined()) scores = add(g, scores, mask);
      Tensor probs = softmax(g, scores, 1);
      ctx.push_back(matmul(g, probs, v));
    }
    return proj.forward(g, concat_cols(g, ctx));
  }
};

// Pre-norm residual block with a GELU MLP (expansion 4).
struct TransformerBlock {
  LayerNormModule ln1, ln2;
  MultiHeadAttention attn;
  Linear fc1, fc2;

  TransformerBlock() = default;
  TransformerBlock(ParameterStore& store, const std::string& name,
                   std::size_t width, std::size_t heads, Rng& rng) {
    ln1 = LayerNormModule(store, name + ".ln1", width);
    attn = MultiHeadAttention(store, name + ".attn", width, heads, rng);
    ln2 = LayerNormModule(store, name + ".ln2", width);
    fc1 = Linear(store, name + ".fc1", width, 4 * width, rng);
    fc2 = Linear(store, name + ".fc2", 4 * width, width, rng);
  }

  Tensor forward(Graph& g, Tensor x, const Tensor& mask) const {
    x = add(g, x, attn.forward(g, ln1.forward(g, x), mask));
    x = add(g, x, fc2.forward(g, gelu(g, fc1.forward(g, ln2.forward(g, x)))));
    return x;
  }
};

}  // namespace clap
