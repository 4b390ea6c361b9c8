#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "vap/autodiff.hpp"
#include "vap/rng.hpp"
#include "vap/tensor.hpp"

namespace vap {

template <typename S>
struct ParamRef {
  std::string name;
  Var<S> var;
};

template <typename S>
inline Var<S> init_param(std::vector<int> shape, double fan_in, Rng& rng) {
  double bound = std::sqrt(6.0 / std::max(1.0, fan_in));
  return make_parameter(uniform_tensor<S>(std::move(shape), static_cast<S>(-bound),
                                          static_cast<S>(bound), rng));
}

template <typename S>
class Linear {
 public:
  Linear() = default;
  Linear(int in, int out, Rng& rng)
      : w_(init_param<S>({in, out}, in, rng)), b_(make_parameter(Tensor<S>({out}))) {}

  Var<S> forward(const Var<S>& x) const { return add_row(matmul(x, w_), b_); }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".w", w_});
    out.push_back({prefix + ".b", b_});
  }

 private:
  Var<S> w_, b_;
};

template <typename S>
class LayerNorm {
 public:
  LayerNorm() = default;
  explicit LayerNorm(int dim) : gain_(make_parameter(Tensor<S>({dim}))), bias_(make_parameter(Tensor<S>({dim}))) {
    gain_->value.fill(S(1));
  }

  Var<S> forward(const Var<S>& x) const { return layer_norm(x, gain_, bias_); }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".gain", gain_});
    out.push_back({prefix + ".bias", bias_});
  }

 private:
  Var<S> gain_, bias_;
};

// Causal multi-head attention. With a null kv stream it is self-attention;
// queries at frame i only see keys at frames <= i.
template <typename S>
class MultiheadAttention {
 public:
  MultiheadAttention() = default;
  MultiheadAttention(int dim, int heads, Rng& rng)
      : dim_(dim),
        heads_(heads),
        wq_(dim, dim, rng),
        wk_(dim, dim, rng),
        wv_(dim, dim, rng),
        wo_(dim, dim, rng) {
    require<ConfigError>(dim % heads == 0, "attention dim must divide heads");
  }

  Var<S> forward(const Var<S>& query_stream, const Var<S>& kv_stream) const {
    const int head_dim = dim_ / heads_;
    Var<S> q = wq_.forward(query_stream);
    Var<S> k = wk_.forward(kv_stream);
    Var<S> v = wv_.forward(kv_stream);
    std::vector<Var<S>> contexts;
    const S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(head_dim)));
    for (int h = 0; h < heads_; ++h) {
      Var<S> qh = slice_cols(q, h * head_dim, head_dim);
      Var<S> kh = slice_cols(k, h * head_dim, head_dim);
      Var<S> vh = slice_cols(v, h * head_dim, head_dim);
      Var<S> scores = scale(matmul_nt(qh, kh), inv_sqrt);
      Var<S> probs = causal_softmax(scores);
      contexts.push_back(matmul(probs, vh));
    }
    return wo_.forward(concat_cols(contexts));
  }

  Var<S> forward(const Var<S>& x) const { return forward(x, x); }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    wq_.collect(prefix + ".wq", out);
    wk_.collect(prefix + ".wk", out);
    wv_.collect(prefix + ".wv", out);
    wo_.collect(prefix + ".wo", out);
  }

 private:
  int dim_ = 0;
  int heads_ = 0;
  Linear<S> wq_, wk_, wv_, wo_;
};

template <typename S>
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(int dim, int hidden, Rng& rng) : up_(dim, hidden, rng), down_(hidden, dim, rng) {}

  Var<S> forward(const Var<S>& x) const { return down_.forward(relu(up_.forward(x))); }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    up_.collect(prefix + ".up", out);
    down_.collect(prefix + ".down", out);
  }

 private:
  Linear<S> up_, down_;
};

// Pre-norm transformer block with causal self-attention.
template <typename S>
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(int dim, int heads, Rng& rng, int ffn_mult = 2)
      : ln1_(dim), ln2_(dim), attn_(dim, heads, rng), ffn_(dim, dim * ffn_mult, rng) {}

  Var<S> forward(const Var<S>& x) const {
    Var<S> h = add(x, attn_.forward(ln1_.forward(x)));
    return add(h, ffn_.forward(ln2_.forward(h)));
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    ln1_.collect(prefix + ".ln1", out);
    ln2_.collect(prefix + ".ln2", out);
    attn_.collect(prefix + ".attn", out);
    ffn_.collect(prefix + ".ffn", out);
  }

 private:
  LayerNorm<S> ln1_, ln2_;
  MultiheadAttention<S> attn_;
  FeedForward<S> ffn_;
};

// Pre-norm block with causal cross-attention into another stream. One weight
// set serves both directions, which keeps person swapping symmetric.
template <typename S>
class CrossAttentionBlock {
 public:
  CrossAttentionBlock() = default;
  CrossAttentionBlock(int dim, int heads, Rng& rng, int ffn_mult = 2)
      : ln_q_(dim), ln_kv_(dim), ln2_(dim), attn_(dim, heads, rng), ffn_(dim, dim * ffn_mult, rng) {}

  Var<S> forward(const Var<S>& own, const Var<S>& other) const {
    Var<S> h = add(own, attn_.forward(ln_q_.forward(own), ln_kv_.forward(other)));
    return add(h, ffn_.forward(ln2_.forward(h)));
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    ln_q_.collect(prefix + ".ln_q", out);
    ln_kv_.collect(prefix + ".ln_kv", out);
    ln2_.collect(prefix + ".ln2", out);
    attn_.collect(prefix + ".attn", out);
    ffn_.collect(prefix + ".ffn", out);
  }

 private:
  LayerNorm<S> ln_q_, ln_kv_, ln2_;
  MultiheadAttention<S> attn_;
  FeedForward<S> ffn_;
};

// Fixed sinusoidal positions; added to streams before attention stacks.
template <typename S>
Tensor<S> sinusoidal_positions(int frames, int dim) {
  Tensor<S> pos({frames, dim});
  for (int t = 0; t < frames; ++t)
    for (int j = 0; j < dim; ++j) {
      double rate = std::pow(10000.0, -2.0 * (j / 2) / dim);
      double angle = t * rate;
      pos.data[static_cast<std::size_t>(t) * dim + j] =
          static_cast<S>((j % 2 == 0) ? std::sin(angle) : std::cos(angle));
    }
  return pos;
}

template <typename S>
Var<S> add_positions(const Var<S>& x) {
  return add(x, make_constant(sinusoidal_positions<S>(x->value.rows(), x->value.cols())));
}

}  // namespace vap
