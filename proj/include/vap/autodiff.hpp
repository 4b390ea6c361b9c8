#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "vap/tensor.hpp"

namespace vap {

// Reverse-mode autodiff on a dynamically built graph. Nodes are created in
// topological order, so backward() just replays creation order in reverse.

template <typename S>
struct Node;

template <typename S>
using Var = std::shared_ptr<Node<S>>;

template <typename S>
struct Node {
  Tensor<S> value;
  Tensor<S> grad;  // allocated lazily; same shape as value
  bool requires_grad = false;
  long id = 0;
  std::vector<Var<S>> parents;
  std::function<void()> backprop;

  Tensor<S>& grad_buffer() {
    if (grad.data.empty()) grad = Tensor<S>(value.shape);
    return grad;
  }
};

namespace autodiff_detail {

inline long& node_counter() {
  thread_local long counter = 0;
  return counter;
}

inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace autodiff_detail

// Disables graph recording in scope (inference paths).
struct NoGradGuard {
  bool previous;
  NoGradGuard() : previous(autodiff_detail::grad_mode()) {
    autodiff_detail::grad_mode() = false;
  }
  ~NoGradGuard() { autodiff_detail::grad_mode() = previous; }
};

template <typename S>
Var<S> make_constant(Tensor<S> value) {
  auto node = std::make_shared<Node<S>>();
  node->value = std::move(value);
  node->id = ++autodiff_detail::node_counter();
  return node;
}

template <typename S>
Var<S> make_parameter(Tensor<S> value) {
  auto node = make_constant(std::move(value));
  node->requires_grad = true;
  return node;
}

template <typename S>
bool recording(const std::vector<Var<S>>& parents) {
  if (!autodiff_detail::grad_mode()) return false;
  for (const auto& p : parents)
    if (p->requires_grad) return true;
  return false;
}

template <typename S>
Var<S> make_op(Tensor<S> value, std::vector<Var<S>> parents,
               std::function<void()> backprop) {
  auto node = std::make_shared<Node<S>>();
  node->value = std::move(value);
  node->id = ++autodiff_detail::node_counter();
  if (recording(parents)) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backprop = std::move(backprop);
  }
  return node;
}

template <typename S>
void backward(const Var<S>& root) {
  require<ValidationError>(root->requires_grad, "backward() on a non-recorded node");
  root->grad_buffer().fill(S(1));
  // collect reachable nodes, then run in reverse creation order
  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> seen;
  std::vector<Node<S>*> stack{root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node<S>* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const auto& p : n->parents)
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
  }
  std::sort(order.begin(), order.end(),
            [](const Node<S>* a, const Node<S>* b) { return a->id > b->id; });
  for (Node<S>* n : order)
    if (n->backprop && !n->grad.data.empty()) n->backprop();
}

// ---- elementwise and shape ops ----

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
  require<DimensionError>(a->value.numel() == b->value.numel(),
                          "add: shape mismatch " + a->value.shape_str() + " vs " +
                              b->value.shape_str());
  Tensor<S> out = a->value;
  out.add_(b->value);
  Node<S>* an = a.get();
  Node<S>* bn = b.get();
  auto result = make_op<S>(std::move(out), {a, b}, nullptr);
  if (result->requires_grad) {
    Node<S>* rn = result.get();
    result->backprop = [an, bn, rn]() {
      if (an->requires_grad) an->grad_buffer().add_(rn->grad);
      if (bn->requires_grad) bn->grad_buffer().add_(rn->grad);
    };
  }
  return result;
}

// x[T,N] + row[N] broadcast over rows (bias, learned embeddings)
template <typename S>
Var<S> add_row(const Var<S>& x, const Var<S>& row) {
  const int t = x->value.rows();
  const int n = x->value.cols();
  require<DimensionError>(row->value.numel() == n, "add_row: width mismatch");
  Tensor<S> out = x->value;
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < n; ++j) out.data[static_cast<std::size_t>(i) * n + j] += row->value.data[static_cast<std::size_t>(j)];
  Node<S>* xn = x.get();
  Node<S>* rn = row.get();
  auto result = make_op<S>(std::move(out), {x, row}, nullptr);
  if (result->requires_grad) {
    Node<S>* on = result.get();
    result->backprop = [xn, rn, on, t, n]() {
      if (xn->requires_grad) xn->grad_buffer().add_(on->grad);
      if (rn->requires_grad) {
        auto& g = rn->grad_buffer();
        for (int i = 0; i < t; ++i)
          for (int j = 0; j < n; ++j)
            g.data[static_cast<std::size_t>(j)] += on->grad.data[static_cast<std::size_t>(i) * n + j];
      }
    };
  }
  return result;
}

template <typename S>
Var<S> scale(const Var<S>& x, S factor) {
  Tensor<S> out = x->value;
  for (auto& v : out.data) v *= factor;
  Node<S>* xn = x.get();
  auto result = make_op<S>(std::move(out), {x}, nullptr);
  if (result->requires_grad) {
    Node<S>* on = result.get();
    result->backprop = [xn, on, factor]() {
      auto& g = xn->grad_buffer();
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += factor * on->grad.data[i];
    };
  }
  return result;
}

template <typename S>
Var<S> relu(const Var<S>& x) {
  Tensor<S> out = x->value;
  for (auto& v : out.data) v = v > S(0) ? v : S(0);
  Node<S>* xn = x.get();
  auto result = make_op<S>(std::move(out), {x}, nullptr);
  if (result->requires_grad) {
    Node<S>* on = result.get();
    result->backprop = [xn, on]() {
      auto& g = xn->grad_buffer();
      for (std::size_t i = 0; i < g.data.size(); ++i)
        if (xn->value.data[i] > S(0)) g.data[i] += on->grad.data[i];
    };
  }
  return result;
}

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  require<DimensionError>(a->value.cols() == b->value.rows(),
                          "matmul: inner dims " + a->value.shape_str() + " x " +
                              b->value.shape_str());
  Tensor<S> out({a->value.rows(), b->value.cols()});
  gemm<S>(false, false, a->value, b->value, out);
  Node<S>* an = a.get();
  Node<S>* bn = b.get();
  auto result = make_op<S>(std::move(out), {a, b}, nullptr);
  if (result->requires_grad) {
    Node<S>* on = result.get();
    result->backprop = [an, bn, on]() {
      if (an->requires_grad) gemm<S>(false, true, on->grad, bn->value, an->grad_buffer(), S(1), S(1));
      if (bn->requires_grad) gemm<S>(true, false, an->value, on->grad, bn->grad_buffer(), S(1), S(1));
    };
  }
  return result;
}

// a[m,k] * b[n,k]^T -> [m,n]
template <typename S>
Var<S> matmul_nt(const Var<S>& a, const Var<S>& b) {
  require<DimensionError>(a->value.cols() == b->value.cols(),
                          "matmul_nt: inner dims " + a->value.shape_str() + " x " +
                              b->value.shape_str());
  Tensor<S> out({a->value.rows(), b->value.rows()});
  gemm<S>(false, true, a->value, b->value, out);
  Node<S>* an = a.get();
  Node<S>* bn = b.get();
  auto result = make_op<S>(std::move(out), {a, b}, nullptr);
  if (result->requires_grad) {
    Node<S>* on = result.get();
    result->backprop = [an, bn, on]() {
      if (an->requires_grad) gemm<S>(false, false, on->grad, bn->value, an->grad_buffer(), S(1), S(1));
      if (bn->requires_grad) gemm<S>(true, false, on->grad, an->value, bn->grad_buffer(), S(1), S(1));
    };
  }
  return result;
}

template <typename S>
Var<S> slice_cols(const Var<S>& x, int begin, int width) {
  const int t = x->value.rows();
  const int n = x->value.cols();
  require<DimensionError>(begin >= 0 && begin + width <= n, "slice_cols out of range");
  Tensor<S> out({t, width});
  for (int i = 0; i < t; ++i)
    std::copy_n(&x->value.data[static_cast<std::size_t>(i) * n + begin], width,
                &out.data[static_cast<std::size_t>(i) * width]);
  Node<S>* xn = x.get();
  auto result = make_op<S>(std::move(out), {x}, nullptr);
  if (result->requires_grad) {
    Node<S>* on = result.get();
    result->backprop = [xn, on, begin, width, t, n]() {
      auto& g = xn->grad_buffer();
      for (int i = 0; i < t; ++i)
        for (int j = 0; j < width; ++j)
          g.data[static_cast<std::size_t>(i) * n + begin + j] +=
              on->grad.data[static_cast<std::size_t>(i) * width + j];
    };
  }
  return result;
}

template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& xs) {
  require<DimensionError>(!xs.empty(), "concat_cols: empty input");
  const int t = xs[0]->value.rows();
  int total = 0;
  for (const auto& x : xs) {
    require<DimensionError>(x->value.rows() == t, "concat_cols: row mismatch");
    total += x->value.cols();
  }
  Tensor<S> out({t, total});
  int offset = 0;
  for (const auto& x : xs) {
    const int w = x->value.cols();
    for (int i = 0; i < t; ++i)
      std::copy_n(&x->value.data[static_cast<std::size_t>(i) * w], w,
                  &out.data[static_cast<std::size_t>(i) * total + offset]);
    offset += w;
  }
  std::vector<Var<S>> parents = xs;
  auto result = make_op<S>(std::move(out), parents, nullptr);
  if (result->requires_grad) {
    Node<S>* on = result.get();
    std::vector<Node<S>*> raw;
    for (const auto& x : xs) raw.push_back(x.get());
    result->backprop = [raw, on, t, total]() {
      int off = 0;
      for (Node<S>* xn : raw) {
        const int w = xn->value.cols();
        if (xn->requires_grad) {
          auto& g = xn->grad_buffer();
          for (int i = 0; i < t; ++i)
            for (int j = 0; j < w; ++j)
              g.data[static_cast<std::size_t>(i) * w + j] +=
                  on->grad.data[static_cast<std::size_t>(i) * total + off + j];
        }
        off += w;
      }
    };
  }
  return result;
}

template <typename S>
Var<S> layer_norm(const Var<S>& x, const Var<S>& gain, const Var<S>& bias,
                  S eps = S(1e-5)) {
  const int t = x->value.rows();
  const int n = x->value.cols();
  require<DimensionError>(gain->value.numel() == n && bias->value.numel() == n,
                          "layer_norm: parameter width mismatch");
  Tensor<S> out({t, n});
  Tensor<S> x_hat({t, n});
  Tensor<S> inv_std({t, 1});
  for (int i = 0; i < t; ++i) {
    const S* row = &x->value.data[static_cast<std::size_t>(i) * n];
    S mean = S(0);
    for (int j = 0; j < n; ++j) mean += row[j];
    mean /= S(n);
    S var = S(0);
    for (int j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= S(n);
    S is = S(1) / std::sqrt(var + eps);
    inv_std.data[static_cast<std::size_t>(i)] = is;
    for (int j = 0; j < n; ++j) {
      S xh = (row[j] - mean) * is;
      x_hat.data[static_cast<std::size_t>(i) * n + j] = xh;
      out.data[static_cast<std::size_t>(i) * n + j] =
          xh * gain->value.data[static_cast<std::size_t>(j)] + bias->value.data[static_cast<std::size_t>(j)];
    }
  }
  Node<S>* xn = x.get();
  Node<S>* gn = gain.get();
  Node<S>* bn = bias.get();
  auto result = make_op<S>(std::move(out), {x, gain, bias}, nullptr);
  if (result->requires_grad) {
    Node<S>* on = result.get();
    result->backprop = [xn, gn, bn, on, xh = std::move(x_hat), is = std::move(inv_std), t, n]() {
      for (int i = 0; i < t; ++i) {
        const S* dy = &on->grad.data[static_cast<std::size_t>(i) * n];
        const S* xhr = &xh.data[static_cast<std::size_t>(i) * n];
        if (gn->requires_grad) {
          auto& gg = gn->grad_buffer();
          for (int j = 0; j < n; ++j) gg.data[static_cast<std::size_t>(j)] += dy[j] * xhr[j];
        }
        if (bn->requires_grad) {
          auto& gb = bn->grad_buffer();
          for (int j = 0; j < n; ++j) gb.data[static_cast<std::size_t>(j)] += dy[j];
        }
        if (xn->requires_grad) {
          S sum_g = S(0), sum_gx = S(0);
          for (int j = 0; j < n; ++j) {
            S gj = dy[j] * gn->value.data[static_cast<std::size_t>(j)];
            sum_g += gj;
            sum_gx += gj * xhr[j];
          }
          auto& gx = xn->grad_buffer();
          S isr = is.data[static_cast<std::size_t>(i)];
          for (int j = 0; j < n; ++j) {
            S gj = dy[j] * gn->value.data[static_cast<std::size_t>(j)];
            gx.data[static_cast<std::size_t>(i) * n + j] +=
                (gj - sum_g / S(n) - xhr[j] * sum_gx / S(n)) * isr;
          }
        }
      }
    };
  }
  return result;
}

// Row-wise softmax over key positions j <= i + key_offset. With equal clocks
// key_offset 0 gives strict frame causality for self and cross attention.
template <typename S>
Var<S> causal_softmax(const Var<S>& scores, int key_offset = 0) {
  const int tq = scores->value.rows();
  const int tk = scores->value.cols();
  Tensor<S> probs({tq, tk});
  for (int i = 0; i < tq; ++i) {
    const int limit = std::min(tk - 1, i + key_offset);
    require<DimensionError>(limit >= 0, "causal_softmax: row has no visible keys");
    const S* row = &scores->value.data[static_cast<std::size_t>(i) * tk];
    S max_v = row[0];
    for (int j = 1; j <= limit; ++j) max_v = std::max(max_v, row[j]);
    S denom = S(0);
    S* prow = &probs.data[static_cast<std::size_t>(i) * tk];
    for (int j = 0; j <= limit; ++j) {
      prow[j] = std::exp(row[j] - max_v);
      denom += prow[j];
    }
    for (int j = 0; j <= limit; ++j) prow[j] /= denom;
    // masked tail stays exactly zero
  }
  Node<S>* sn = scores.get();
  auto result = make_op<S>(std::move(probs), {scores}, nullptr);
  if (result->requires_grad) {
    Node<S>* on = result.get();
    result->backprop = [sn, on, tq, tk, key_offset]() {
      auto& g = sn->grad_buffer();
      for (int i = 0; i < tq; ++i) {
        const int limit = std::min(tk - 1, i + key_offset);
        const S* p = &on->value.data[static_cast<std::size_t>(i) * tk];
        const S* dp = &on->grad.data[static_cast<std::size_t>(i) * tk];
        S dot = S(0);
        for (int j = 0; j <= limit; ++j) dot += p[j] * dp[j];
        for (int j = 0; j <= limit; ++j)
          g.data[static_cast<std::size_t>(i) * tk + j] += p[j] * (dp[j] - dot);
      }
    };
  }
  return result;
}

// Strided causal 1-D convolution via im2col. Kernel layout [K*Cin, Cout].
// Output frame t sees input samples (t+1)*stride - K + 1 ... (t+1)*stride - 1 + 1,
// i.e. nothing past the end of its own hop; indices before 0 read as zero.
template <typename S>
Var<S> conv1d_causal(const Var<S>& x, const Var<S>& w, const Var<S>& b, int kernel,
                     int stride) {
  const int t_in = x->value.rows();
  const int c_in = x->value.cols();
  const int c_out = w->value.cols();
  require<DimensionError>(w->value.rows() == kernel * c_in, "conv1d: kernel shape mismatch");
  require<DimensionError>(t_in % stride == 0,
                          "conv1d: input length " + std::to_string(t_in) +
                              " not divisible by stride " + std::to_string(stride));
  const int t_out = t_in / stride;
  Tensor<S> cols({t_out, kernel * c_in});
  for (int t = 0; t < t_out; ++t) {
    const int last = (t + 1) * stride - 1;  // newest visible sample
    for (int k = 0; k < kernel; ++k) {
      const int src = last - (kernel - 1) + k;
      if (src < 0) continue;  // zero pad on the left
      std::copy_n(&x->value.data[static_cast<std::size_t>(src) * c_in], c_in,
                  &cols.data[(static_cast<std::size_t>(t) * kernel + k) * c_in]);
    }
  }
  Tensor<S> out({t_out, c_out});
  gemm<S>(false, false, cols, w->value, out);
  for (int t = 0; t < t_out; ++t)
    for (int c = 0; c < c_out; ++c)
      out.data[static_cast<std::size_t>(t) * c_out + c] += b->value.data[static_cast<std::size_t>(c)];
  Node<S>* xn = x.get();
  Node<S>* wn = w.get();
  Node<S>* bn = b.get();
  auto result = make_op<S>(std::move(out), {x, w, b}, nullptr);
  if (result->requires_grad) {
    Node<S>* on = result.get();
    result->backprop = [xn, wn, bn, on, saved = std::move(cols), kernel, stride, t_out, c_in,
                        c_out]() {
      if (wn->requires_grad) gemm<S>(true, false, saved, on->grad, wn->grad_buffer(), S(1), S(1));
      if (bn->requires_grad) {
        auto& gb = bn->grad_buffer();
        for (int t = 0; t < t_out; ++t)
          for (int c = 0; c < c_out; ++c)
            gb.data[static_cast<std::size_t>(c)] += on->grad.data[static_cast<std::size_t>(t) * c_out + c];
      }
      if (xn->requires_grad) {
        Tensor<S> dcols({t_out, kernel * c_in});
        gemm<S>(false, true, on->grad, wn->value, dcols);
        auto& gx = xn->grad_buffer();
        for (int t = 0; t < t_out; ++t) {
          const int last = (t + 1) * stride - 1;
          for (int k = 0; k < kernel; ++k) {
            const int src = last - (kernel - 1) + k;
            if (src < 0) continue;
            for (int c = 0; c < c_in; ++c)
              gx.data[static_cast<std::size_t>(src) * c_in + c] +=
                  dcols.data[(static_cast<std::size_t>(t) * kernel + k) * c_in + c];
          }
        }
      }
    };
  }
  return result;
}

// Frame-batched 2-D convolution, VALID padding. Input [T, Cin*H*W], kernel
// [K*K*Cin, Cout], output [T, Cout*OH*OW].
template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& w, const Var<S>& b, int c_in, int height,
              int width, int kernel, int stride) {
  const int t_frames = x->value.rows();
  require<DimensionError>(x->value.cols() == c_in * height * width, "conv2d: input layout");
  const int c_out = w->value.cols();
  require<DimensionError>(w->value.rows() == kernel * kernel * c_in, "conv2d: kernel layout");
  const int oh = (height - kernel) / stride + 1;
  const int ow = (width - kernel) / stride + 1;
  require<DimensionError>(oh >= 1 && ow >= 1, "conv2d: kernel larger than input");
  const long patch = static_cast<long>(kernel) * kernel * c_in;
  Tensor<S> cols({t_frames * oh * ow, static_cast<int>(patch)});
  for (int t = 0; t < t_frames; ++t) {
    const S* frame = &x->value.data[static_cast<std::size_t>(t) * c_in * height * width];
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        S* dst = &cols.data[((static_cast<std::size_t>(t) * oh + oy) * ow + ox) * patch];
        for (int c = 0; c < c_in; ++c)
          for (int ky = 0; ky < kernel; ++ky) {
            const S* src = frame + (static_cast<std::size_t>(c) * height + oy * stride + ky) * width +
                           ox * stride;
            std::copy_n(src, kernel, dst + (static_cast<std::size_t>(ky) * kernel) +
                                         static_cast<std::size_t>(c) * kernel * kernel);
          }
      }
  }
  Tensor<S> flat({t_frames * oh * ow, c_out});
  gemm<S>(false, false, cols, w->value, flat);
  Tensor<S> out({t_frames, c_out * oh * ow});
  for (int t = 0; t < t_frames; ++t)
    for (int c = 0; c < c_out; ++c)
      for (int p = 0; p < oh * ow; ++p)
        out.data[static_cast<std::size_t>(t) * c_out * oh * ow + static_cast<std::size_t>(c) * oh * ow + p] =
            flat.data[(static_cast<std::size_t>(t) * oh * ow + p) * c_out + c] +
            b->value.data[static_cast<std::size_t>(c)];
  Node<S>* xn = x.get();
  Node<S>* wn = w.get();
  Node<S>* bn = b.get();
  auto result = make_op<S>(std::move(out), {x, w, b}, nullptr);
  if (result->requires_grad) {
    Node<S>* on = result.get();
    result->backprop = [xn, wn, bn, on, saved = std::move(cols), c_in, height, width, kernel,
                        stride, t_frames, oh, ow, c_out, patch]() {
      // regroup output grad to gemm layout [T*OH*OW, Cout]
      Tensor<S> dflat({t_frames * oh * ow, c_out});
      for (int t = 0; t < t_frames; ++t)
        for (int c = 0; c < c_out; ++c)
          for (int p = 0; p < oh * ow; ++p)
            dflat.data[(static_cast<std::size_t>(t) * oh * ow + p) * c_out + c] =
                on->grad.data[static_cast<std::size_t>(t) * c_out * oh * ow +
                              static_cast<std::size_t>(c) * oh * ow + p];
      if (wn->requires_grad) gemm<S>(true, false, saved, dflat, wn->grad_buffer(), S(1), S(1));
      if (bn->requires_grad) {
        auto& gb = bn->grad_buffer();
        for (long r = 0; r < static_cast<long>(t_frames) * oh * ow; ++r)
          for (int c = 0; c < c_out; ++c)
            gb.data[static_cast<std::size_t>(c)] += dflat.data[static_cast<std::size_t>(r) * c_out + c];
      }
      if (xn->requires_grad) {
        Tensor<S> dcols({t_frames * oh * ow, static_cast<int>(patch)});
        gemm<S>(false, true, dflat, wn->value, dcols);
        auto& gx = xn->grad_buffer();
        for (int t = 0; t < t_frames; ++t) {
          S* frame = &gx.data[static_cast<std::size_t>(t) * c_in * height * width];
          for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
              const S* src = &dcols.data[((static_cast<std::size_t>(t) * oh + oy) * ow + ox) * patch];
              for (int c = 0; c < c_in; ++c)
                for (int ky = 0; ky < kernel; ++ky)
                  for (int kx = 0; kx < kernel; ++kx)
                    frame[(static_cast<std::size_t>(c) * height + oy * stride + ky) * width +
                          ox * stride + kx] +=
                        src[static_cast<std::size_t>(c) * kernel * kernel +
                            static_cast<std::size_t>(ky) * kernel + kx];
            }
        }
      }
    };
  }
  return result;
}

// Mean cross-entropy between logits [T,C] and integer targets over unmasked
// frames. Throws when every frame is masked out.
template <typename S>
Var<S> softmax_cross_entropy(const Var<S>& logits, const std::vector<int>& targets,
                             const std::vector<std::uint8_t>& mask) {
  const int t = logits->value.rows();
  const int c = logits->value.cols();
  require<DimensionError>(static_cast<int>(targets.size()) == t &&
                              static_cast<int>(mask.size()) == t,
                          "cross_entropy: target/mask length mismatch");
  long n_valid = 0;
  for (std::uint8_t m : mask) n_valid += m ? 1 : 0;
  require<ValidationError>(n_valid > 0, "cross_entropy: fully masked batch");
  Tensor<S> probs({t, c});
  S loss = S(0);
  for (int i = 0; i < t; ++i) {
    const S* row = &logits->value.data[static_cast<std::size_t>(i) * c];
    S max_v = row[0];
    for (int j = 1; j < c; ++j) max_v = std::max(max_v, row[j]);
    S denom = S(0);
    S* prow = &probs.data[static_cast<std::size_t>(i) * c];
    for (int j = 0; j < c; ++j) {
      prow[j] = std::exp(row[j] - max_v);
      denom += prow[j];
    }
    for (int j = 0; j < c; ++j) prow[j] /= denom;
    if (mask[static_cast<std::size_t>(i)]) {
      require<ValidationError>(targets[static_cast<std::size_t>(i)] >= 0 &&
                                   targets[static_cast<std::size_t>(i)] < c,
                               "cross_entropy: target out of range");
      loss -= std::log(std::max(prow[targets[static_cast<std::size_t>(i)]], S(1e-300)));
    }
  }
  Tensor<S> out({1});
  out.data[0] = loss / S(n_valid);
  Node<S>* ln = logits.get();
  auto result = make_op<S>(std::move(out), {logits}, nullptr);
  if (result->requires_grad) {
    Node<S>* on = result.get();
    result->backprop = [ln, on, p = std::move(probs), targets, mask, t, c, n_valid]() {
      const S up = on->grad.data[0] / S(n_valid);
      auto& g = ln->grad_buffer();
      for (int i = 0; i < t; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        const S* prow = &p.data[static_cast<std::size_t>(i) * c];
        S* grow = &g.data[static_cast<std::size_t>(i) * c];
        for (int j = 0; j < c; ++j) grow[j] += up * prow[j];
        grow[targets[static_cast<std::size_t>(i)]] -= up;
      }
    };
  }
  return result;
}

// Mean binary cross-entropy with logits over unmasked frame entries.
template <typename S>
Var<S> bce_with_logits(const Var<S>& logits, const Tensor<S>& targets,
                       const std::vector<std::uint8_t>& mask) {
  const int t = logits->value.rows();
  const int k = logits->value.cols();
  require<DimensionError>(targets.rows() == t && targets.cols() == k,
                          "bce: target shape mismatch");
  require<DimensionError>(static_cast<int>(mask.size()) == t, "bce: mask length mismatch");
  long n_valid = 0;
  for (std::uint8_t m : mask) n_valid += m ? 1 : 0;
  require<ValidationError>(n_valid > 0, "bce: fully masked batch");
  const long n_entries = n_valid * k;
  S loss = S(0);
  for (int i = 0; i < t; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    for (int j = 0; j < k; ++j) {
      S x = logits->value.data[static_cast<std::size_t>(i) * k + j];
      S y = targets.data[static_cast<std::size_t>(i) * k + j];
      // max(x,0) - x*y + log(1 + exp(-|x|))
      loss += std::max(x, S(0)) - x * y + std::log1p(std::exp(-std::abs(x)));
    }
  }
  Tensor<S> out({1});
  out.data[0] = loss / S(n_entries);
  Node<S>* ln = logits.get();
  auto result = make_op<S>(std::move(out), {logits}, nullptr);
  if (result->requires_grad) {
    Node<S>* on = result.get();
    result->backprop = [ln, on, targets, mask, t, k, n_entries]() {
      const S up = on->grad.data[0] / S(n_entries);
      auto& g = ln->grad_buffer();
      for (int i = 0; i < t; ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        for (int j = 0; j < k; ++j) {
          S x = ln->value.data[static_cast<std::size_t>(i) * k + j];
          S y = targets.data[static_cast<std::size_t>(i) * k + j];
          S sig = S(1) / (S(1) + std::exp(-x));
          g.data[static_cast<std::size_t>(i) * k + j] += up * (sig - y);
        }
      }
    };
  }
  return result;
}

}  // namespace vap
