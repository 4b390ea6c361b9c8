#include "vap/autodiff.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "vap/nn.hpp"
#include "vap/rng.hpp"

using namespace vap;

namespace {

using D = double;

// Test-only terminal op: fixed-weight sum to scalar.
Var<D> weighted_sum(const Var<D>& x, Tensor<D> w) {
  REQUIRE(w.numel() == x->value.numel());
  Tensor<D> out({1});
  for (std::size_t i = 0; i < w.data.size(); ++i) out.data[0] += x->value.data[i] * w.data[i];
  Node<D>* xn = x.get();
  auto r = make_op<D>(std::move(out), {x}, nullptr);
  if (r->requires_grad) {
    Node<D>* rn = r.get();
    r->backprop = [xn, rn, w = std::move(w)]() {
      auto& g = xn->grad_buffer();
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += rn->grad.data[0] * w.data[i];
    };
  }
  return r;
}

Tensor<D> random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  return uniform_tensor<D>(std::move(shape), -scale, scale, rng);
}

// Central-difference check of d(build())/d(param) for sampled coordinates.
void check_gradients(const std::vector<Var<D>>& params,
                     const std::function<Var<D>()>& build, double tol = 1e-5) {
  for (const auto& p : params) p->grad = Tensor<D>();
  Var<D> loss = build();
  backward(loss);
  Rng rng(1234);
  for (const auto& p : params) {
    REQUIRE(!p->grad.data.empty());
    int samples = std::min<long>(6, p->value.numel());
    for (int s = 0; s < samples; ++s) {
      std::size_t idx = rng.bits() % p->value.data.size();
      double orig = p->value.data[idx];
      double eps = 1e-5 * std::max(1.0, std::abs(orig));
      p->value.data[idx] = orig + eps;
      double up = build()->value.data[0];
      p->value.data[idx] = orig - eps;
      double dn = build()->value.data[0];
      p->value.data[idx] = orig;
      double fd = (up - dn) / (2 * eps);
      double ad = p->grad.data[idx];
      INFO("fd " << fd << " ad " << ad);
      REQUIRE(ad == Catch::Approx(fd).margin(1e-7).epsilon(tol));
    }
  }
}

}  // namespace

TEST_CASE("matmul forward matches naive and gradients check out") {
  Rng rng(1);
  auto a = make_parameter(random_tensor({3, 4}, rng));
  auto b = make_parameter(random_tensor({4, 5}, rng));
  Var<D> y = matmul(a, b);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) {
      double naive = 0;
      for (int k = 0; k < 4; ++k) naive += a->value.at(i, k) * b->value.at(k, j);
      REQUIRE(y->value.at(i, j) == Catch::Approx(naive).margin(1e-12));
    }
  Tensor<D> w = random_tensor({3, 5}, rng);
  check_gradients({a, b}, [&]() { return weighted_sum(matmul(a, b), w); });
}

TEST_CASE("matmul_nt, add, add_row, scale, relu gradients") {
  Rng rng(2);
  auto a = make_parameter(random_tensor({4, 6}, rng));
  auto b = make_parameter(random_tensor({3, 6}, rng));
  auto bias = make_parameter(random_tensor({3}, rng));
  Tensor<D> w = random_tensor({4, 3}, rng);
  check_gradients({a, b, bias}, [&]() {
    Var<D> y = matmul_nt(a, b);           // [4,3]
    y = add_row(y, bias);
    y = relu(scale(y, D(0.7)));
    return weighted_sum(add(y, y), w);
  });
}

TEST_CASE("slice and concat round-trip with gradients") {
  Rng rng(3);
  auto x = make_parameter(random_tensor({5, 8}, rng));
  Var<D> left = slice_cols(x, 0, 3);
  Var<D> right = slice_cols(x, 3, 5);
  Var<D> back = concat_cols<D>({left, right});
  REQUIRE(back->value.data == x->value.data);
  Tensor<D> w = random_tensor({5, 6}, rng);
  check_gradients({x}, [&]() {
    return weighted_sum(concat_cols<D>({slice_cols(x, 2, 4), slice_cols(x, 0, 2)}), w);
  });
}

TEST_CASE("layer_norm normalizes rows and gradients check out") {
  Rng rng(4);
  auto x = make_parameter(random_tensor({6, 10}, rng, 2.0));
  auto g = make_parameter(random_tensor({10}, rng));
  auto b = make_parameter(random_tensor({10}, rng));
  Var<D> y = layer_norm(x, g, b);
  // with unit gain / zero bias rows have mean 0, var 1
  auto unit_g = make_parameter(Tensor<D>({10}));
  unit_g->value.fill(1.0);
  auto zero_b = make_parameter(Tensor<D>({10}));
  Var<D> norm = layer_norm(x, unit_g, zero_b);
  for (int i = 0; i < 6; ++i) {
    double mean = 0, var = 0;
    for (int j = 0; j < 10; ++j) mean += norm->value.at(i, j);
    mean /= 10;
    for (int j = 0; j < 10; ++j) var += std::pow(norm->value.at(i, j) - mean, 2);
    var /= 10;
    REQUIRE(mean == Catch::Approx(0.0).margin(1e-9));
    REQUIRE(var == Catch::Approx(1.0).margin(1e-4));
  }
  Tensor<D> w = random_tensor({6, 10}, rng);
  check_gradients({x, g, b}, [&]() { return weighted_sum(layer_norm(x, g, b), w); });
}

TEST_CASE("causal_softmax masks the future and gradients check out") {
  Rng rng(5);
  auto s = make_parameter(random_tensor({6, 6}, rng, 2.0));
  Var<D> p = causal_softmax(s);
  for (int i = 0; i < 6; ++i) {
    double row_sum = 0;
    for (int j = 0; j < 6; ++j) {
      if (j > i) REQUIRE(p->value.at(i, j) == 0.0);
      row_sum += p->value.at(i, j);
    }
    REQUIRE(row_sum == Catch::Approx(1.0).margin(1e-12));
  }
  // perturbing a masked entry never changes output
  Tensor<D> before = p->value;
  s->value.at(0, 5) += 100.0;
  Tensor<D> after = causal_softmax(s)->value;
  REQUIRE(before.data == after.data);
  s->value.at(0, 5) -= 100.0;
  Tensor<D> w = random_tensor({6, 6}, rng);
  check_gradients({s}, [&]() { return weighted_sum(causal_softmax(s), w); });
}

TEST_CASE("conv1d_causal: shape, causality, gradients") {
  Rng rng(6);
  const int t_in = 40, c_in = 3, c_out = 5, kernel = 6, stride = 4;
  auto x = make_parameter(random_tensor({t_in, c_in}, rng));
  auto w = make_parameter(random_tensor({kernel * c_in, c_out}, rng));
  auto b = make_parameter(random_tensor({c_out}, rng));
  Var<D> y = conv1d_causal(x, w, b, kernel, stride);
  REQUIRE(y->value.rows() == t_in / stride);
  REQUIRE(y->value.cols() == c_out);

  // output frame t must not see inputs past (t+1)*stride - 1
  Tensor<D> base = y->value;
  x->value.at(2 * stride, 0) += 10.0;  // first sample of output frame 2
  Tensor<D> pert = conv1d_causal(x, w, b, kernel, stride)->value;
  for (int t = 0; t < 2; ++t)
    for (int c = 0; c < c_out; ++c) REQUIRE(pert.at(t, c) == base.at(t, c));
  REQUIRE(pert.at(2, 0) != base.at(2, 0));
  x->value.at(2 * stride, 0) -= 10.0;

  REQUIRE_THROWS_AS(conv1d_causal(x, w, b, kernel, 7), DimensionError);

  Tensor<D> wsum = random_tensor({t_in / stride, c_out}, rng);
  check_gradients({x, w, b},
                  [&]() { return weighted_sum(conv1d_causal(x, w, b, kernel, stride), wsum); });
}

TEST_CASE("conv2d shapes and gradients") {
  Rng rng(7);
  const int t = 3, c_in = 2, h = 9, wdt = 9, kernel = 3, stride = 2, c_out = 4;
  auto x = make_parameter(random_tensor({t, c_in * h * wdt}, rng));
  auto w = make_parameter(random_tensor({kernel * kernel * c_in, c_out}, rng));
  auto b = make_parameter(random_tensor({c_out}, rng));
  Var<D> y = conv2d(x, w, b, c_in, h, wdt, kernel, stride);
  const int oh = (h - kernel) / stride + 1;
  REQUIRE(y->value.rows() == t);
  REQUIRE(y->value.cols() == c_out * oh * oh);

  // naive convolution spot check at frame 1, channel 2, position (1,1)
  double naive = b->value.data[2];
  for (int c = 0; c < c_in; ++c)
    for (int ky = 0; ky < kernel; ++ky)
      for (int kx = 0; kx < kernel; ++kx)
        naive += x->value.data[static_cast<std::size_t>(1) * c_in * h * wdt + (c * h + stride + ky) * wdt +
                               stride + kx] *
                 w->value.at(c * kernel * kernel + ky * kernel + kx, 2);
  REQUIRE(y->value.data[static_cast<std::size_t>(1) * c_out * oh * oh + 2 * oh * oh + oh + 1] ==
          Catch::Approx(naive).margin(1e-10));

  Tensor<D> wsum = random_tensor({t, c_out * oh * oh}, rng);
  check_gradients({x, w, b}, [&]() {
    return weighted_sum(conv2d(x, w, b, c_in, h, wdt, kernel, stride), wsum);
  });
}

TEST_CASE("cross entropy: uniform logits give ln(C); gradients check out") {
  Rng rng(8);
  const int t = 12, c = 256;
  auto logits = make_parameter(Tensor<D>({t, c}));
  std::vector<int> targets(t);
  std::vector<std::uint8_t> mask(t, 1);
  for (int i = 0; i < t; ++i) targets[static_cast<std::size_t>(i)] = (i * 37) % c;
  Var<D> loss = softmax_cross_entropy(logits, targets, mask);
  REQUIRE(loss->value.data[0] == Catch::Approx(std::log(256.0)).margin(1e-12));

  auto hot = make_parameter(Tensor<D>({t, c}));
  for (int i = 0; i < t; ++i) hot->value.at(i, targets[static_cast<std::size_t>(i)]) = 60.0;
  REQUIRE(softmax_cross_entropy(hot, targets, mask)->value.data[0] ==
          Catch::Approx(0.0).margin(1e-12));

  mask.assign(t, 0);
  REQUIRE_THROWS_AS(softmax_cross_entropy(logits, targets, mask), ValidationError);
  mask.assign(t, 1);
  mask[3] = 0;

  logits->value = random_tensor({t, c}, rng);
  check_gradients({logits}, [&]() { return softmax_cross_entropy(logits, targets, mask); });
}

TEST_CASE("bce with logits matches analytic value and gradients") {
  Rng rng(9);
  const int t = 10, k = 2;
  auto logits = make_parameter(random_tensor({t, k}, rng, 2.0));
  Tensor<D> targets({t, k});
  for (auto& v : targets.data) v = rng.bernoulli(0.5) ? 1.0 : 0.0;
  std::vector<std::uint8_t> mask(t, 1);
  mask[0] = 0;
  Var<D> loss = bce_with_logits(logits, targets, mask);
  double expect = 0;
  int n = 0;
  for (int i = 0; i < t; ++i) {
    if (!mask[static_cast<std::size_t>(i)]) continue;
    for (int j = 0; j < k; ++j) {
      double x = logits->value.at(i, j), y = targets.at(i, j);
      double sig = 1.0 / (1.0 + std::exp(-x));
      expect -= y * std::log(sig) + (1 - y) * std::log(1 - sig);
      ++n;
    }
  }
  REQUIRE(loss->value.data[0] == Catch::Approx(expect / n).margin(1e-9));
  check_gradients({logits}, [&]() { return bce_with_logits(logits, targets, mask); });
}

TEST_CASE("transformer block end-to-end gradients") {
  Rng rng(10);
  TransformerBlock<D> block(8, 2, rng);
  auto x = make_parameter(random_tensor({7, 8}, rng));
  std::vector<ParamRef<D>> params;
  block.collect("blk", params);
  std::vector<Var<D>> vars{x};
  for (auto& p : params) vars.push_back(p.var);
  Tensor<D> w = random_tensor({7, 8}, rng);
  check_gradients(vars, [&]() { return weighted_sum(block.forward(add_positions(x)), w); },
                  1e-4);
}

TEST_CASE("cross attention block gradients and same-frame visibility") {
  Rng rng(11);
  CrossAttentionBlock<D> block(8, 2, rng);
  auto a = make_parameter(random_tensor({6, 8}, rng));
  auto b = make_parameter(random_tensor({6, 8}, rng));
  std::vector<ParamRef<D>> params;
  block.collect("x", params);
  std::vector<Var<D>> vars{a, b};
  for (auto& p : params) vars.push_back(p.var);
  Tensor<D> w = random_tensor({6, 8}, rng);
  check_gradients(vars, [&]() { return weighted_sum(block.forward(a, b), w); }, 1e-4);

  // future frames of the kv stream never leak into past outputs
  Tensor<D> base = block.forward(a, b)->value;
  b->value.at(5, 3) += 50.0;
  Tensor<D> pert = block.forward(a, b)->value;
  for (int t = 0; t < 5; ++t)
    for (int j = 0; j < 8; ++j) REQUIRE(pert.at(t, j) == base.at(t, j));
}

TEST_CASE("backward accumulates across calls until grads are cleared") {
  Rng rng(12);
  auto x = make_parameter(random_tensor({2, 2}, rng));
  Tensor<D> w({2, 2});
  w.fill(1.0);
  Var<D> l1 = weighted_sum(scale(x, D(2)), w);
  backward(l1);
  Tensor<D> g1 = x->grad;
  Var<D> l2 = weighted_sum(scale(x, D(2)), w);
  backward(l2);
  for (std::size_t i = 0; i < g1.data.size(); ++i)
    REQUIRE(x->grad.data[i] == Catch::Approx(2 * g1.data[i]));
}

TEST_CASE("NoGradGuard suppresses graph recording") {
  Rng rng(13);
  auto x = make_parameter(random_tensor({3, 3}, rng));
  NoGradGuard guard;
  Var<D> y = relu(matmul(x, x));
  REQUIRE_FALSE(y->requires_grad);
  REQUIRE(y->parents.empty());
}
