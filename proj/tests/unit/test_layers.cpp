// Copyright 2026 The slu-cascade Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "slu/error.hpp"
#include "slu/grad_check.hpp"
#include "slu/layers.hpp"
#include "test_util.hpp"

namespace slu {
namespace {

using testing::random_tensor;

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar-loop LSTM step, written independently of the kernels.
std::pair<std::vector<double>, std::vector<double>> reference_step(
    const LstmLayerParams& p, const std::vector<double>& x, const std::vector<double>& h,
    const std::vector<double>& c) {
  const std::size_t n = p.hidden_dim;
  std::vector<double> pre(4 * n);
  for (std::size_t r = 0; r < 4 * n; ++r) {
    double s = p.b.value[r];
    for (std::size_t k = 0; k < x.size(); ++k) s += p.w.value.at(r, k) * x[k];
    for (std::size_t k = 0; k < n; ++k) s += p.u.value.at(r, k) * h[k];
    pre[r] = s;
  }
  std::vector<double> h2(n), c2(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double i = sig(pre[j]), f = sig(pre[n + j]), g = std::tanh(pre[2 * n + j]),
                 o = sig(pre[3 * n + j]);
    c2[j] = f * c[j] + i * g;
    h2[j] = o * std::tanh(c2[j]);
  }
  return {h2, c2};
}

LstmLayerParams random_lstm(std::size_t in, std::size_t hidden, std::uint64_t seed) {
  Rng rng(seed);
  auto p = LstmLayerParams::init("l", in, hidden, rng);
  for (double& v : p.b.value.data()) v = rng.uniform(-0.5, 0.5);
  return p;
}

TEST(Lstm, InitShapesAndForgetBias) {
  Rng rng(1);
  const auto p = LstmLayerParams::init("l", 5, 3, rng);
  EXPECT_EQ(p.w.value.dims(), (Shape{12, 5}));
  EXPECT_EQ(p.u.value.dims(), (Shape{12, 3}));
  for (std::size_t j = 0; j < 12; ++j) EXPECT_EQ(p.b.value[j], (j >= 3 && j < 6) ? 1.0 : 0.0);
  EXPECT_NO_THROW(p.validate());
}

TEST(Lstm, ZeroWeightsGiveZeroOutput) {
  Rng rng(1);
  auto p = LstmLayerParams::init("l", 4, 3, rng);
  p.w.value.fill(0);
  p.u.value.fill(0);
  p.b.value.fill(0);
  const auto s = lstm_step(p, std::vector<double>{1, -2, 3, 4}, LstmState::zeros(3));
  for (double v : s.h.data()) EXPECT_EQ(v, 0.0);
  // Saturated output gate with a zero candidate still yields zero.
  for (std::size_t j = 9; j < 12; ++j) p.b.value[j] = 50.0;
  const auto t = lstm_step(p, std::vector<double>(4, 0.0), LstmState::zeros(3));
  for (double v : t.h.data()) EXPECT_EQ(v, 0.0);
}

TEST(Lstm, StepMatchesScalarReference) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = random_lstm(5, 4, seed);
    Rng rng(seed + 50);
    LstmState s = LstmState::zeros(4);
    std::vector<double> h(4, 0.0), c(4, 0.0);
    for (int t = 0; t < 6; ++t) {
      std::vector<double> x(5);
      for (double& v : x) v = rng.uniform(-1, 1);
      s = lstm_step(p, x, s);
      std::tie(h, c) = reference_step(p, x, h, c);
      for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_NEAR(s.h[j], h[j], 1e-13);
        EXPECT_NEAR(s.c[j], c[j], 1e-13);
      }
    }
  }
}

TEST(Lstm, StackT1IsComposedSteps) {
  const std::vector<LstmLayerParams> stack{random_lstm(3, 4, 1), random_lstm(4, 2, 2)};
  const Tensor x = random_tensor({1, 3}, 9);
  const auto s1 = lstm_step(stack[0], x.row(0), LstmState::zeros(4));
  const auto s2 = lstm_step(stack[1], s1.h.data(), LstmState::zeros(2));
  const Tensor out = lstm_stack_forward(stack, x);
  EXPECT_EQ(std::vector<double>(out.data().begin(), out.data().end()), s2.h.storage());
}

TEST(Lstm, GraphMatchesNumericAndDropoutZeroIsNoop) {
  std::vector<LstmLayerParams> stack{random_lstm(3, 4, 1), random_lstm(4, 4, 2)};
  const Tensor x = random_tensor({7, 3}, 9);
  const Tensor want = lstm_stack_forward(stack, x);
  Graph g;
  EXPECT_EQ(lstm_stack_forward(g, stack, g.constant(x), 0.0, true, 5, true).value(), want);
  EXPECT_EQ(lstm_stack_forward(g, stack, g.constant(x), 0.0, false, 5, true).value(), want);
}

TEST(Lstm, PrefixProperty) {
  const std::vector<LstmLayerParams> stack{random_lstm(3, 5, 4), random_lstm(5, 5, 5)};
  const Tensor x = random_tensor({8, 3}, 2);
  const Tensor a = lstm_stack_forward(stack, x);
  for (std::size_t t = 0; t + 1 < 8; ++t) {
    Tensor y = x;
    for (std::size_t r = t + 1; r < 8; ++r)
      for (double& v : y.row(r)) v += 0.7;
    const Tensor b = lstm_stack_forward(stack, y);
    for (std::size_t r = 0; r <= t; ++r)
      for (std::size_t j = 0; j < 5; ++j) ASSERT_EQ(a.at(r, j), b.at(r, j));
  }
}

TEST(Lstm, StepInputShapeError) {
  const auto p = random_lstm(3, 2, 1);
  EXPECT_THROW(lstm_step(p, std::vector<double>(4), LstmState::zeros(2)), ShapeError);
}

TEST(Linear, IdentityZeroAndOracle) {
  Tensor eye({3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i) = 1;
  const Tensor x = random_tensor({4, 3}, 1);
  EXPECT_EQ(linear_forward(eye, Tensor({3}), x), x);
  const Tensor w = random_tensor({2, 3}, 2);
  const Tensor b = random_tensor({2}, 3);
  const Tensor y0 = linear_forward(w, b, Tensor({1, 3}));
  EXPECT_EQ(std::vector<double>(y0.data().begin(), y0.data().end()), b.storage());
  const Tensor y = linear_forward(w, b, x);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t o = 0; o < 2; ++o) {
      double s = b[o];
      for (std::size_t k = 0; k < 3; ++k) s += w.at(o, k) * x.at(r, k);
      EXPECT_NEAR(y.at(r, o), s, 1e-14);
    }
}

CausalConvParams random_conv(std::vector<std::pair<std::size_t, std::size_t>> widths,
                             std::size_t in, std::uint64_t seed,
                             Activation act = Activation::kTanh) {
  Rng rng(seed);
  auto p = CausalConvParams::init("c", in, widths, act, rng);
  for (auto& l : p.layers)
    for (double& v : l.b.value.data()) v = rng.uniform(-0.3, 0.3);
  return p;
}

TEST(CausalConv, ReceptiveField) {
  EXPECT_EQ(random_conv({{3, 4}, {3, 4}}, 2, 1).receptive_field(), 5u);
  EXPECT_EQ(random_conv({{1, 4}}, 2, 1).receptive_field(), 1u);
}

TEST(CausalConv, WidthOneIsFrameWise) {
  const auto p = random_conv({{1, 4}, {1, 3}}, 2, 1);
  const Tensor x = random_tensor({5, 2}, 3);
  const Tensor y = causal_conv_forward(p, x);
  Tensor rev({5, 2});
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t d = 0; d < 2; ++d) rev.at(4 - t, d) = x.at(t, d);
  const Tensor yr = causal_conv_forward(p, rev);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t d = 0; d < 3; ++d) EXPECT_EQ(y.at(t, d), yr.at(4 - t, d));
}

TEST(CausalConv, ImpulseOnlyAffectsLaterFrames) {
  const auto p = random_conv({{3, 4}, {2, 3}}, 2, 2);
  const Tensor base = causal_conv_forward(p, Tensor({8, 2}));
  Tensor x({8, 2});
  x.at(4, 1) = 1.0;
  const Tensor y = causal_conv_forward(p, x);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t d = 0; d < 3; ++d) EXPECT_EQ(y.at(t, d), base.at(t, d));
  bool changed = false;
  for (std::size_t d = 0; d < 3; ++d) changed |= y.at(4, d) != base.at(4, d);
  EXPECT_TRUE(changed);
}

TEST(CausalConv, MatchesSlidingWindowOracle) {
  const auto p = random_conv({{3, 4}, {2, 3}}, 2, 7);
  const Tensor x = random_tensor({6, 2}, 8);
  Tensor cur = x;
  for (const auto& l : p.layers) {
    Tensor next({cur.rows(), l.out_dim});
    for (std::size_t t = 0; t < cur.rows(); ++t)
      for (std::size_t o = 0; o < l.out_dim; ++o) {
        double s = l.b.value[o];
        for (std::size_t k = 0; k < l.width; ++k) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) -
                                     static_cast<std::ptrdiff_t>(l.width - 1);
          if (src < 0) continue;
          for (std::size_t d = 0; d < l.in_dim; ++d)
            s += l.w.value.at(o, k * l.in_dim + d) * cur.at(static_cast<std::size_t>(src), d);
        }
        next.at(t, o) = std::tanh(s);
      }
    cur = next;
  }
  const Tensor y = causal_conv_forward(p, x);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], cur[i], 1e-13);
}

TEST(DropoutForward, IdentityDeterminismAndMean) {
  const Tensor x = random_tensor({4, 4}, 1);
  EXPECT_EQ(dropout_forward(x, 0.0, 3), x);
  EXPECT_EQ(dropout_forward(x, 0.5, 3), dropout_forward(x, 0.5, 3));
  const Tensor ones({100, 100}, 1.0);
  double total = 0.0;
  const Tensor d = dropout_forward(ones, 0.5, 11);
  for (double v : d.data()) total += v;
  EXPECT_NEAR(total / 1e4, 1.0, 0.02);
}

// Layer gradients, 20 seeds each.
class LayerGradient : public ::testing::TestWithParam<int> {};

TEST_P(LayerGradient, LstmStep) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  auto p = random_lstm(3, 4, seed);
  const Tensor x = random_tensor({1, 3}, seed + 1);
  const Tensor h0 = random_tensor({1, 4}, seed + 2, 0.5);
  const Tensor c0 = random_tensor({1, 4}, seed + 3, 0.5);
  const Tensor w = random_tensor({2, 4}, seed + 4);
  auto loss = [&](Graph& g, Var xv) {
    LstmBinding b = bind(g, p, true);
    const auto s = lstm_step(b, ad::matmul(xv, b.wt), g.constant(h0), g.constant(c0));
    const Var hc[] = {s.h, s.c};
    return ad::sum(ad::mul(ad::stack_rows(hc), g.constant(w)));
  };
  EXPECT_LE(grad_check(loss, x), 1e-4);
  auto params = parameters(p);
  EXPECT_LE(grad_check_params([&](Graph& g) { return loss(g, g.constant(x)); }, params), 1e-4);
}

TEST_P(LayerGradient, LstmStack) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  std::vector<LstmLayerParams> stack{random_lstm(3, 4, seed), random_lstm(4, 3, seed + 7)};
  const Tensor x = random_tensor({5, 3}, seed + 1);
  const Tensor w = random_tensor({5, 3}, seed + 2);
  auto loss = [&](Graph& g, Var xv) {
    Var y = lstm_stack_forward(g, stack, xv, 0.2, true, seed, true);
    return ad::sum(ad::mul(y, g.constant(w)));
  };
  EXPECT_LE(grad_check(loss, x), 1e-4);
  std::vector<Parameter*> params;
  for (auto& l : stack)
    for (auto* q : parameters(l)) params.push_back(q);
  EXPECT_LE(grad_check_params([&](Graph& g) { return loss(g, g.constant(x)); }, params), 1e-4);
}

TEST_P(LayerGradient, Linear) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  Rng rng(seed);
  auto p = LinearParams::init("lin", 4, 3, rng);
  const Tensor x = random_tensor({2, 4}, seed + 1);
  auto loss = [&](Graph& g, Var xv) { return ad::sum(ad::tanh(linear_forward(g, p, xv, true))); };
  EXPECT_LE(grad_check(loss, x), 1e-4);
  auto params = parameters(p);
  EXPECT_LE(grad_check_params([&](Graph& g) { return loss(g, g.constant(x)); }, params), 1e-4);
}

TEST_P(LayerGradient, CausalConv) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  auto p = random_conv({{3, 4}, {2, 3}}, 2, seed);
  const Tensor x = random_tensor({6, 2}, seed + 1);
  const Tensor w = random_tensor({6, 3}, seed + 2);
  auto loss = [&](Graph& g, Var xv) {
    return ad::sum(ad::mul(causal_conv_forward(g, p, xv, true), g.constant(w)));
  };
  EXPECT_LE(grad_check(loss, x), 1e-4);
  auto params = parameters(p);
  EXPECT_LE(grad_check_params([&](Graph& g) { return loss(g, g.constant(x)); }, params), 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Seeds, LayerGradient, ::testing::Range(0, 20));

}  // namespace
}  // namespace slu
