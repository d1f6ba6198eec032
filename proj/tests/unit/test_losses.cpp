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

#include <chrono>
#include <cmath>

#include "slu/error.hpp"
#include "slu/grad_check.hpp"
#include "slu/losses.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace slu {
namespace {

using testing::random_log_probs;
using testing::random_tensor;

Tensor uniform_log_probs(std::size_t t, std::size_t c) {
  return Tensor({t, c}, std::log(1.0 / static_cast<double>(c)));
}

using testing::random_feasible_label;

TEST(CtcLabel, Validation) {
  EXPECT_THROW((CtcLabelSequence{{}, 0}.validate()), ContractError);
  EXPECT_THROW((CtcLabelSequence{{1, 0}, 0}.validate()), ContractError);
  EXPECT_EQ((CtcLabelSequence{{1, 1, 2}, 0}.min_frames()), 4u);
}

TEST(Ctc, SingleAlignmentCases) {
  const CtcLabelSequence a{{1}, 0};
  EXPECT_NEAR(ctc_loss(uniform_log_probs(1, 3), a), std::log(3.0), 1e-12);
  EXPECT_NEAR(ctc_loss(uniform_log_probs(2, 3), a), std::log(3.0), 1e-12);
  EXPECT_NEAR(ctc_loss_bruteforce(uniform_log_probs(1, 3), a), std::log(3.0), 1e-12);
  EXPECT_NEAR(ctc_loss_bruteforce(uniform_log_probs(2, 3), a), std::log(3.0), 1e-12);
}

// Paths of length 3 over {blank, a, b} that collapse to "a": one contiguous
// run of a's surrounded by blanks, 3 + 2 + 1 of them.
TEST(Ctc, ThreeFrameEnumeration) {
  int count = 0;
  for (int p = 0; p < 27; ++p) {
    const int s[3] = {p / 9, (p / 3) % 3, p % 3};
    std::vector<int> collapsed;
    int prev = -1;
    for (int v : s) {
      if (v != prev && v != 0) collapsed.push_back(v);
      prev = v;
    }
    count += collapsed == std::vector<int>{1};
  }
  EXPECT_EQ(count, 6);
  const CtcLabelSequence a{{1}, 0};
  EXPECT_NEAR(ctc_loss_bruteforce(uniform_log_probs(3, 3), a), -std::log(count / 27.0), 1e-12);
  EXPECT_NEAR(ctc_loss(uniform_log_probs(3, 3), a), -std::log(count / 27.0), 1e-12);
}

TEST(Ctc, AgreesWithBruteForceOn200Instances) {
  Rng rng(2024);
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 200; ++i) {
    const auto t = static_cast<std::size_t>(rng.integer(1, 6));
    const auto c = static_cast<std::size_t>(rng.integer(2, 5));
    const Tensor lp = random_log_probs(t, c, rng);
    CtcLabelSequence l;
    for (;;) {
      l = random_feasible_label(6, c, rng);
      if (l.min_frames() <= t) break;
    }
    ASSERT_NEAR(ctc_loss(lp, l), ctc_loss_bruteforce(lp, l), 1e-9) << "instance " << i;
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 10.0);
}

TEST(Ctc, InfeasibleLabel) {
  const CtcLabelSequence l{{1, 1}, 0};
  EXPECT_THROW(ctc_loss(uniform_log_probs(2, 3), l), InfeasibleLabelError);
  EXPECT_TRUE(std::isinf(ctc_loss_bruteforce(uniform_log_probs(2, 3), l)));
  EXPECT_NO_THROW(ctc_loss(uniform_log_probs(3, 3), l));
}

TEST(Ctc, GraphAndNumericAgree) {
  Rng rng(3);
  const Tensor lp = random_log_probs(9, 5, rng);
  const CtcLabelSequence l{{1, 3, 3, 2}, 0};
  Graph g;
  EXPECT_EQ(ctc_loss(g.constant(lp), l).value().item(), ctc_loss(lp, l));
}

TEST(FrameCe, Cases) {
  Graph g;
  const std::size_t align[] = {0, 2, 1};
  EXPECT_NEAR(frame_ce_loss(g.constant(Tensor({3, 4})), align).value().item(), std::log(4.0), 1e-14);
  Tensor sharp({3, 4});
  for (std::size_t t = 0; t < 3; ++t) sharp.at(t, align[t]) = 60.0;
  EXPECT_LT(frame_ce_loss(g.constant(sharp), align).value().item(), 1e-20);
  const Tensor logits = random_tensor({3, 4}, 8, 3.0);
  double want = 0.0;
  for (std::size_t t = 0; t < 3; ++t) {
    double z = 0.0;
    for (double v : logits.row(t)) z += std::exp(v);
    want += std::log(z) - logits.at(t, align[t]);
  }
  EXPECT_NEAR(frame_ce_loss(g.constant(logits), align).value().item(), want / 3.0, 1e-13);
  const std::size_t short_align[] = {0, 1};
  EXPECT_THROW(frame_ce_loss(g.constant(logits), short_align), ContractError);
}

TEST(IntentCe, Cases) {
  Graph g;
  EXPECT_NEAR(intent_ce_loss(g.constant(Tensor({31})), 4).value().item(), std::log(31.0), 1e-14);
  EXPECT_NEAR(std::log(31.0), 3.4340, 1e-4);
  Tensor sharp({31});
  sharp[7] = 100.0;
  EXPECT_LT(intent_ce_loss(g.constant(sharp), 7).value().item(), 1e-40);
  const Tensor logits = random_tensor({5}, 9, 2.0);
  double z = 0.0;
  for (double v : logits.data()) z += std::exp(v);
  EXPECT_NEAR(intent_ce_loss(g.constant(logits), 2).value().item(), std::log(z) - logits[2], 1e-14);
  EXPECT_THROW(intent_ce_loss(g.constant(logits), 5), ContractError);
}

TEST(Mtl, WeightIdentities) {
  EXPECT_THROW(MtlWeight(-0.1), ContractError);
  EXPECT_THROW(MtlWeight(1.5), ContractError);
  EXPECT_EQ(mtl_loss(2.0, 1.0, MtlWeight(1.0)), 2.0);
  EXPECT_EQ(mtl_loss(2.0, 1.0, MtlWeight(0.0)), 1.0);
  EXPECT_NEAR(mtl_loss(2.0, 1.0, MtlWeight(0.6)), 1.6, 1e-12);
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const double lu = rng.uniform(0, 10), lw = rng.uniform(0, 100);
    EXPECT_EQ(mtl_loss(lu, lw, MtlWeight(1.0)), lu);
    EXPECT_EQ(mtl_loss(lu, lw, MtlWeight(0.0)), lw);
    EXPECT_NEAR(mtl_loss(lu, lw, MtlWeight(0.6)), 0.6 * lu + 0.4 * lw, 1e-12);
    Graph g;
    EXPECT_EQ(mtl_loss(g.constant(Tensor::scalar(lu)), g.constant(Tensor::scalar(lw)), MtlWeight(0.6))
                  .value()
                  .item(),
              mtl_loss(lu, lw, MtlWeight(0.6)));
  }
}

class LossGradient : public ::testing::TestWithParam<int> {};

TEST_P(LossGradient, FrameCe) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  const std::size_t align[] = {1, 0, 3, 3};
  EXPECT_LE(grad_check([&](Graph&, Var v) { return frame_ce_loss(v, align); },
                       random_tensor({4, 5}, seed, 2.0)),
            1e-4);
}

TEST_P(LossGradient, Ctc) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  Rng rng(seed);
  const CtcLabelSequence l = random_feasible_label(6, 4, rng);
  // Through log_softmax so the input is unconstrained logits.
  EXPECT_LE(grad_check([&](Graph&, Var v) { return ctc_loss(ad::log_softmax(v), l); },
                       random_tensor({6, 4}, rng, 2.0)),
            1e-4);
}

TEST_P(LossGradient, IntentCe) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  EXPECT_LE(grad_check([&](Graph&, Var v) { return intent_ce_loss(v, seed % 7); },
                       random_tensor({7}, seed, 2.0)),
            1e-4);
}

TEST_P(LossGradient, Mtl) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  const CtcLabelSequence l{{2, 1}, 0};
  for (double alpha : {0.0, 0.6, 1.0}) {
    auto f = [&](Graph&, Var v) {
      Var lu = intent_ce_loss(ad::row(v, 0), 1);
      Var lw = ctc_loss(ad::log_softmax(v), l);
      return mtl_loss(lu, lw, MtlWeight(alpha));
    };
    EXPECT_LE(grad_check(f, random_tensor({4, 3}, seed, 2.0)), 1e-4);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, LossGradient, ::testing::Range(0, 20));

// With alpha at an endpoint, the other branch contributes exactly zero.
TEST(Mtl, EndpointGradientsVanish) {
  const CtcLabelSequence l{{2, 1}, 0};
  const Tensor x = random_tensor({4, 3}, 1);
  for (double alpha : {0.0, 1.0}) {
    Graph g;
    Var a = g.variable(x);
    Var b = g.variable(x);
    Var loss = mtl_loss(intent_ce_loss(ad::row(a, 0), 1), ctc_loss(ad::log_softmax(b), l),
                        MtlWeight(alpha));
    g.backward(loss);
    const auto zero_side = alpha == 0.0 ? g.grad(a) : g.grad(b);
    for (double v : zero_side) EXPECT_EQ(v, 0.0);
  }
}

}  // namespace
}  // namespace slu
