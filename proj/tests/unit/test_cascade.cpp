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

#include <filesystem>
#include <fstream>
#include <thread>

#include "slu/cascade.hpp"
#include "slu/error.hpp"
#include "test_util.hpp"

namespace slu {
namespace {

namespace fs = std::filesystem;
using testing::random_tensor;

CascadeDims tiny_dims(std::size_t subsample = 1) {
  CascadeDims d;
  d.feat_dim = 5;
  d.conv = {{3, 8}, {2, 6}};
  d.conv_activation = Activation::kTanh;
  d.num_phones = 7;
  d.word_hidden = 6;
  d.word_layers = 2;
  d.vocab_size = 9;
  d.intent_hidden = 5;
  d.intent_layers = 2;
  d.num_intents = 4;
  d.subsample = subsample;
  return d;
}

Tensor prefix(const Tensor& x, std::size_t n) {
  Tensor out({n, x.cols()});
  std::copy(x.data().begin(), x.data().begin() + static_cast<std::ptrdiff_t>(n * x.cols()),
            out.data().begin());
  return out;
}

TEST(Dims, Validation) {
  EXPECT_NO_THROW(CascadeDims{}.validate());
  EXPECT_EQ(tiny_dims().receptive_field(), 4u);
  CascadeDims d = tiny_dims();
  d.subsample = 0;
  EXPECT_THROW(d.validate(), ConfigError);
  d = tiny_dims();
  d.conv.clear();
  EXPECT_THROW(d.validate(), ConfigError);
  d = tiny_dims();
  d.vocab_size = 1;
  EXPECT_THROW(d.validate(), ConfigError);
}

TEST(Cascade, InitShapesAndStreams) {
  const auto p = CascadeParams::init(tiny_dims(), 3);
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(p.theta_p.proj.w.value.dims(), (Shape{7, 6}));
  EXPECT_EQ(p.theta_w.lstm.size(), 2u);
  EXPECT_EQ(p.theta_w.lstm[0].input_dim, 6u);
  EXPECT_EQ(p.theta_w.proj.w.value.dims(), (Shape{9, 6}));
  EXPECT_EQ(p.theta_u.lstm[0].input_dim, 6u);
  EXPECT_EQ(p.theta_u.proj.w.value.dims(), (Shape{4, 5}));
  // Changing the word module leaves the other modules' initial values alone.
  CascadeDims wider = tiny_dims();
  wider.word_hidden = 7;
  const auto q = CascadeParams::init(wider, 3);
  EXPECT_EQ(p.theta_p.proj.w.value, q.theta_p.proj.w.value);
  EXPECT_TRUE(params_equal(p, CascadeParams::init(tiny_dims(), 3)));
  EXPECT_FALSE(params_equal(p, CascadeParams::init(tiny_dims(), 4)));
}

TEST(Cascade, ForwardShapesAndNormalisation) {
  const auto p = CascadeParams::init(tiny_dims(2), 1);
  const Tensor x = random_tensor({9, 5}, 2);
  const auto out = cascade_forward(p, x);
  EXPECT_EQ(out.phoneme.logits.dims(), (Shape{9, 7}));
  EXPECT_EQ(out.word.log_probs.dims(), (Shape{5, 9}));
  EXPECT_EQ(out.intent_logits.dims(), (Shape{4}));
  for (std::size_t t = 0; t < 5; ++t) {
    double s = 0.0;
    for (double v : out.word.log_probs.row(t)) s += std::exp(v);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_EQ(subsample_rows(x, 3).rows(), 3u);
  EXPECT_THROW(cascade_forward(p, random_tensor({4, 6}, 1)), ShapeError);
}

TEST(Cascade, GraphMatchesNumeric) {
  auto p = CascadeParams::init(tiny_dims(2), 5);
  const Tensor x = random_tensor({11, 5}, 6);
  const auto want = cascade_forward(p, x);
  Graph g;
  const auto got = cascade_forward(g, p, g.constant(x), GraphOptions{});
  EXPECT_EQ(got.phoneme.logits.value(), want.phoneme.logits);
  EXPECT_EQ(got.word.log_probs.value(), want.word.log_probs);
  EXPECT_EQ(got.intent_logits.value().storage(), want.intent_logits.storage());
}

class Streaming : public ::testing::TestWithParam<std::size_t> {};

TEST_P(Streaming, EqualsBatchAtEveryPrefix) {
  const std::size_t k = GetParam();
  const auto p = CascadeParams::init(tiny_dims(k), 7);
  const CascadeRuntime rt(p);
  StreamingSession s(rt);
  const Tensor x = random_tensor({13, 5}, 8);
  const auto full = cascade_forward(p, x);
  for (std::size_t t = 0; t < 13; ++t) {
    const StreamOutput out = stream_push(s, x.row(t));
    EXPECT_EQ(out.frame, t);
    const auto ref = cascade_forward(p, prefix(x, t + 1));
    ASSERT_EQ(out.phone_logits, std::vector<double>(full.phoneme.logits.row(t).begin(),
                                                    full.phoneme.logits.row(t).end()));
    ASSERT_EQ(out.wp_log_probs.has_value(), t % k == 0);
    if (out.wp_log_probs) {
      const auto row = full.word.log_probs.row(t / k);
      ASSERT_EQ(*out.wp_log_probs, std::vector<double>(row.begin(), row.end()));
    }
    ASSERT_EQ(out.intent_logits, ref.intent_logits.storage());
  }
  EXPECT_EQ(s.frames_seen(), 13u);
  s.reset();
  EXPECT_EQ(s.frames_seen(), 0u);
  EXPECT_EQ(stream_push(s, x.row(0)).phone_logits,
            std::vector<double>(full.phoneme.logits.row(0).begin(), full.phoneme.logits.row(0).end()));
  EXPECT_THROW(s.push(std::vector<double>(4)), ShapeError);
}

INSTANTIATE_TEST_SUITE_P(Subsample, Streaming, ::testing::Values(1u, 2u, 3u));

// Sessions sharing one runtime on different threads, each fed its own
// input, match single-threaded batch passes.
TEST(Streaming, ConcurrentSessionsDoNotInteract) {
  const auto p = CascadeParams::init(tiny_dims(2), 3);
  const CascadeRuntime rt(p);
  constexpr std::size_t kSessions = 4;
  std::vector<Tensor> inputs;
  for (std::size_t i = 0; i < kSessions; ++i) inputs.push_back(random_tensor({40, 5}, 100 + i));
  std::vector<std::vector<double>> got(kSessions);
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < kSessions; ++i)
    threads.emplace_back([&, i] {
      StreamingSession s(rt);
      for (int rep = 0; rep < 2; ++rep) {
        s.reset();
        for (std::size_t t = 0; t < inputs[i].rows(); ++t) {
          const auto out = s.push(inputs[i].row(t));
          if (t + 1 == inputs[i].rows()) got[i] = out.intent_logits;
        }
      }
    });
  for (auto& t : threads) t.join();
  for (std::size_t i = 0; i < kSessions; ++i)
    EXPECT_EQ(got[i], cascade_forward(p, inputs[i]).intent_logits.storage()) << i;
}

TEST(Checkpoint, RoundTripAndErrors) {
  const auto dir = fs::temp_directory_path() / "slu_ckpt_test";
  fs::create_directories(dir);
  const auto p = CascadeParams::init(tiny_dims(2), 9);
  save_checkpoint(p, dir / "a.ckpt");
  const auto q = load_checkpoint(dir / "a.ckpt");
  EXPECT_EQ(q.dims, p.dims);
  EXPECT_TRUE(params_equal(p, q));

  // The reloaded model decodes identically.
  const Tensor x = random_tensor({11, 5}, 4);
  const auto a = cascade_forward(p, x), b = cascade_forward(q, x);
  EXPECT_EQ(a.word.log_probs, b.word.log_probs);
  EXPECT_EQ(a.intent_logits, b.intent_logits);

  EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), IoError);
  {
    std::ofstream os(dir / "bad.ckpt", std::ios::binary);
    os << "NOPE0000";
  }
  EXPECT_THROW(load_checkpoint(dir / "bad.ckpt"), FormatError);
  fs::copy_file(dir / "a.ckpt", dir / "short.ckpt", fs::copy_options::overwrite_existing);
  fs::resize_file(dir / "short.ckpt", fs::file_size(dir / "a.ckpt") / 2);
  EXPECT_THROW(load_checkpoint(dir / "short.ckpt"), IoError);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace slu
