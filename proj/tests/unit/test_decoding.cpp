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

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "slu/decoding.hpp"
#include "slu/error.hpp"
#include "slu/kernels.hpp"
#include "slu/losses.hpp"
#include "oracles.hpp"
#include "test_util.hpp"
#include "tiny_setup.hpp"

namespace slu {
namespace {

using testing::random_log_probs;

// Log-probabilities whose per-frame argmax is the given id.
Tensor peaked(const std::vector<std::size_t>& ids, std::size_t classes) {
  Tensor x({ids.size(), classes}, std::log(0.1 / static_cast<double>(classes - 1)));
  for (std::size_t t = 0; t < ids.size(); ++t) x.at(t, ids[t]) = std::log(0.9);
  return x;
}

TEST(Greedy, CollapseRule) {
  EXPECT_EQ(greedy_ctc_decode(peaked({1, 1, 0, 1}, 3)), (WordpieceSequence{1, 1}));
  EXPECT_TRUE(greedy_ctc_decode(peaked({0, 0, 0}, 3)).empty());
  EXPECT_EQ(greedy_ctc_decode(peaked({0, 2, 2, 0, 2}, 3)), (WordpieceSequence{2, 2}));
  EXPECT_EQ(greedy_ctc_decode(peaked({1, 2, 2, 1}, 3)), (WordpieceSequence{1, 2, 1}));
}

TEST(Greedy, NeverEmitsBlankOrUnseparatedRepeats) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const Tensor lp = random_log_probs(12, 4, rng);
    const auto out = greedy_ctc_decode(lp);
    for (auto t : out) EXPECT_NE(t, 0u);
    // Each emitted token starts a new run of frame argmaxes.
    std::vector<std::size_t> runs;
    std::size_t prev = 0;
    for (std::size_t t = 0; t < 12; ++t) {
      const std::size_t a = argmax(lp.row(t));
      if (a != 0 && a != prev) runs.push_back(a);
      prev = a;
    }
    EXPECT_EQ(out, runs);
  }
}

TEST(Beam, ExhaustiveBeamMatchesBruteForce) {
  Rng rng(77);
  for (int i = 0; i < 200; ++i) {
    const auto t = static_cast<std::size_t>(rng.integer(1, 4));
    const auto c = static_cast<std::size_t>(rng.integer(2, 4));
    const Tensor lp = random_log_probs(t, c, rng);
    const auto want = testing::brute_force_nbest(lp);
    const std::size_t n = std::min<std::size_t>(want.size(), 5);
    const auto got = beam_nbest_decode(lp, 1000, n);
    ASSERT_EQ(got.size(), n);
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_NEAR(got[k].log_prob, want[k].log_prob, 1e-9);
      // Ties in probability may swap order; compare probability of the sequence.
      auto it = std::find_if(want.begin(), want.end(),
                             [&](const Hypothesis& h) { return h.tokens == got[k].tokens; });
      ASSERT_NE(it, want.end());
      EXPECT_NEAR(it->log_prob, got[k].log_prob, 1e-9);
    }
    double mass = 0.0;
    for (const auto& h : want) mass += std::exp(h.log_prob);
    EXPECT_LE(mass, 1.0 + 1e-9);
    EXPECT_EQ(beam_nbest_decode(lp, 1000, 1)[0].tokens, want[0].tokens);
  }
}

TEST(Beam, SortedBlankFreeAndChecked) {
  Rng rng(3);
  const Tensor lp = random_log_probs(20, 6, rng);
  const auto hyps = beam_nbest_decode(lp, 8, 4);
  ASSERT_EQ(hyps.size(), 4u);
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    EXPECT_LE(hyps[i].log_prob, 0.0);
    for (auto t : hyps[i].tokens) EXPECT_NE(t, 0u);
    if (i) EXPECT_LE(hyps[i].log_prob, hyps[i - 1].log_prob);
  }
  EXPECT_THROW(beam_nbest_decode(lp, 2, 3), ContractError);
  EXPECT_THROW(beam_nbest_decode(lp, 2, 0), ContractError);
  // Pruning only drops alignments, so a beam score never exceeds the full
  // CTC probability of its sequence.
  for (const auto& h : hyps)
    if (!h.tokens.empty())
      EXPECT_GE(-h.log_prob, ctc_loss(lp, CtcLabelSequence{h.tokens, 0}) - 1e-9);
}

TEST(NBest, HandBuiltDecision) {
  const std::vector<double> hyp{-1.0, -1.5};
  const std::vector<std::vector<double>> intents{{std::log(0.9), std::log(0.1)},
                                                 {std::log(0.01), std::log(0.99)}};
  EXPECT_GT(-1.0 + std::log(0.9), -1.5 + std::log(0.99));
  EXPECT_EQ(nbest_intent_decision(hyp, intents), 0u);
  // A better second hypothesis flips it.
  const std::vector<double> close{-1.0, -1.01};
  EXPECT_EQ(nbest_intent_decision(close, intents), 1u);
  EXPECT_THROW(nbest_intent_decision(std::vector<double>{-1.0}, intents), ContractError);
}

TEST(Argmax, TiesAndInvariance) {
  EXPECT_EQ(argmax(std::vector<double>{1, 3, 3, 2}), 1u);
  EXPECT_THROW(argmax(std::vector<double>{}), ContractError);
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> x(31);
    for (double& v : x) v = rng.uniform(-5, 5);
    const auto a = e2e_intent(x);
    std::vector<double> y = x, z = x;
    for (double& v : y) v += 17.0;
    for (double& v : z) v = std::exp(v) * 3.0 + 1.0;
    EXPECT_EQ(e2e_intent(y), a);
    EXPECT_EQ(e2e_intent(z), a);
  }
}

// --- metrics ---------------------------------------------------------------

std::vector<std::string> words(const std::string& s) { return split_words(s); }

TEST(Wer, Examples) {
  EXPECT_EQ(wer(words("turn on lights"), words("turn on lights")), 0.0);
  EXPECT_DOUBLE_EQ(wer(words("turn on lights"), words("turn off the lights")), 2.0 / 3.0);
  EXPECT_TRUE(std::isinf(wer({}, words("hello"))));
  EXPECT_EQ(wer({}, {}), 0.0);
  EXPECT_EQ(edit_distance(words("a b c"), {}), 3u);
}

TEST(Wer, DpEqualsExhaustiveEditSearch) {
  const testing::EditGraph graph({"x", "y", "z"}, 5);
  ASSERT_EQ(graph.seqs.size(), 364u);
  for (std::size_t src = 0; src < graph.seqs.size(); ++src) {
    const auto dist = graph.distances_from(src);
    for (std::size_t dst = 0; dst < graph.seqs.size(); ++dst) {
      ASSERT_EQ(edit_distance(graph.seqs[src], graph.seqs[dst]), dist[dst]);
      ASSERT_EQ(edit_distance(graph.seqs[src], graph.seqs[dst]),
                edit_distance(graph.seqs[dst], graph.seqs[src]));
    }
  }
}

TEST(Accuracy, Counts) {
  EXPECT_EQ(intent_accuracy(std::vector<IntentPair>{{1, 1}, {2, 2}}), 1.0);
  EXPECT_EQ(intent_accuracy(std::vector<IntentPair>{{1, 1}, {2, 3}}), 0.5);
  // Hand count: pairs 1, 2, 4, 5, 7, 8 and 10 match.
  const std::vector<IntentPair> ten{{0, 0}, {3, 3}, {5, 4}, {7, 7}, {2, 2},
                                    {9, 1}, {4, 4}, {30, 30}, {6, 16}, {11, 11}};
  EXPECT_DOUBLE_EQ(intent_accuracy(ten), 0.7);
  EXPECT_THROW(intent_accuracy(std::vector<IntentPair>{}), ContractError);
}

TEST(Report, SummaryRecountCsvAndTable) {
  const std::vector<EvalRow> rows{{"a", 1, 1, 1, 2, 0, 4},
                                  {"b", 2, 3, 2, 2, 2, 3},
                                  {"c", 0, 0, 5, 0, 1, 5}};
  const auto s = summarize(rows);
  EXPECT_EQ(s.utterances, 3u);
  EXPECT_DOUBLE_EQ(s.wer, 3.0 / 12.0);
  EXPECT_DOUBLE_EQ(s.e2e_acc, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.pipe1_acc, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(s.pipeN_acc, 2.0 / 3.0);
  const auto path = std::filesystem::temp_directory_path() / "slu_eval.csv";
  write_eval_csv(rows, path);
  const auto back = read_eval_csv(path);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[1].utt_id, "b");
  EXPECT_EQ(back[1].e2e_pred, 3u);
  EXPECT_EQ(back[2].ref_len, 5u);
  std::filesystem::remove(path);
  const ConditionResult c{"fine-tuned", s, true};
  const auto table = format_results_table({&c, 1});
  for (const char* col : {"ASR WER", "Pipe.", "E2E", "25.00%", "66.67%"})
    EXPECT_NE(table.find(col), std::string::npos) << col;
}

// --- NLU and evaluation on a tiny trained system ---------------------------

class Nlu : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { setup_ = new testing::TinySetup(testing::make_tiny_setup()); }
  static void TearDownTestSuite() { delete setup_; }
  static testing::TinySetup* setup_;
};
testing::TinySetup* Nlu::setup_ = nullptr;

TEST_F(Nlu, EmptyInputAndZeroedProjection) {
  NluParams nlu = NluParams::init(setup_->vocab.size(), 8, 8, 2, 31, 1);
  for (double& v : nlu.proj.b.value.data()) v = 0.25;
  const Tensor empty = nlu_logits(nlu, {});
  EXPECT_EQ(empty, nlu.proj.b.value);
  nlu.proj.w.value.fill(0.0);
  nlu.proj.b.value.fill(0.0);
  Graph g;
  const auto ids = setup_->vocab.encode("turn on the lights");
  Var loss = intent_ce_loss(nlu_forward(g, nlu, ids, GraphOptions{}), 3);
  EXPECT_NEAR(loss.value().item(), std::log(31.0), 1e-12);
  EXPECT_THROW(nlu_logits(nlu, WordpieceSequence{setup_->vocab.size()}), ContractError);
}

TEST_F(Nlu, GoldTranscriptAccuracyAndDeterminism) {
  CorpusConfig cfg;
  cfg.slu_speakers = {6, 2, 2};
  cfg.slu_utts_per_speaker = 125;
  cfg.pretrain_speakers = {1, 1};
  cfg.pretrain_utts_per_speaker = 2;
  const Corpus c = gen_corpus(SlotGrammar::default_grammar(), Lexicon::default_lexicon(), cfg, 11);
  std::vector<Utterance> tr, va, te;
  std::vector<std::string> texts;
  for (const auto& u : c.slu) {
    (u.split == Split::kTrain ? tr : u.split == Split::kValid ? va : te).push_back(u);
    texts.push_back(u.text);
  }
  const BpeVocab vocab = BpeVocab::train(texts, 120);
  TrainOptions o;
  o.max_epochs = 60;
  o.lr = 3e-3;
  NluParams a = NluParams::init(vocab.size(), 16, 16, 2, 31, 4);
  NluParams b = a;
  const auto ha = train_nlu(a, vocab, tr, va, o);
  std::vector<IntentPair> pairs;
  for (const auto& u : te) pairs.push_back({u.intent->id, argmax(nlu_logits(a, vocab.encode(u.text)).data())});
  EXPECT_GE(intent_accuracy(pairs), 0.99);
  o.max_epochs = 2;
  NluParams x = NluParams::init(vocab.size(), 16, 16, 2, 31, 4), y = x;
  const auto hx = train_nlu(x, vocab, tr, va, o);
  const auto hy = train_nlu(y, vocab, tr, va, o);
  EXPECT_EQ(hx.epochs.back().val_loss, hy.epochs.back().val_loss);
  EXPECT_EQ(x.proj.w.value, y.proj.w.value);

  const auto path = std::filesystem::temp_directory_path() / "slu_nlu.ckpt";
  save_nlu(a, path);
  const NluParams back = load_nlu(path);
  for (const auto& u : te) {
    const auto ids = vocab.encode(u.text);
    EXPECT_EQ(nlu_logits(back, ids), nlu_logits(a, ids));
  }
  std::filesystem::remove(path);
}

TEST_F(Nlu, EvaluateAndSweepOnTinySystem) {
  auto p = CascadeParams::init(setup_->dims, 2);
  TrainOptions o;
  o.max_epochs = 2;
  o.lr = 3e-3;
  train_phoneme(p.theta_p, setup_->pre_train, setup_->pre_valid, o);
  train_word(p.theta_w, p.theta_p, 1, setup_->vocab, setup_->pre_train, setup_->pre_valid, o);
  NluParams nlu = NluParams::init(setup_->vocab.size(), 8, 8, 2, 31, 1);
  train_nlu(nlu, setup_->vocab, setup_->slu_train, setup_->slu_valid, o);

  EvalOptions eo;
  eo.beam = 4;
  eo.nbest = 3;
  eo.threads = 1;
  const auto r1 = evaluate(p, nlu, setup_->vocab, setup_->slu_test, eo);
  eo.threads = 3;
  const auto r3 = evaluate(p, nlu, setup_->vocab, setup_->slu_test, eo);
  ASSERT_EQ(r1.rows.size(), setup_->slu_test.size());
  for (std::size_t i = 0; i < r1.rows.size(); ++i) {
    const auto& a = r1.rows[i];
    const auto& b = r3.rows[i];
    EXPECT_EQ(a.utt_id, setup_->slu_test[i].id);
    EXPECT_EQ(std::tie(a.e2e_pred, a.pipe1_pred, a.pipeN_pred, a.wer_edits),
              std::tie(b.e2e_pred, b.pipe1_pred, b.pipeN_pred, b.wer_edits));
    // The pipeline on a perfect decode is the NLU on the gold transcript.
    const auto& u = setup_->slu_test[i];
    const auto out = cascade_forward(p, u.features.frames);
    EXPECT_EQ(a.e2e_pred, e2e_intent(out.intent_logits.data()));
    EXPECT_EQ(a.pipe1_pred, pipeline_intent_1best(out.word.log_probs, nlu));
    const auto top = beam_nbest_decode(out.word.log_probs, 4, 1);
    EXPECT_EQ(pipeline_intent_nbest(out.word.log_probs, nlu, 4, 1),
              argmax(nlu_logits(nlu, top[0].tokens).data()));
  }
  EXPECT_EQ(summarize(r1.rows).wer, r1.summary.wer);

  MtlOptions mo;
  mo.train = o;
  mo.train.max_epochs = 1;
  const std::vector<double> alphas{0.4, 0.5, 0.6, 0.7, 0.8};
  eo.threads = 0;
  const auto rows = alpha_sweep(p, nlu, setup_->vocab, setup_->slu_train, setup_->slu_valid,
                                setup_->slu_test, alphas, mo, eo);
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(rows[i].alpha, alphas[i]);
    EXPECT_TRUE(std::isfinite(rows[i].wer));
    EXPECT_TRUE(std::isfinite(rows[i].e2e_acc));
  }
  const auto again = alpha_sweep(p, nlu, setup_->vocab, setup_->slu_train, setup_->slu_valid,
                                 setup_->slu_test, std::vector<double>{0.4}, mo, eo);
  EXPECT_EQ(again[0].wer, rows[0].wer);
  EXPECT_EQ(again[0].e2e_acc, rows[0].e2e_acc);
  EXPECT_NE(format_sweep_table(rows).find("0.60"), std::string::npos);
  EXPECT_THROW(alpha_sweep(p, nlu, setup_->vocab, setup_->slu_train, setup_->slu_valid,
                           setup_->slu_test, std::vector<double>{1.2}, mo, eo),
               ContractError);
}

}  // namespace
}  // namespace slu
