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

#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "slu/bpe.hpp"
#include "slu/cascade.hpp"
#include "slu/corpus.hpp"
#include "slu/training.hpp"

namespace slu {

struct Hypothesis {
  WordpieceSequence tokens;
  double log_prob = 0.0;  // CTC prefix probability, merged over alignments
};

// Frame argmax (lowest id on ties), collapse repeats, drop blanks.
WordpieceSequence greedy_ctc_decode(const Tensor& wp_log_probs,
                                    TokenId blank = BpeVocab::kBlank);

// CTC prefix beam search. Alignments that collapse to the same prefix are
// merged with log-sum-exp; returns up to n hypotheses sorted by log_prob
// (descending, then token sequence ascending).
std::vector<Hypothesis> beam_nbest_decode(const Tensor& wp_log_probs, std::size_t beam_width,
                                          std::size_t n, TokenId blank = BpeVocab::kBlank);

// Text classifier for the pipeline baseline: wordpiece embedding, LSTM
// stack, projection of the final hidden state.
struct NluParams {
  Parameter embedding;  // [vocab x E]
  std::vector<LstmLayerParams> lstm;
  LinearParams proj;

  static NluParams init(std::size_t vocab_size, std::size_t emb_dim, std::size_t hidden,
                        std::size_t layers, std::size_t num_intents, std::uint64_t seed);
  std::size_t vocab_size() const { return embedding.value.dims()[0]; }
  std::size_t num_intents() const { return proj.out_dim(); }
  std::vector<Parameter*> parameters();
};

// Intent logits [intents]. An empty sequence leaves the state at zero, so
// the logits equal the projection bias.
Tensor nlu_logits(const NluParams& nlu, std::span<const TokenId> tokens);
Var nlu_forward(Graph& g, NluParams& nlu, std::span<const TokenId> tokens,
                const GraphOptions& opt);

// CE training on BPE-encoded gold transcripts.
TrainHistory train_nlu(NluParams& nlu, const BpeVocab& vocab, std::span<const Utterance> train,
                       std::span<const Utterance> valid, const TrainOptions& opt);

void save_nlu(const NluParams& nlu, const std::filesystem::path& path);
NluParams load_nlu(const std::filesystem::path& path);

// Lowest index among the maxima.
std::size_t argmax(std::span<const double> xs);

std::size_t pipeline_intent_1best(const Tensor& wp_log_probs, const NluParams& nlu);
// argmax_u max_i [hyp_log_probs[i] + intent_log_probs[i][u]]; ties to the
// lowest u.
std::size_t nbest_intent_decision(std::span<const double> hyp_log_probs,
                                  std::span<const std::vector<double>> intent_log_probs);
// argmax_u max_{W in N-best} [log p(W|X) + log p(u|W)]; ties to the lowest u.
std::size_t pipeline_intent_nbest(std::span<const Hypothesis> nbest, const NluParams& nlu);
std::size_t pipeline_intent_nbest(const Tensor& wp_log_probs, const NluParams& nlu,
                                  std::size_t beam_width, std::size_t n);
std::size_t e2e_intent(std::span<const double> intent_logits);

// Levenshtein distance (substitutions + deletions + insertions).
std::size_t edit_distance(std::span<const std::string> ref, std::span<const std::string> hyp);
// edits / |ref|; 0 when both are empty, +inf for an empty ref and a
// non-empty hyp.
double wer(std::span<const std::string> ref, std::span<const std::string> hyp);

struct IntentPair {
  std::size_t gold = 0;
  std::size_t predicted = 0;
};
double intent_accuracy(std::span<const IntentPair> pairs);

struct EvalRow {
  std::string utt_id;
  std::size_t gold_intent = 0;
  std::size_t e2e_pred = 0;
  std::size_t pipe1_pred = 0;
  std::size_t pipeN_pred = 0;
  std::size_t wer_edits = 0;
  std::size_t ref_len = 0;
};

struct EvalSummary {
  std::size_t utterances = 0;
  double wer = 0.0;  // corpus WER: total edits / total reference words
  double pipe1_acc = 0.0;
  double pipeN_acc = 0.0;
  double e2e_acc = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  EvalSummary summary;
};

struct EvalOptions {
  std::size_t beam = 8;
  std::size_t nbest = 4;
  std::size_t threads = 0;  // 0: hardware concurrency
};

EvalReport evaluate(const CascadeParams& params, const NluParams& nlu, const BpeVocab& vocab,
                    std::span<const Utterance> utts, const EvalOptions& opt);
EvalSummary summarize(std::span<const EvalRow> rows);
void write_eval_csv(std::span<const EvalRow> rows, const std::filesystem::path& path);
std::vector<EvalRow> read_eval_csv(const std::filesystem::path& path);

// One line per condition, in the column order WER / pipeline / end-to-end.
struct ConditionResult {
  std::string condition;
  EvalSummary summary;
  bool has_e2e = true;
};
std::string format_results_table(std::span<const ConditionResult> rows);

struct SweepRow {
  double alpha = 0.0;
  double wer = 0.0;
  double e2e_acc = 0.0;
  double pipe1_acc = 0.0;
};

// Trains MTL from the same warm start and seed for every alpha and
// evaluates each result on `test`.
std::vector<SweepRow> alpha_sweep(const CascadeParams& warm_start, const NluParams& nlu,
                                  const BpeVocab& vocab, std::span<const Utterance> train,
                                  std::span<const Utterance> valid,
                                  std::span<const Utterance> test, std::span<const double> alphas,
                                  const MtlOptions& opt, const EvalOptions& eval_opt);
std::string format_sweep_table(std::span<const SweepRow> rows);
void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path);

}  // namespace slu
