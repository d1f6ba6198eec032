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

// Run configuration, on-disk layout and the phase-gated experiment driver
// shared by the command-line tool and the acceptance harness.

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "slu/bpe.hpp"
#include "slu/cascade.hpp"
#include "slu/corpus.hpp"
#include "slu/decoding.hpp"
#include "slu/training.hpp"

namespace slu {

struct NluDims {
  std::size_t emb_dim = 64;
  std::size_t hidden = 64;
  std::size_t layers = 2;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out = "run";
  // Empty paths select the built-in grammar and lexicon.
  std::filesystem::path grammar;
  std::filesystem::path lexicon;
  CorpusConfig corpus;
  std::size_t bpe_size = 200;
  CascadeDims dims;
  NluDims nlu;
  TrainOptions phoneme;
  TrainOptions word_pretrain;
  TrainOptions word_finetune;
  TrainOptions intent;
  TrainOptions nlu_train;
  double alpha = 0.6;
  double mtl_intent_lr = 1e-3;
  std::vector<double> sweep_alphas{0.4, 0.5, 0.6, 0.7, 0.8};
  std::size_t beam = 8;
  std::size_t nbest = 4;
  Split split = Split::kTest;
  std::size_t frame_interval_ms = 0;
  std::size_t threads = 0;  // 0: hardware concurrency

  static RunConfig defaults();
  void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
// Missing keys keep their defaults; unknown top-level keys are rejected.
void from_json(const nlohmann::json& j, RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);
// Applies "dotted.key=value" to an existing field, e.g. "word_pretrain.lr=2e-3"
// or "dims.conv=[[3,32]]". The value is parsed as JSON, falling back to a
// plain string.
void apply_override(RunConfig& c, const std::string& assignment);

enum class Phase { kPhoneme, kWordPretrain, kWordFinetune, kIntentStepwise, kMtl, kNlu };
std::string to_string(Phase p);
Phase phase_from_string(const std::string& s);

// Which word module the stepwise intent phase builds on.
enum class WordStage { kPretrain, kFinetune };

class RunLayout {
 public:
  explicit RunLayout(std::filesystem::path root) : root_(std::move(root)) {}
  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path corpus_dir() const { return root_ / "corpus"; }
  std::filesystem::path checkpoints_dir() const { return root_ / "checkpoints"; }
  std::filesystem::path reports_dir() const { return root_ / "reports"; }
  std::filesystem::path slu_manifest() const { return corpus_dir() / "slu.jsonl"; }
  std::filesystem::path pretrain_manifest() const { return corpus_dir() / "pretrain.jsonl"; }
  std::filesystem::path vocab() const { return checkpoints_dir() / "bpe.vocab"; }
  std::filesystem::path nlu() const { return checkpoints_dir() / "nlu.ckpt"; }
  std::filesystem::path checkpoint(Phase p, WordStage on = WordStage::kFinetune) const;
  std::filesystem::path resolved_config() const { return root_ / "config.json"; }

 private:
  std::filesystem::path root_;
};

struct SplitCounts {
  std::string corpus;
  std::string split;
  std::size_t speakers = 0;
  std::size_t utterances = 0;
};
std::vector<SplitCounts> count_splits(std::span<const Utterance> utts, const std::string& corpus);
std::string format_counts_table(std::span<const SplitCounts> rows);

// Writes the resolved config into the run directory.
void write_resolved_config(const RunConfig& cfg);

std::vector<SplitCounts> cmd_gen_corpus(const RunConfig& cfg);

struct PhaseResult {
  TrainHistory history;
  std::filesystem::path checkpoint;
  // Greedy WER on the SLU test split before and after, word phases only.
  std::optional<double> wer_before;
  std::optional<double> wer_after;
};

// Fails with a dependency error naming the phase to run first when a
// prerequisite checkpoint is missing.
PhaseResult cmd_train(const RunConfig& cfg, Phase phase, WordStage on = WordStage::kFinetune);

struct EvalResult {
  EvalReport report;
  std::filesystem::path csv;
};
// Evaluates the checkpoint of `model` (mtl, intent-stepwise, word-pretrain, ...).
EvalResult cmd_eval(const RunConfig& cfg, Phase model, WordStage on = WordStage::kFinetune);

struct StreamEvent {
  std::size_t frame = 0;
  std::size_t top_phone = 0;
  WordpieceSequence wordpieces;
  std::size_t top_intent = 0;
};
// Replays one utterance frame by frame through the MTL checkpoint; writes
// one line per frame to `log`.
std::vector<StreamEvent> cmd_stream(const RunConfig& cfg, const std::string& utt_id,
                                    std::ostream& log);

std::vector<SweepRow> cmd_sweep_alpha(const RunConfig& cfg);

struct RecipeResult {
  EvalSummary pretrain;      // pretrain-only word module, stepwise intent module
  EvalSummary finetune;      // fine-tuned word module, stepwise intent module
  EvalSummary mtl;           // MTL model at cfg.alpha
  double seconds = 0.0;
  std::string table;
};
// gen-corpus, every training phase, and the three evaluations above.
RecipeResult cmd_recipe(const RunConfig& cfg);

}  // namespace slu
