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

// slu-cascade: corpus generation, phase-gated training, evaluation,
// streaming replay and the alpha sweep.

#include <cstdio>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "slu/error.hpp"
#include "slu/experiment.hpp"
#include "slu/log.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> alpha;
  std::optional<std::size_t> beam;
  std::optional<std::size_t> nbest;
  std::optional<std::string> split;
  std::optional<std::size_t> frame_interval_ms;
  std::optional<std::size_t> subsample;
  std::optional<std::size_t> threads;
  std::vector<std::string> set;
};

slu::RunConfig resolve(const Overrides& o) {
  slu::RunConfig c = o.config.empty() ? slu::RunConfig::defaults() : slu::load_run_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.out = *o.out;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.beam) c.beam = *o.beam;
  if (o.nbest) c.nbest = *o.nbest;
  if (o.split) c.split = slu::split_from_string(*o.split);
  if (o.frame_interval_ms) c.frame_interval_ms = *o.frame_interval_ms;
  if (o.subsample) c.dims.subsample = *o.subsample;
  if (o.threads) c.threads = *o.threads;
  for (const auto& a : o.set) slu::apply_override(c, a);
  c.validate();
  return c;
}

slu::WordStage stage_from(const std::string& s) {
  if (s == "pretrain") return slu::WordStage::kPretrain;
  if (s == "finetune") return slu::WordStage::kFinetune;
  throw slu::ConfigError("--on must be pretrain or finetune, got '" + s + "'");
}

void print_phase(const slu::PhaseResult& r) {
  std::printf("checkpoint %s\n", r.checkpoint.string().c_str());
  std::printf("epochs %zu, best epoch %zu, best valid loss %.6f%s\n", r.history.epochs.size(),
              r.history.best_epoch, r.history.best_val, r.history.early_stopped ? " (early stop)" : "");
  if (r.wer_before) std::printf("test WER before %.2f%%\n", 100.0 * *r.wer_before);
  if (r.wer_after) std::printf("test WER after  %.2f%%\n", 100.0 * *r.wer_after);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Three-module cascaded spoken language understanding on a synthetic corpus"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("--config", o.config, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "top-level seed");
  app.add_option("--out", o.out, "run directory");
  app.add_option("--alpha", o.alpha, "MTL weight of the intent loss")->check(CLI::Range(0.0, 1.0));
  app.add_option("--beam", o.beam, "beam width for N-best decoding");
  app.add_option("--nbest", o.nbest, "N-best list size");
  app.add_option("--split", o.split, "evaluation split")
      ->check(CLI::IsMember({"train", "valid", "test"}));
  app.add_option("--frame-interval-ms", o.frame_interval_ms, "delay between streamed frames");
  app.add_option("--subsample", o.subsample, "word-module frame subsampling factor");
  app.add_option("--threads", o.threads, "evaluation threads (0: all cores)");
  app.add_option("--set", o.set, "override any config field, e.g. --set word_pretrain.lr=2e-3")
      ->allow_extra_args(false);

  auto* gen = app.add_subcommand("gen-corpus", "generate the SLU and pre-training corpora");

  auto* train = app.add_subcommand("train", "run one training phase");
  std::string phase, on = "finetune";
  train->add_option("--phase", phase, "training phase")
      ->required()
      ->check(CLI::IsMember(
          {"phoneme", "word-pretrain", "word-finetune", "intent-stepwise", "mtl", "nlu"}));
  train->add_option("--on", on, "word module for intent-stepwise: pretrain or finetune");

  auto* eval = app.add_subcommand("eval", "evaluate WER, pipeline and end-to-end intent accuracy");
  std::string model = "mtl", eval_on = "finetune";
  eval->add_option("--model", model, "checkpoint to evaluate")
      ->check(CLI::IsMember({"word-pretrain", "word-finetune", "intent-stepwise", "mtl"}));
  eval->add_option("--on", eval_on, "word module under intent-stepwise: pretrain or finetune");

  auto* stream = app.add_subcommand("stream", "replay one utterance frame by frame");
  std::string utt;
  stream->add_option("--utt", utt, "utterance id")->required();

  auto* sweep = app.add_subcommand("sweep-alpha", "train MTL models over the alpha grid");
  auto* recipe = app.add_subcommand("recipe", "every phase followed by evaluation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    slu::log_level();  // validates SLU_CASCADE_LOG early
    const slu::RunConfig cfg = resolve(o);
    if (gen->parsed()) {
      std::cout << slu::format_counts_table(slu::cmd_gen_corpus(cfg));
    } else if (train->parsed()) {
      print_phase(slu::cmd_train(cfg, slu::phase_from_string(phase), stage_from(on)));
    } else if (eval->parsed()) {
      const auto r = slu::cmd_eval(cfg, slu::phase_from_string(model), stage_from(eval_on));
      const bool has_e2e = model == "mtl" || model == "intent-stepwise";
      const slu::ConditionResult row{model, r.report.summary, has_e2e};
      std::cout << slu::format_results_table({&row, 1});
      std::cout << "rows " << r.report.rows.size() << " -> " << r.csv.string() << '\n';
    } else if (stream->parsed()) {
      slu::cmd_stream(cfg, utt, std::cout);
    } else if (sweep->parsed()) {
      std::cout << slu::format_sweep_table(slu::cmd_sweep_alpha(cfg));
    } else if (recipe->parsed()) {
      const auto r = slu::cmd_recipe(cfg);
      std::cout << r.table;
      std::printf("recipe finished in %.1fs\n", r.seconds);
    }
  } catch (const slu::Error& e) {
    std::fprintf(stderr, "%s: %s\n", e.code().c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "E_INTERNAL: %s\n", e.what());
    return 3;
  }
  return 0;
}
