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
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "slu/bpe.hpp"
#include "slu/cascade.hpp"
#include "slu/corpus.hpp"
#include "slu/graph.hpp"

namespace slu {

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One bias-corrected Adam update from the gradients held in params. Moments
// are created on the first call; later calls must pass the same parameters.
void adam_step(AdamState& state, std::span<Parameter* const> params, double lr);

// Rescales all gradients so their joint L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

struct TrainSchedule {
  double lr = 1e-3;
  bool halve_on_val_increase = true;
  std::size_t patience = 3;
  double best_val = std::numeric_limits<double>::infinity();
  double prev_val = std::numeric_limits<double>::quiet_NaN();
  std::size_t epochs_without_improvement = 0;
};

struct ScheduleDecision {
  double lr = 0.0;
  bool stop = false;
  bool improved = false;
};

// Halves lr when the loss rose against the previous epoch; stops once
// `patience` consecutive epochs bring no new best (ties do not count).
ScheduleDecision schedule_update(TrainSchedule& sched, double epoch_val_loss);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  bool early_stopped = false;
};

void write_history_csv(const TrainHistory& h, const std::filesystem::path& path);

struct TrainOptions {
  double lr = 1e-3;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 20;
  std::size_t patience = 3;
  double clip_norm = 5.0;
  double dropout = 0.1;
  std::uint64_t seed = 1;
  // Load the parameters of the best validation epoch when training ends.
  bool restore_best = true;
};

void to_json(nlohmann::json& j, const TrainOptions& o);
void from_json(const nlohmann::json& j, TrainOptions& o);

// Stepwise phases. Frozen modules are evaluated once up front and
// never bound as trainable, so their parameters cannot change.
TrainHistory train_phoneme(PhonemeParams& theta_p, std::span<const Utterance> train,
                           std::span<const Utterance> valid, const TrainOptions& opt);

TrainHistory train_word(WordParams& theta_w, const PhonemeParams& theta_p, std::size_t subsample,
                        const BpeVocab& vocab, std::span<const Utterance> train,
                        std::span<const Utterance> valid, const TrainOptions& opt);

TrainHistory train_intent_stepwise(IntentParams& theta_u, const WordParams& theta_w,
                                   const PhonemeParams& theta_p, std::size_t subsample,
                                   std::span<const Utterance> train,
                                   std::span<const Utterance> valid, const TrainOptions& opt);

struct MtlOptions {
  TrainOptions train;
  double alpha = 0.5;
  // Learning rate for the intent module; <= 0 means train.lr.
  double intent_lr = 0.0;
};

TrainHistory train_mtl(CascadeParams& params, const BpeVocab& vocab,
                       std::span<const Utterance> train, std::span<const Utterance> valid,
                       const MtlOptions& opt);

// Per-utterance MTL loss gradient helper exposed for tests: builds the joint
// graph on precomputed phoneme embeddings and runs backward.
double mtl_backward(CascadeParams& params, const Tensor& p_emb, const WordpieceSequence& target,
                    std::size_t intent_id, double alpha);

namespace detail {
// Builds the loss of one utterance; `training` enables dropout.
using UttLossFn = std::function<Var(Graph&, std::size_t index, bool training, std::uint64_t seed)>;

// The shared minibatch loop over a single parameter group.
TrainHistory run_param_training(const std::string& phase, std::vector<Parameter*> params,
                                std::span<const std::size_t> train_lengths, std::size_t n_valid,
                                const UttLossFn& loss_fn, const UttLossFn& valid_fn,
                                const TrainOptions& opt);
}  // namespace detail

}  // namespace slu
