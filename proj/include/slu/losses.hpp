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

#include <cstddef>
#include <span>
#include <vector>

#include "slu/graph.hpp"

namespace slu {

// Target of a CTC loss: non-blank token ids.
struct CtcLabelSequence {
  std::vector<std::size_t> tokens;
  std::size_t blank_id = 0;

  // Throws ContractError on an empty label or a blank inside it.
  void validate() const;
  // Smallest T admitting an alignment: length plus adjacent repeats.
  std::size_t min_frames() const;
};

// MTL weight alpha in [0, 1].
class MtlWeight {
 public:
  explicit MtlWeight(double alpha);
  double alpha() const noexcept { return alpha_; }

 private:
  double alpha_;
};

// Mean over frames of -log softmax(logits_t)[alignment_t].
Var frame_ce_loss(Var logits, std::span<const std::size_t> alignment);

// -log of the total probability of all CTC alignments of label given
// per-frame log-probabilities [T x C]. Summed over alignments, not normalised
// by label length. Throws InfeasibleLabelError when T is too short.
Var ctc_loss(Var log_probs, const CtcLabelSequence& label);
double ctc_loss(const Tensor& log_probs, const CtcLabelSequence& label);

// Same quantity by enumerating all C^T frame paths. Test oracle; requires
// C^T <= 1e7. Returns +inf for infeasible labels.
double ctc_loss_bruteforce(const Tensor& log_probs, const CtcLabelSequence& label);

// -log softmax(logits)[intent_id]
Var intent_ce_loss(Var logits, std::size_t intent_id);

// alpha * intent_loss + (1 - alpha) * ctc_word_loss
Var mtl_loss(Var intent_loss, Var ctc_word_loss, MtlWeight w);
double mtl_loss(double intent_loss, double ctc_word_loss, MtlWeight w);

}  // namespace slu
