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
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "slu/graph.hpp"
#include "slu/layers.hpp"

namespace slu {

struct CascadeDims {
  std::size_t feat_dim = 16;
  // (kernel width, output dim) per causal conv layer; the last output dim is
  // the phoneme embedding size E_p.
  std::vector<std::pair<std::size_t, std::size_t>> conv{{3, 64}, {3, 64}};
  Activation conv_activation = Activation::kRelu;
  std::size_t num_phones = 39;
  std::size_t word_hidden = 128;
  std::size_t word_layers = 4;
  std::size_t vocab_size = 200;  // wordpieces including blank
  std::size_t intent_hidden = 128;
  std::size_t intent_layers = 2;
  std::size_t num_intents = 31;
  // The word module reads every subsample-th phoneme embedding (t % k == 0).
  std::size_t subsample = 1;

  void validate() const;
  std::size_t phone_embedding_dim() const { return conv.back().second; }
  std::size_t receptive_field() const;
  friend bool operator==(const CascadeDims&, const CascadeDims&) = default;
};

void to_json(nlohmann::json& j, const CascadeDims& d);
void from_json(const nlohmann::json& j, CascadeDims& d);

struct PhonemeParams {
  CausalConvParams conv;
  LinearParams proj;  // E_p -> phones
};

struct WordParams {
  std::vector<LstmLayerParams> lstm;
  LinearParams proj;  // hidden -> wordpieces (+ blank)
};

struct IntentParams {
  std::vector<LstmLayerParams> lstm;
  LinearParams proj;  // hidden -> intents
};

struct CascadeParams {
  static constexpr std::uint32_t kVersion = 1;

  CascadeDims dims;
  PhonemeParams theta_p;
  WordParams theta_w;
  IntentParams theta_u;

  // Independent named seed streams per module, so re-initialising one module
  // does not disturb the others.
  static CascadeParams init(const CascadeDims& dims, std::uint64_t seed);
  void validate() const;

  std::vector<Parameter*> phoneme_parameters();
  std::vector<Parameter*> word_parameters();
  std::vector<Parameter*> intent_parameters();
  std::vector<Parameter*> all_parameters();
  std::vector<const Parameter*> all_parameters() const;
};

bool params_equal(const CascadeParams& a, const CascadeParams& b);

// --- inference (numeric) ---------------------------------------------------

struct PhonemeOutputs {
  Tensor embedding;  // [T x E_p]
  Tensor logits;     // [T x phones]
};
struct WordOutputs {
  Tensor embedding;  // [T' x hidden]
  Tensor log_probs;  // [T' x vocab]
};
struct CascadeOutputs {
  PhonemeOutputs phoneme;
  WordOutputs word;
  Tensor intent_logits;  // [intents]
};

PhonemeOutputs phoneme_forward(const PhonemeParams& p, const Tensor& xs);
// Keeps rows t with t % k == 0.
Tensor subsample_rows(const Tensor& xs, std::size_t k);
WordOutputs word_forward(const WordParams& p, const Tensor& p_emb);
Tensor lu_forward(const IntentParams& p, const Tensor& w_emb);
CascadeOutputs cascade_forward(const CascadeParams& p, const Tensor& xs);

// --- training graphs -------------------------------------------------------

struct PhonemeVars {
  Var embedding;
  Var logits;
};
struct WordVars {
  Var embedding;
  Var log_probs;
};

struct GraphOptions {
  bool train_p = false;
  bool train_w = false;
  bool train_u = false;
  double dropout = 0.0;
  bool training = false;
  std::uint64_t dropout_seed = 0;
};

PhonemeVars phoneme_forward(Graph& g, PhonemeParams& p, Var xs, bool trainable);
WordVars word_forward(Graph& g, WordParams& p, Var p_emb, const GraphOptions& opt);
Var lu_forward(Graph& g, IntentParams& p, Var w_emb, const GraphOptions& opt);

struct CascadeVars {
  PhonemeVars phoneme;
  WordVars word;
  Var intent_logits;  // [1 x intents]
};
CascadeVars cascade_forward(Graph& g, CascadeParams& p, Var xs, const GraphOptions& opt);

// --- streaming -------------------------------------------------------------

// Read-only inference weights (pre-transposed). Shared between sessions.
class CascadeRuntime {
 public:
  explicit CascadeRuntime(const CascadeParams& p);
  const CascadeParams& params() const { return *params_; }

 private:
  friend class StreamingSession;
  struct Dense {
    Tensor wt;  // [in x out]
    const Tensor* b;
  };
  const CascadeParams* params_;
  std::vector<Dense> conv_;
  Dense phone_proj_;
  std::vector<LstmKernel> word_;
  Dense word_proj_;
  std::vector<LstmKernel> intent_;
  Dense intent_proj_;
};

struct StreamOutput {
  std::size_t frame = 0;
  std::vector<double> phone_logits;
  // Present on frames the word module consumes.
  std::optional<std::vector<double>> wp_log_probs;
  // Intent logits read from the latest word-module frame.
  std::vector<double> intent_logits;
};

// Frame-synchronous cascade state: one ring buffer per conv layer and one
// LSTM state per recurrent layer. Not thread-safe; one thread per session.
class StreamingSession {
 public:
  explicit StreamingSession(const CascadeRuntime& rt);
  StreamOutput push(std::span<const double> frame);
  void reset();
  std::size_t frames_seen() const { return frames_seen_; }

 private:
  const CascadeRuntime* rt_;
  std::vector<std::vector<double>> history_;  // per conv layer, width*in values
  std::vector<LstmState> word_state_;
  std::vector<LstmState> intent_state_;
  std::vector<double> intent_logits_;
  std::size_t frames_seen_ = 0;
};

inline StreamOutput stream_push(StreamingSession& s, std::span<const double> frame) {
  return s.push(frame);
}

// --- checkpoints -----------------------------------------------------------

// "SLUC", u32 version, u32 count, then per parameter: u16 name length, name,
// u8 rank, u32 dims[rank], f64 data. Dimensions travel as "meta.dims".
void save_checkpoint(const CascadeParams& p, const std::filesystem::path& path);

// The same container for any list of named tensors.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;
void save_tensors(const NamedTensors& tensors, const std::filesystem::path& path);
NamedTensors load_tensors(const std::filesystem::path& path);
CascadeParams load_checkpoint(const std::filesystem::path& path);

}  // namespace slu
