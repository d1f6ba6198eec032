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
#include <span>
#include <string>
#include <vector>

#include "slu/graph.hpp"
#include "slu/rng.hpp"

namespace slu {

// Unidirectional LSTM layer. Gate blocks in w, u, b are ordered
// (input, forget, candidate, output).
struct LstmLayerParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Parameter w;  // [4H x input]
  Parameter u;  // [4H x H]
  Parameter b;  // [4H]

  // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases except the
  // forget gate, which starts at 1.
  static LstmLayerParams init(const std::string& prefix, std::size_t input_dim,
                              std::size_t hidden_dim, Rng& rng);
  void validate() const;
};

struct LstmState {
  Tensor h;  // [1 x H]
  Tensor c;  // [1 x H]
  static LstmState zeros(std::size_t hidden);
};

// Pre-transposed weights of one layer for repeated frame-wise inference.
class LstmKernel {
 public:
  explicit LstmKernel(const LstmLayerParams& p);
  // Returns the new state; h is the layer output for this frame.
  LstmState step(std::span<const double> x, const LstmState& state) const;
  std::size_t hidden() const { return hidden_; }

 private:
  std::size_t input_;
  std::size_t hidden_;
  Tensor wt_;  // [input x 4H]
  Tensor ut_;  // [H x 4H]
  const Tensor* bias_;
};

LstmState lstm_step(const LstmLayerParams& p, std::span<const double> x,
                    const LstmState& state);

// Inference-mode stack forward (no dropout); xs is [T x input].
Tensor lstm_stack_forward(std::span<const LstmLayerParams> stack, const Tensor& xs);

struct LinearParams {
  Parameter w;  // [out x in]
  Parameter b;  // [out]
  static LinearParams init(const std::string& prefix, std::size_t in, std::size_t out,
                           Rng& rng);
  static LinearParams zeros(const std::string& prefix, std::size_t in, std::size_t out);
  std::size_t in_dim() const { return w.value.dims()[1]; }
  std::size_t out_dim() const { return w.value.dims()[0]; }
};

// y = x W^T + b for every row of x.
Tensor linear_forward(const Tensor& w, const Tensor& b, const Tensor& x);

enum class Activation { kRelu, kTanh, kSigmoid };
Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

struct ConvLayerParams {
  std::size_t width = 1;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Parameter w;  // [out x width*in]; column block k multiplies frame t-width+1+k
  Parameter b;  // [out]
};

// Causal (left-context-only) temporal convolution stack.
struct CausalConvParams {
  std::vector<ConvLayerParams> layers;
  Activation activation = Activation::kRelu;

  static CausalConvParams init(const std::string& prefix, std::size_t input_dim,
                               std::span<const std::pair<std::size_t, std::size_t>> width_out,
                               Activation act, Rng& rng);
  std::size_t receptive_field() const;
  std::size_t input_dim() const { return layers.front().in_dim; }
  std::size_t output_dim() const { return layers.back().out_dim; }
};

Tensor causal_conv_forward(const CausalConvParams& p, const Tensor& xs);

// Inverted dropout: kept units are scaled by 1/(1-p).
Tensor dropout_forward(const Tensor& x, double p, std::uint64_t seed);

// Graph-side bindings. Weights are transposed once per graph so every frame
// runs the same row-times-matrix kernel as streaming inference.
struct LstmBinding {
  Var wt;
  Var ut;
  Var b;
  std::size_t hidden = 0;
};
LstmBinding bind(Graph& g, LstmLayerParams& p, bool trainable);

struct LstmStepVars {
  Var h;
  Var c;
};
// One step given this frame's input projection xw_t ([1 x 4H]).
LstmStepVars lstm_step(const LstmBinding& layer, Var xw_t, Var h, Var c);
Var lstm_layer_forward(const LstmBinding& layer, Var xs);
Var lstm_stack_forward(Graph& g, std::span<LstmLayerParams> stack, Var xs, double dropout_p,
                       bool training, std::uint64_t dropout_seed, bool trainable);

Var linear_forward(Graph& g, LinearParams& p, Var x, bool trainable);
Var apply_activation(Activation a, Var x);
Var causal_conv_forward(Graph& g, CausalConvParams& p, Var xs, bool trainable);

std::vector<Parameter*> parameters(LstmLayerParams& p);
std::vector<Parameter*> parameters(LinearParams& p);
std::vector<Parameter*> parameters(CausalConvParams& p);

}  // namespace slu
