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

#include "slu/layers.hpp"

#include <cmath>

#include "slu/error.hpp"
#include "slu/kernels.hpp"

namespace slu {
namespace {

Tensor uniform_tensor(Shape dims, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(dims));
  const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data()) v = rng.uniform(-r, r);
  return t;
}

Tensor transposed(const Tensor& m) {
  Tensor out({m.dims()[1], m.dims()[0]});
  kernels::transpose(m.data().data(), out.data().data(), m.dims()[0], m.dims()[1]);
  return out;
}

void apply(Activation a, std::span<const double> x, std::span<double> y) {
  switch (a) {
    case Activation::kRelu: kernels::apply_relu(x, y); break;
    case Activation::kTanh: kernels::apply_tanh(x, y); break;
    case Activation::kSigmoid: kernels::apply_sigmoid(x, y); break;
  }
}

}  // namespace

LstmLayerParams LstmLayerParams::init(const std::string& prefix, std::size_t input_dim,
                                      std::size_t hidden_dim, Rng& rng) {
  if (input_dim == 0 || hidden_dim == 0) throw ContractError("LSTM dims must be positive");
  LstmLayerParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  p.w = Parameter(prefix + ".w", uniform_tensor({4 * hidden_dim, input_dim}, input_dim, rng));
  p.u = Parameter(prefix + ".u", uniform_tensor({4 * hidden_dim, hidden_dim}, hidden_dim, rng));
  Tensor b({4 * hidden_dim});
  for (std::size_t j = 0; j < hidden_dim; ++j) b[hidden_dim + j] = 1.0;
  p.b = Parameter(prefix + ".b", std::move(b));
  return p;
}

void LstmLayerParams::validate() const {
  const Shape w_dims{4 * hidden_dim, input_dim};
  const Shape u_dims{4 * hidden_dim, hidden_dim};
  const Shape b_dims{4 * hidden_dim};
  if (w.value.dims() != w_dims || u.value.dims() != u_dims || b.value.dims() != b_dims)
    throw ShapeError("LSTM parameter shapes " + shape_to_string(w.value.dims()) + ", " +
                     shape_to_string(u.value.dims()) + ", " + shape_to_string(b.value.dims()) +
                     " inconsistent with input " + std::to_string(input_dim) + ", hidden " +
                     std::to_string(hidden_dim));
}

LstmState LstmState::zeros(std::size_t hidden) {
  return {Tensor({1, hidden}), Tensor({1, hidden})};
}

LstmKernel::LstmKernel(const LstmLayerParams& p)
    : input_(p.input_dim),
      hidden_(p.hidden_dim),
      wt_(transposed(p.w.value)),
      ut_(transposed(p.u.value)),
      bias_(&p.b.value) {
  p.validate();
}

LstmState LstmKernel::step(std::span<const double> x, const LstmState& state) const {
  if (x.size() != input_)
    throw ShapeError("lstm_step: input has " + std::to_string(x.size()) +
                     " values, layer expects " + std::to_string(input_));
  if (state.h.size() != hidden_ || state.c.size() != hidden_)
    throw ShapeError("lstm_step: state does not match hidden size " + std::to_string(hidden_));
  const std::size_t g4 = 4 * hidden_;
  std::vector<double> xw(g4), hu(g4), pre(g4);
  kernels::gemm(x.data(), wt_.data().data(), xw.data(), 1, input_, g4);
  kernels::gemm(state.h.data().data(), ut_.data().data(), hu.data(), 1, hidden_, g4);
  kernels::add(xw, hu, pre);
  kernels::add_bias(pre, bias_->data(), pre);
  LstmState next = LstmState::zeros(hidden_);
  kernels::lstm_cell(pre, state.c.data(), next.h.data(), next.c.data());
  return next;
}

LstmState lstm_step(const LstmLayerParams& p, std::span<const double> x,
                    const LstmState& state) {
  return LstmKernel(p).step(x, state);
}

Tensor lstm_stack_forward(std::span<const LstmLayerParams> stack, const Tensor& xs) {
  if (xs.empty()) throw ContractError("lstm_stack_forward: empty sequence");
  if (stack.empty()) throw ContractError("lstm_stack_forward: empty stack");
  Tensor cur = xs;
  for (const auto& layer : stack) {
    LstmKernel k(layer);
    const std::size_t t_len = cur.rows();
    Tensor out({t_len, layer.hidden_dim});
    LstmState s = LstmState::zeros(layer.hidden_dim);
    for (std::size_t t = 0; t < t_len; ++t) {
      s = k.step(cur.row(t), s);
      std::copy(s.h.data().begin(), s.h.data().end(), out.row(t).begin());
    }
    cur = std::move(out);
  }
  return cur;
}

LinearParams LinearParams::init(const std::string& prefix, std::size_t in, std::size_t out,
                                Rng& rng) {
  return {Parameter(prefix + ".w", uniform_tensor({out, in}, in, rng)),
          Parameter(prefix + ".b", Tensor({out}))};
}

LinearParams LinearParams::zeros(const std::string& prefix, std::size_t in, std::size_t out) {
  return {Parameter(prefix + ".w", Tensor({out, in})), Parameter(prefix + ".b", Tensor({out}))};
}

Tensor linear_forward(const Tensor& w, const Tensor& b, const Tensor& x) {
  if (w.rank() != 2 || b.rank() != 1 || b.size() != w.dims()[0] || x.cols() != w.dims()[1])
    throw ShapeError("linear_forward: W " + shape_to_string(w.dims()) + ", b " +
                     shape_to_string(b.dims()) + ", x " + shape_to_string(x.dims()));
  const std::size_t rows = x.rows(), in = w.dims()[1], out_dim = w.dims()[0];
  const Tensor wt = transposed(w);
  Shape dims = x.dims();
  dims.back() = out_dim;
  Tensor y(dims);
  kernels::gemm(x.data().data(), wt.data().data(), y.data().data(), rows, in, out_dim);
  kernels::add_bias(y.data(), b.data(), y.data());
  return y;
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "tanh") return Activation::kTanh;
  if (s == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + s + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "?";
}

CausalConvParams CausalConvParams::init(
    const std::string& prefix, std::size_t input_dim,
    std::span<const std::pair<std::size_t, std::size_t>> width_out, Activation act, Rng& rng) {
  if (width_out.empty()) throw ContractError("causal conv needs at least one layer");
  CausalConvParams p;
  p.activation = act;
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < width_out.size(); ++l) {
    const auto [width, out] = width_out[l];
    if (width == 0 || out == 0) throw ContractError("conv width and output dim must be >= 1");
    ConvLayerParams layer;
    layer.width = width;
    layer.in_dim = in;
    layer.out_dim = out;
    const std::string name = prefix + ".conv" + std::to_string(l);
    layer.w = Parameter(name + ".w", uniform_tensor({out, width * in}, width * in, rng));
    layer.b = Parameter(name + ".b", Tensor({out}));
    p.layers.push_back(std::move(layer));
    in = out;
  }
  return p;
}

std::size_t CausalConvParams::receptive_field() const {
  std::size_t r = 1;
  for (const auto& l : layers) r += l.width - 1;
  return r;
}

Tensor causal_conv_forward(const CausalConvParams& p, const Tensor& xs) {
  if (xs.empty()) throw ContractError("causal_conv_forward: empty sequence");
  Tensor cur = xs;
  for (const auto& layer : p.layers) {
    if (cur.cols() != layer.in_dim)
      throw ShapeError("causal_conv_forward: input dim " + std::to_string(cur.cols()) +
                       " != " + std::to_string(layer.in_dim));
    const std::size_t t_len = cur.rows(), k = layer.width * layer.in_dim;
    Tensor unfolded({t_len, k});
    for (std::size_t t = 0; t < t_len; ++t)
      kernels::causal_window(cur.data().data(), t, layer.in_dim, layer.width,
                             unfolded.row(t).data());
    const Tensor wt = transposed(layer.w.value);
    Tensor y({t_len, layer.out_dim});
    kernels::gemm(unfolded.data().data(), wt.data().data(), y.data().data(), t_len, k,
                  layer.out_dim);
    kernels::add_bias(y.data(), layer.b.value.data(), y.data());
    apply(p.activation, y.data(), y.data());
    cur = std::move(y);
  }
  return cur;
}

Tensor dropout_forward(const Tensor& x, double p, std::uint64_t seed) {
  Graph g;
  return ad::dropout(g.constant(x), p, seed).value();
}

LstmBinding bind(Graph& g, LstmLayerParams& p, bool trainable) {
  p.validate();
  return {ad::transpose(g.param(p.w, trainable)), ad::transpose(g.param(p.u, trainable)),
          g.param(p.b, trainable), p.hidden_dim};
}

LstmStepVars lstm_step(const LstmBinding& layer, Var xw_t, Var h, Var c) {
  Var pre = ad::add(xw_t, ad::matmul(h, layer.ut));
  pre = ad::add_bias(pre, layer.b);
  Var hc = ad::lstm_cell(pre, c);
  return {ad::row(hc, 0), ad::row(hc, 1)};
}

Var lstm_layer_forward(const LstmBinding& layer, Var xs) {
  const Tensor& x = xs.value();
  if (x.rank() != 2) throw ShapeError("LSTM input must be [T x D]");
  if (x.cols() != layer.wt.value().dims()[0])
    throw ShapeError("LSTM input dim " + std::to_string(x.cols()) + " != " +
                     std::to_string(layer.wt.value().dims()[0]));
  return ad::lstm_layer(xs, layer.wt, layer.ut, layer.b);
}

Var lstm_stack_forward(Graph& g, std::span<LstmLayerParams> stack, Var xs, double dropout_p,
                       bool training, std::uint64_t dropout_seed, bool trainable) {
  if (!(dropout_p >= 0.0 && dropout_p < 1.0))
    throw ContractError("dropout probability must be in [0, 1)");
  if (stack.empty()) throw ContractError("lstm_stack_forward: empty stack");
  Var cur = xs;
  for (std::size_t l = 0; l < stack.size(); ++l) {
    if (l > 0 && training && dropout_p > 0.0)
      cur = ad::dropout(cur, dropout_p, derive_seed(dropout_seed, l));
    cur = lstm_layer_forward(bind(g, stack[l], trainable), cur);
  }
  return cur;
}

Var linear_forward(Graph& g, LinearParams& p, Var x, bool trainable) {
  Var y = ad::matmul(x, ad::transpose(g.param(p.w, trainable)));
  return ad::add_bias(y, g.param(p.b, trainable));
}

Var apply_activation(Activation a, Var x) {
  switch (a) {
    case Activation::kRelu: return ad::relu(x);
    case Activation::kTanh: return ad::tanh(x);
    case Activation::kSigmoid: return ad::sigmoid(x);
  }
  return x;
}

Var causal_conv_forward(Graph& g, CausalConvParams& p, Var xs, bool trainable) {
  Var cur = xs;
  for (auto& layer : p.layers) {
    if (cur.value().cols() != layer.in_dim)
      throw ShapeError("causal_conv_forward: input dim " + std::to_string(cur.value().cols()) +
                       " != " + std::to_string(layer.in_dim));
    Var u = ad::causal_unfold(cur, layer.width);
    Var y = ad::matmul(u, ad::transpose(g.param(layer.w, trainable)));
    y = ad::add_bias(y, g.param(layer.b, trainable));
    cur = apply_activation(p.activation, y);
  }
  return cur;
}

std::vector<Parameter*> parameters(LstmLayerParams& p) { return {&p.w, &p.u, &p.b}; }
std::vector<Parameter*> parameters(LinearParams& p) { return {&p.w, &p.b}; }
std::vector<Parameter*> parameters(CausalConvParams& p) {
  std::vector<Parameter*> out;
  for (auto& l : p.layers) {
    out.push_back(&l.w);
    out.push_back(&l.b);
  }
  return out;
}

}  // namespace slu
