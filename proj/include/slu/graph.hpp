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
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "slu/tensor.hpp"

namespace slu {

// A named trainable tensor. grad has the shape of value and is accumulated
// into (never reset) by Graph::backward.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.dims()) {}
  void zero_grad() { grad = Tensor(value.dims()); }
};

enum class OpKind : std::uint8_t {
  kConstant,
  kVariable,
  kParameter,
  kMatmul,
  kTranspose,
  kAdd,
  kMul,
  kScale,
  kAddBias,
  kSigmoid,
  kTanh,
  kRelu,
  kLogSoftmax,
  kSum,
  kMean,
  kDot,
  kPick,
  kRow,
  kStackRows,
  kLstmCell,
  kLstmLayer,
  kCausalUnfold,
  kEmbed,
  kDropout,
  kCtc,
  kCustom,
};

const char* op_name(OpKind kind);

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  const Shape& dims() const { return value().dims(); }
  bool requires_grad() const;
};

// Define-by-run tape. Nodes are appended in topological order; backward()
// walks them in exact reverse insertion order.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::uint32_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor t);
  // Leaf that owns its gradient.
  Var variable(Tensor t);
  // Leaf bound to a parameter. With trainable=false the node is a constant
  // view and no gradient ever reaches p.grad.
  Var param(Parameter& p, bool trainable = true);

  Var record(OpKind kind, std::vector<std::uint32_t> inputs, Tensor value,
             BackwardFn backward);

  // Populates gradients of every node that requires them. The loss must be a
  // scalar ({1}-shaped).
  void backward(Var loss);

  const Tensor& value(std::uint32_t id) const;
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  OpKind kind(std::uint32_t id) const { return nodes_[id].kind; }
  const std::vector<std::uint32_t>& inputs(std::uint32_t id) const {
    return nodes_[id].inputs;
  }
  std::size_t size() const noexcept { return nodes_.size(); }

  // Gradient of a node after backward(); empty span if none was computed.
  std::span<const double> grad(Var v) const;
  // Accumulation target for op backward functions; nullptr when the node does
  // not require a gradient.
  double* grad_target(std::uint32_t id);
  std::span<const double> out_grad(std::uint32_t id) const;

 private:
  struct Node {
    OpKind kind = OpKind::kConstant;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    const Tensor* external = nullptr;
    Tensor* external_grad = nullptr;
    std::vector<double> grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;  // stable references across push_back
};

namespace ad {

enum class Elementwise { kAdd, kMul, kSigmoid, kTanh, kRelu };

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
// Adds a length-n bias to every row of a [.. x n] tensor.
Var add_bias(Var x, Var bias);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var elementwise(Elementwise kind, Var a);
Var elementwise(Elementwise kind, Var a, Var b);
// Row-wise over the last dimension.
Var log_softmax(Var a);
Var sum(Var a);
Var mean(Var a);
Var dot(Var a, Var b);
// out[r] = a[r, index[r]] for a [R x C] matrix.
Var pick(Var a, std::vector<std::size_t> index);
// Row r of a matrix as a [1 x C] matrix.
Var row(Var a, std::size_t r);
Var stack_rows(std::span<const Var> rows);
// pre [1 x 4H], c_prev [1 x H] -> [2 x H] holding (h, c).
Var lstm_cell(Var pre, Var c_prev);
// Whole LSTM layer over xs [T x D] with pre-transposed weights wt [D x 4H],
// ut [H x 4H] and bias b [4H]; returns h for every frame [T x H]. Frames are
// evaluated with the same kernels as LstmKernel::step.
Var lstm_layer(Var xs, Var wt, Var ut, Var b);
// [T x D] -> [T x width*D] causal windows, zero-padded on the left.
Var causal_unfold(Var xs, std::size_t width);
// Rows of table [V x E] selected by ids -> [L x E].
Var embed(Var table, std::span<const std::size_t> ids);
// Inverted dropout with a mask drawn from the seed.
Var dropout(Var x, double p, std::uint64_t seed);

}  // namespace ad
}  // namespace slu
