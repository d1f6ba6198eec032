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

#include "slu/graph.hpp"

#include <cmath>
#include <memory>
#include <random>

#include "slu/error.hpp"
#include "slu/kernels.hpp"

namespace slu {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kConstant: return "constant";
    case OpKind::kVariable: return "variable";
    case OpKind::kParameter: return "parameter";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kAddBias: return "add_bias";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kRelu: return "relu";
    case OpKind::kLogSoftmax: return "log_softmax";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kDot: return "dot";
    case OpKind::kPick: return "pick";
    case OpKind::kRow: return "row";
    case OpKind::kStackRows: return "stack_rows";
    case OpKind::kLstmCell: return "lstm_cell";
    case OpKind::kLstmLayer: return "lstm_layer";
    case OpKind::kCausalUnfold: return "causal_unfold";
    case OpKind::kEmbed: return "embed";
    case OpKind::kDropout: return "dropout";
    case OpKind::kCtc: return "ctc";
    case OpKind::kCustom: return "custom";
  }
  return "?";
}

const Tensor& Var::value() const { return graph->value(id); }
bool Var::requires_grad() const { return graph->requires_grad(id); }

Var Graph::constant(Tensor t) {
  Node n;
  n.kind = OpKind::kConstant;
  n.value = std::move(t);
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::variable(Tensor t) {
  Node n;
  n.kind = OpKind::kVariable;
  n.value = std::move(t);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::param(Parameter& p, bool trainable) {
  Node n;
  n.kind = OpKind::kParameter;
  n.external = &p.value;
  if (trainable) {
    if (p.grad.dims() != p.value.dims()) p.zero_grad();
    n.external_grad = &p.grad;
    n.requires_grad = true;
  }
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::record(OpKind kind, std::vector<std::uint32_t> inputs, Tensor value,
                  BackwardFn backward) {
  Node n;
  n.kind = kind;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  for (auto in : n.inputs) n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return {this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& Graph::value(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

double* Graph::grad_target(std::uint32_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (n.external_grad) return n.external_grad->data().data();
  if (n.grad.empty()) n.grad.assign(value(id).size(), 0.0);
  return n.grad.data();
}

std::span<const double> Graph::out_grad(std::uint32_t id) const {
  const Node& n = nodes_[id];
  if (n.external_grad) return n.external_grad->data();
  return n.grad;
}

std::span<const double> Graph::grad(Var v) const { return out_grad(v.id); }

void Graph::backward(Var loss) {
  if (loss.graph != this) throw ContractError("backward: loss belongs to another graph");
  if (value(loss.id).size() != 1)
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_to_string(value(loss.id).dims()));
  if (!nodes_[loss.id].requires_grad) return;
  grad_target(loss.id)[0] += 1.0;
  for (std::uint32_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward) continue;
    if (n.grad.empty()) continue;  // unreachable from the loss
    n.backward(*this, i);
  }
}

namespace ad {
namespace {

Graph& same_graph(Var a, Var b) {
  if (a.graph != b.graph || a.graph == nullptr)
    throw ContractError("operands belong to different graphs");
  return *a.graph;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.dims() != b.dims())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.dims()) +
                     " vs " + shape_to_string(b.dims()));
}

void require_rank2(const char* op, const Tensor& a) {
  if (a.rank() != 2)
    throw ShapeError(std::string(op) + ": expected a matrix, got " +
                     shape_to_string(a.dims()));
}

template <class Fn, class DFn>
Var unary(OpKind kind, Var a, Fn fn, DFn dfn) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  Tensor out(x.dims());
  fn(x.data(), out.data());
  const auto ia = a.id;
  return g.record(kind, {ia}, std::move(out), [ia, dfn](Graph& gr, std::uint32_t self) {
    double* ga = gr.grad_target(ia);
    if (!ga) return;
    auto go = gr.out_grad(self);
    const auto xs = gr.value(ia).data();
    const auto ys = gr.value(self).data();
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * dfn(xs[i], ys[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_rank2("matmul", x);
  require_rank2("matmul", y);
  if (x.dims()[1] != y.dims()[0])
    throw ShapeError("matmul: inner dimensions differ: " + shape_to_string(x.dims()) +
                     " x " + shape_to_string(y.dims()));
  const std::size_t m = x.dims()[0], k = x.dims()[1], n = y.dims()[1];
  Tensor out({m, n});
  kernels::gemm(x.data().data(), y.data().data(), out.data().data(), m, k, n);
  const auto ia = a.id, ib = b.id;
  return g.record(OpKind::kMatmul, {ia, ib}, std::move(out),
                  [ia, ib, m, k, n](Graph& gr, std::uint32_t self) {
                    auto go = gr.out_grad(self);
                    if (double* ga = gr.grad_target(ia)) {
                      // dA = dC * B^T
                      kernels::gemm_nt_acc(go.data(), gr.value(ib).data().data(), ga, m, n, k);
                    }
                    if (double* gb = gr.grad_target(ib)) {
                      // dB = A^T * dC
                      kernels::gemm_tn_acc(gr.value(ia).data().data(), go.data(), gb, m, k,
                                           n);
                    }
                  });
}

Var transpose(Var a) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  require_rank2("transpose", x);
  const std::size_t r = x.dims()[0], c = x.dims()[1];
  Tensor out({c, r});
  kernels::transpose(x.data().data(), out.data().data(), r, c);
  const auto ia = a.id;
  return g.record(OpKind::kTranspose, {ia}, std::move(out),
                  [ia, r, c](Graph& gr, std::uint32_t self) {
                    double* ga = gr.grad_target(ia);
                    if (!ga) return;
                    auto go = gr.out_grad(self);
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += go[j * r + i];
                  });
}

Var add(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same_shape("add", a.value(), b.value());
  Tensor out(a.dims());
  kernels::add(a.value().data(), b.value().data(), out.data());
  const auto ia = a.id, ib = b.id;
  return g.record(OpKind::kAdd, {ia, ib}, std::move(out),
                  [ia, ib](Graph& gr, std::uint32_t self) {
                    auto go = gr.out_grad(self);
                    for (auto id : {ia, ib})
                      if (double* gx = gr.grad_target(id))
                        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
                  });
}

Var mul(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same_shape("mul", a.value(), b.value());
  Tensor out(a.dims());
  const auto xa = a.value().data();
  const auto xb = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xa[i] * xb[i];
  const auto ia = a.id, ib = b.id;
  return g.record(OpKind::kMul, {ia, ib}, std::move(out),
                  [ia, ib](Graph& gr, std::uint32_t self) {
                    auto go = gr.out_grad(self);
                    const auto va = gr.value(ia).data();
                    const auto vb = gr.value(ib).data();
                    if (double* ga = gr.grad_target(ia))
                      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * vb[i];
                    if (double* gb = gr.grad_target(ib))
                      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * va[i];
                  });
}

Var scale(Var a, double s) {
  Graph& g = *a.graph;
  Tensor out(a.dims());
  const auto x = a.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * x[i];
  const auto ia = a.id;
  return g.record(OpKind::kScale, {ia}, std::move(out),
                  [ia, s](Graph& gr, std::uint32_t self) {
                    double* ga = gr.grad_target(ia);
                    if (!ga) return;
                    auto go = gr.out_grad(self);
                    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += s * go[i];
                  });
}

Var add_bias(Var x, Var bias) {
  Graph& g = same_graph(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.rank() != 1 || bv.size() != xv.cols())
    throw ShapeError("add_bias: bias " + shape_to_string(bv.dims()) +
                     " does not match rows of " + shape_to_string(xv.dims()));
  Tensor out(xv.dims());
  kernels::add_bias(xv.data(), bv.data(), out.data());
  const auto ix = x.id, ib = bias.id;
  const std::size_t n = bv.size();
  return g.record(OpKind::kAddBias, {ix, ib}, std::move(out),
                  [ix, ib, n](Graph& gr, std::uint32_t self) {
                    auto go = gr.out_grad(self);
                    if (double* gx = gr.grad_target(ix))
                      for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
                    if (double* gb = gr.grad_target(ib))
                      for (std::size_t i = 0; i < go.size(); ++i) gb[i % n] += go[i];
                  });
}

Var sigmoid(Var a) {
  return unary(
      OpKind::kSigmoid, a, [](auto x, auto y) { kernels::apply_sigmoid(x, y); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      OpKind::kTanh, a, [](auto x, auto y) { kernels::apply_tanh(x, y); },
      [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(
      OpKind::kRelu, a, [](auto x, auto y) { kernels::apply_relu(x, y); },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var elementwise(Elementwise kind, Var a) {
  switch (kind) {
    case Elementwise::kSigmoid: return sigmoid(a);
    case Elementwise::kTanh: return tanh(a);
    case Elementwise::kRelu: return relu(a);
    default: throw ContractError("binary elementwise op called with one argument");
  }
}

Var elementwise(Elementwise kind, Var a, Var b) {
  switch (kind) {
    case Elementwise::kAdd: return add(a, b);
    case Elementwise::kMul: return mul(a, b);
    default: throw ContractError("unary elementwise op called with two arguments");
  }
}

Var log_softmax(Var a) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  Tensor out(x.dims());
  const std::size_t rows = x.rows();
  for (std::size_t r = 0; r < rows; ++r) kernels::log_softmax_row(x.row(r), out.row(r));
  const auto ia = a.id;
  return g.record(OpKind::kLogSoftmax, {ia}, std::move(out),
                  [ia](Graph& gr, std::uint32_t self) {
                    double* ga = gr.grad_target(ia);
                    if (!ga) return;
                    const Tensor& y = gr.value(self);
                    auto go = gr.out_grad(self);
                    const std::size_t c = y.cols();
                    for (std::size_t r = 0; r < y.rows(); ++r) {
                      double s = 0.0;
                      for (std::size_t j = 0; j < c; ++j) s += go[r * c + j];
                      for (std::size_t j = 0; j < c; ++j)
                        ga[r * c + j] += go[r * c + j] - std::exp(y[r * c + j]) * s;
                    }
                  });
}

Var sum(Var a) {
  Graph& g = *a.graph;
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const auto ia = a.id;
  return g.record(OpKind::kSum, {ia}, Tensor::scalar(s),
                  [ia](Graph& gr, std::uint32_t self) {
                    double* ga = gr.grad_target(ia);
                    if (!ga) return;
                    const double go = gr.out_grad(self)[0];
                    const std::size_t n = gr.value(ia).size();
                    for (std::size_t i = 0; i < n; ++i) ga[i] += go;
                  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var dot(Var a, Var b) {
  Graph& g = same_graph(a, b);
  require_same_shape("dot", a.value(), b.value());
  double s = 0.0;
  const auto xa = a.value().data();
  const auto xb = b.value().data();
  for (std::size_t i = 0; i < xa.size(); ++i) s += xa[i] * xb[i];
  const auto ia = a.id, ib = b.id;
  return g.record(OpKind::kDot, {ia, ib}, Tensor::scalar(s),
                  [ia, ib](Graph& gr, std::uint32_t self) {
                    const double go = gr.out_grad(self)[0];
                    const auto va = gr.value(ia).data();
                    const auto vb = gr.value(ib).data();
                    if (double* ga = gr.grad_target(ia))
                      for (std::size_t i = 0; i < va.size(); ++i) ga[i] += go * vb[i];
                    if (double* gb = gr.grad_target(ib))
                      for (std::size_t i = 0; i < vb.size(); ++i) gb[i] += go * va[i];
                  });
}

Var pick(Var a, std::vector<std::size_t> index) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  if (index.size() != rows)
    throw ShapeError("pick: " + std::to_string(index.size()) + " indices for " +
                     std::to_string(rows) + " rows");
  std::vector<double> vals(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (index[r] >= cols)
      throw ContractError("pick: index " + std::to_string(index[r]) + " out of range " +
                          std::to_string(cols));
    vals[r] = x[r * cols + index[r]];
  }
  const auto ia = a.id;
  return g.record(OpKind::kPick, {ia}, Tensor::vector(std::move(vals)),
                  [ia, cols, index = std::move(index)](Graph& gr, std::uint32_t self) {
                    double* ga = gr.grad_target(ia);
                    if (!ga) return;
                    auto go = gr.out_grad(self);
                    for (std::size_t r = 0; r < index.size(); ++r)
                      ga[r * cols + index[r]] += go[r];
                  });
}

Var row(Var a, std::size_t r) {
  Graph& g = *a.graph;
  const Tensor& x = a.value();
  require_rank2("row", x);
  if (r >= x.rows()) throw ShapeError("row index out of range");
  const std::size_t c = x.cols();
  auto src = x.row(r);
  Tensor out({1, c}, std::vector<double>(src.begin(), src.end()));
  const auto ia = a.id;
  return g.record(OpKind::kRow, {ia}, std::move(out),
                  [ia, r, c](Graph& gr, std::uint32_t self) {
                    double* ga = gr.grad_target(ia);
                    if (!ga) return;
                    auto go = gr.out_grad(self);
                    for (std::size_t j = 0; j < c; ++j) ga[r * c + j] += go[j];
                  });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ContractError("stack_rows: no rows");
  Graph& g = *rows.front().graph;
  const std::size_t c = rows.front().value().size();
  std::vector<double> data;
  data.reserve(rows.size() * c);
  std::vector<std::uint32_t> ids;
  ids.reserve(rows.size());
  for (const Var& v : rows) {
    if (v.graph != &g) throw ContractError("stack_rows: mixed graphs");
    if (v.value().size() != c) throw ShapeError("stack_rows: ragged rows");
    auto d = v.value().data();
    data.insert(data.end(), d.begin(), d.end());
    ids.push_back(v.id);
  }
  Tensor out({rows.size(), c}, std::move(data));
  return g.record(OpKind::kStackRows, ids, std::move(out),
                  [c](Graph& gr, std::uint32_t self) {
                    auto go = gr.out_grad(self);
                    const auto& in = gr.inputs(self);
                    for (std::size_t r = 0; r < in.size(); ++r)
                      if (double* gx = gr.grad_target(in[r]))
                        for (std::size_t j = 0; j < c; ++j) gx[j] += go[r * c + j];
                  });
}

Var lstm_cell(Var pre, Var c_prev) {
  Graph& g = same_graph(pre, c_prev);
  const std::size_t h = c_prev.value().size();
  if (pre.value().size() != 4 * h)
    throw ShapeError("lstm_cell: pre-activation " + shape_to_string(pre.dims()) +
                     " is not 4 x " + std::to_string(h));
  Tensor out({2, h});
  auto o = out.data();
  kernels::lstm_cell(pre.value().data(), c_prev.value().data(), o.subspan(0, h),
                     o.subspan(h, h));
  const auto ip = pre.id, ic = c_prev.id;
  return g.record(
      OpKind::kLstmCell, {ip, ic}, std::move(out), [ip, ic, h](Graph& gr, std::uint32_t self) {
        auto go = gr.out_grad(self);
        const auto z = gr.value(ip).data();
        const auto cp = gr.value(ic).data();
        const auto c = gr.value(self).data().subspan(h, h);
        double* gp = gr.grad_target(ip);
        double* gc = gr.grad_target(ic);
        for (std::size_t j = 0; j < h; ++j) {
          const double ig = kernels::sigmoid(z[j]);
          const double fg = kernels::sigmoid(z[h + j]);
          const double gg = std::tanh(z[2 * h + j]);
          const double og = kernels::sigmoid(z[3 * h + j]);
          const double tc = std::tanh(c[j]);
          const double dh = go[j];
          const double dc = go[h + j] + dh * og * (1.0 - tc * tc);
          if (gp) {
            gp[j] += dc * gg * ig * (1.0 - ig);
            gp[h + j] += dc * cp[j] * fg * (1.0 - fg);
            gp[2 * h + j] += dc * ig * (1.0 - gg * gg);
            gp[3 * h + j] += dh * tc * og * (1.0 - og);
          }
          if (gc) gc[j] += dc * fg;
        }
      });
}

Var lstm_layer(Var xs, Var wt, Var ut, Var b) {
  Graph& g = same_graph(xs, wt);
  same_graph(ut, b);
  same_graph(xs, b);
  const Tensor& x = xs.value();
  require_rank2("lstm_layer", x);
  require_rank2("lstm_layer", wt.value());
  require_rank2("lstm_layer", ut.value());
  const std::size_t t_len = x.rows(), d = x.cols(), h = ut.value().dims()[0], g4 = 4 * h;
  if (wt.value().dims() != Shape{d, g4} || ut.value().dims() != Shape{h, g4} ||
      b.value().size() != g4)
    throw ShapeError("lstm_layer: input " + shape_to_string(x.dims()) + ", wt " +
                     shape_to_string(wt.dims()) + ", ut " + shape_to_string(ut.dims()) +
                     ", b " + shape_to_string(b.dims()));
  if (t_len == 0) throw ContractError("lstm_layer: empty sequence");

  // Forward cache: biased pre-activations and cell states per frame.
  struct Cache {
    std::vector<double> pre;
    std::vector<double> c;
  };
  auto cache = std::make_shared<Cache>();
  cache->pre.assign(t_len * g4, 0.0);
  cache->c.assign(t_len * h, 0.0);
  std::vector<double> xw(t_len * g4), hu(g4);
  kernels::gemm(x.data().data(), wt.value().data().data(), xw.data(), t_len, d, g4);
  Tensor out({t_len, h});
  const std::vector<double> zeros(h, 0.0);
  for (std::size_t t = 0; t < t_len; ++t) {
    const double* h_prev = t ? out.row(t - 1).data() : zeros.data();
    const double* c_prev = t ? cache->c.data() + (t - 1) * h : zeros.data();
    std::span<double> pre(cache->pre.data() + t * g4, g4);
    kernels::gemm(h_prev, ut.value().data().data(), hu.data(), 1, h, g4);
    kernels::add(std::span<const double>(xw.data() + t * g4, g4), hu, pre);
    kernels::add_bias(pre, b.value().data(), pre);
    kernels::lstm_cell(pre, std::span<const double>(c_prev, h), out.row(t),
                       std::span<double>(cache->c.data() + t * h, h));
  }

  const auto ix = xs.id, iw = wt.id, iu = ut.id, ib = b.id;
  return g.record(
      OpKind::kLstmLayer, {ix, iw, iu, ib}, std::move(out),
      [ix, iw, iu, ib, t_len, d, h, g4, cache](Graph& gr, std::uint32_t self) {
        auto go = gr.out_grad(self);
        const Tensor& hs = gr.value(self);
        // u = ut^T lets the recurrent gradient use the row-times-matrix kernel.
        std::vector<double> u(g4 * h);
        kernels::transpose(gr.value(iu).data().data(), u.data(), h, g4);
        std::vector<double> dpre(t_len * g4), dh_next(h, 0.0), dc_next(h, 0.0);
        for (std::size_t t = t_len; t-- > 0;) {
          const double* z = cache->pre.data() + t * g4;
          const double* c = cache->c.data() + t * h;
          const double* cp = t ? cache->c.data() + (t - 1) * h : nullptr;
          double* dz = dpre.data() + t * g4;
          for (std::size_t j = 0; j < h; ++j) {
            const double ig = kernels::sigmoid(z[j]);
            const double fg = kernels::sigmoid(z[h + j]);
            const double gg = std::tanh(z[2 * h + j]);
            const double og = kernels::sigmoid(z[3 * h + j]);
            const double tc = std::tanh(c[j]);
            const double dh = go[t * h + j] + dh_next[j];
            const double dc = dc_next[j] + dh * og * (1.0 - tc * tc);
            dz[j] = dc * gg * ig * (1.0 - ig);
            dz[h + j] = cp ? dc * cp[j] * fg * (1.0 - fg) : 0.0;
            dz[2 * h + j] = dc * ig * (1.0 - gg * gg);
            dz[3 * h + j] = dh * tc * og * (1.0 - og);
            dc_next[j] = dc * fg;
          }
          // dh_{t-1} = dz * ut^T
          std::fill(dh_next.begin(), dh_next.end(), 0.0);
          if (t) kernels::gemm_acc(dz, u.data(), dh_next.data(), 1, g4, h);
        }
        if (double* gx = gr.grad_target(ix)) {
          std::vector<double> w(g4 * d);
          kernels::transpose(gr.value(iw).data().data(), w.data(), d, g4);
          kernels::gemm_acc(dpre.data(), w.data(), gx, t_len, g4, d);
        }
        if (double* gw = gr.grad_target(iw))
          kernels::gemm_tn_acc(gr.value(ix).data().data(), dpre.data(), gw, t_len, d, g4);
        if (double* gu = gr.grad_target(iu); gu && t_len > 1)
          kernels::gemm_tn_acc(hs.data().data(), dpre.data() + g4, gu, t_len - 1, h, g4);
        if (double* gb = gr.grad_target(ib))
          for (std::size_t t = 0; t < t_len; ++t)
            for (std::size_t k = 0; k < g4; ++k) gb[k] += dpre[t * g4 + k];
      });
}

Var causal_unfold(Var xs, std::size_t width) {
  Graph& g = *xs.graph;
  const Tensor& x = xs.value();
  require_rank2("causal_unfold", x);
  if (width == 0) throw ContractError("causal_unfold: width must be >= 1");
  const std::size_t t_len = x.rows(), d = x.cols();
  Tensor out({t_len, width * d});
  for (std::size_t t = 0; t < t_len; ++t)
    kernels::causal_window(x.data().data(), t, d, width, out.row(t).data());
  const auto ia = xs.id;
  return g.record(OpKind::kCausalUnfold, {ia}, std::move(out),
                  [ia, t_len, d, width](Graph& gr, std::uint32_t self) {
                    double* ga = gr.grad_target(ia);
                    if (!ga) return;
                    auto go = gr.out_grad(self);
                    for (std::size_t t = 0; t < t_len; ++t)
                      for (std::size_t w = 0; w < width; ++w) {
                        const std::size_t back = width - 1 - w;
                        if (back > t) continue;
                        const double* src = go.data() + t * width * d + w * d;
                        double* dst = ga + (t - back) * d;
                        for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                      }
                  });
}

Var embed(Var table, std::span<const std::size_t> ids) {
  Graph& g = *table.graph;
  const Tensor& tv = table.value();
  require_rank2("embed", tv);
  if (ids.empty()) throw ContractError("embed: empty id sequence");
  const std::size_t e = tv.cols();
  Tensor out({ids.size(), e});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tv.rows())
      throw ContractError("embed: id " + std::to_string(ids[i]) + " out of range");
    auto src = tv.row(ids[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  const auto it = table.id;
  std::vector<std::size_t> idv(ids.begin(), ids.end());
  return g.record(OpKind::kEmbed, {it}, std::move(out),
                  [it, e, idv = std::move(idv)](Graph& gr, std::uint32_t self) {
                    double* gt = gr.grad_target(it);
                    if (!gt) return;
                    auto go = gr.out_grad(self);
                    for (std::size_t i = 0; i < idv.size(); ++i)
                      for (std::size_t j = 0; j < e; ++j) gt[idv[i] * e + j] += go[i * e + j];
                  });
}

Var dropout(Var x, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p < 1.0))
    throw ContractError("dropout: probability must be in [0, 1), got " + std::to_string(p));
  if (p == 0.0) return x;
  Graph& g = *x.graph;
  std::mt19937_64 rng(seed);
  const double keep_scale = 1.0 / (1.0 - p);
  const Tensor& xv = x.value();
  std::vector<double> mask(xv.size());
  for (double& m : mask) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    m = u >= p ? keep_scale : 0.0;
  }
  Tensor out(xv.dims());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = xv[i] * mask[i];
  const auto ia = x.id;
  return g.record(OpKind::kDropout, {ia}, std::move(out),
                  [ia, mask = std::move(mask)](Graph& gr, std::uint32_t self) {
                    double* ga = gr.grad_target(ia);
                    if (!ga) return;
                    auto go = gr.out_grad(self);
                    for (std::size_t i = 0; i < mask.size(); ++i) ga[i] += go[i] * mask[i];
                  });
}

}  // namespace ad
}  // namespace slu
