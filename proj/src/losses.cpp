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

#include "slu/losses.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "slu/error.hpp"
#include "slu/kernels.hpp"

namespace slu {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct CtcLattice {
  std::vector<std::size_t> ext;  // blank-interleaved label, length 2L+1
  std::vector<double> alpha;     // [T x S]
  std::vector<double> beta;      // [T x S], excludes the emission at t
  double log_likelihood = kNegInf;
};

void check_ctc_inputs(const Tensor& lp, const CtcLabelSequence& label) {
  label.validate();
  if (lp.rank() != 2) throw ShapeError("ctc_loss: log_probs must be [T x C]");
  for (auto tok : label.tokens)
    if (tok >= lp.cols())
      throw ContractError("ctc_loss: token " + std::to_string(tok) + " >= classes " +
                          std::to_string(lp.cols()));
  if (label.blank_id >= lp.cols()) throw ContractError("ctc_loss: blank id out of range");
  if (lp.rows() < label.min_frames())
    throw InfeasibleLabelError("ctc_loss: " + std::to_string(lp.rows()) +
                               " frames cannot realise a label needing " +
                               std::to_string(label.min_frames()));
}

CtcLattice ctc_lattice(const Tensor& lp, const CtcLabelSequence& label, bool with_beta) {
  check_ctc_inputs(lp, label);
  CtcLattice lat;
  lat.ext.push_back(label.blank_id);
  for (auto tok : label.tokens) {
    lat.ext.push_back(tok);
    lat.ext.push_back(label.blank_id);
  }
  const std::size_t t_len = lp.rows(), c = lp.cols(), s_len = lat.ext.size();
  const auto& ext = lat.ext;
  auto skip_allowed = [&](std::size_t s) {
    return s >= 2 && ext[s] != label.blank_id && ext[s] != ext[s - 2];
  };
  lat.alpha.assign(t_len * s_len, kNegInf);
  double* a = lat.alpha.data();
  a[0] = lp[ext[0]];
  a[1] = lp[ext[1]];
  for (std::size_t t = 1; t < t_len; ++t) {
    const double* prev = a + (t - 1) * s_len;
    double* cur = a + t * s_len;
    for (std::size_t s = 0; s < s_len; ++s) {
      double v = prev[s];
      if (s >= 1) v = kernels::log_add(v, prev[s - 1]);
      if (skip_allowed(s)) v = kernels::log_add(v, prev[s - 2]);
      cur[s] = v == kNegInf ? kNegInf : v + lp[t * c + ext[s]];
    }
  }
  const double* last = a + (t_len - 1) * s_len;
  lat.log_likelihood = kernels::log_add(last[s_len - 1], last[s_len - 2]);
  if (!with_beta) return lat;

  lat.beta.assign(t_len * s_len, kNegInf);
  double* b = lat.beta.data();
  b[(t_len - 1) * s_len + s_len - 1] = 0.0;
  b[(t_len - 1) * s_len + s_len - 2] = 0.0;
  for (std::size_t t = t_len - 1; t-- > 0;) {
    const double* next = b + (t + 1) * s_len;
    double* cur = b + t * s_len;
    for (std::size_t s = 0; s < s_len; ++s) {
      double v = kNegInf;
      for (std::size_t sp = s; sp <= s + 2 && sp < s_len; ++sp) {
        if (sp == s + 2 && !skip_allowed(sp)) continue;
        if (next[sp] == kNegInf) continue;
        v = kernels::log_add(v, next[sp] + lp[(t + 1) * c + ext[sp]]);
      }
      cur[s] = v;
    }
  }
  return lat;
}

}  // namespace

void CtcLabelSequence::validate() const {
  if (tokens.empty()) throw ContractError("CTC label must contain at least one token");
  for (auto t : tokens)
    if (t == blank_id) throw ContractError("CTC label contains the blank id");
}

std::size_t CtcLabelSequence::min_frames() const {
  std::size_t n = tokens.size();
  for (std::size_t i = 1; i < tokens.size(); ++i)
    if (tokens[i] == tokens[i - 1]) ++n;
  return n;
}

MtlWeight::MtlWeight(double alpha) : alpha_(alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ContractError("MTL weight must lie in [0, 1], got " + std::to_string(alpha));
}

Var frame_ce_loss(Var logits, std::span<const std::size_t> alignment) {
  const Tensor& x = logits.value();
  if (alignment.size() != x.rows())
    throw ContractError("frame_ce_loss: alignment has " + std::to_string(alignment.size()) +
                        " frames, logits have " + std::to_string(x.rows()));
  for (auto p : alignment)
    if (p >= x.cols())
      throw ContractError("frame_ce_loss: phone id " + std::to_string(p) + " >= " +
                          std::to_string(x.cols()));
  Var picked = ad::pick(ad::log_softmax(logits), {alignment.begin(), alignment.end()});
  return ad::scale(ad::sum(picked), -1.0 / static_cast<double>(alignment.size()));
}

Var ctc_loss(Var log_probs, const CtcLabelSequence& label) {
  Graph& g = *log_probs.graph;
  const Tensor& lp = log_probs.value();
  auto lat = std::make_shared<CtcLattice>(ctc_lattice(lp, label, true));
  const double loss = -lat->log_likelihood;
  if (!std::isfinite(loss))
    throw InfeasibleLabelError("ctc_loss: label has zero probability under log_probs");
  const auto id = log_probs.id;
  return g.record(OpKind::kCtc, {id}, Tensor::scalar(loss),
                  [id, lat](Graph& gr, std::uint32_t self) {
                    double* gx = gr.grad_target(id);
                    if (!gx) return;
                    const double go = gr.out_grad(self)[0];
                    const Tensor& x = gr.value(id);
                    const std::size_t t_len = x.rows(), c = x.cols(), s_len = lat->ext.size();
                    for (std::size_t t = 0; t < t_len; ++t)
                      for (std::size_t s = 0; s < s_len; ++s) {
                        const double ab = lat->alpha[t * s_len + s] + lat->beta[t * s_len + s];
                        if (ab == kNegInf) continue;
                        gx[t * c + lat->ext[s]] -= go * std::exp(ab - lat->log_likelihood);
                      }
                  });
}

double ctc_loss(const Tensor& log_probs, const CtcLabelSequence& label) {
  const double ll = ctc_lattice(log_probs, label, false).log_likelihood;
  if (ll == kNegInf) throw InfeasibleLabelError("ctc_loss: label has zero probability");
  return -ll;
}

double ctc_loss_bruteforce(const Tensor& log_probs, const CtcLabelSequence& label) {
  label.validate();
  if (log_probs.rank() != 2) throw ShapeError("ctc_loss_bruteforce: log_probs must be [T x C]");
  const std::size_t t_len = log_probs.rows(), c = log_probs.cols();
  double paths = 1.0;
  for (std::size_t t = 0; t < t_len; ++t) paths *= static_cast<double>(c);
  if (paths > 1e7)
    throw ContractError("ctc_loss_bruteforce: " + std::to_string(paths) + " paths exceed 1e7");
  std::vector<std::size_t> path(t_len, 0);
  std::vector<std::size_t> collapsed;
  double total = kNegInf;
  const auto n = static_cast<std::size_t>(paths);
  for (std::size_t code = 0; code < n; ++code) {
    std::size_t rem = code;
    for (std::size_t t = 0; t < t_len; ++t) {
      path[t] = rem % c;
      rem /= c;
    }
    collapsed.clear();
    for (std::size_t t = 0; t < t_len; ++t) {
      if (t > 0 && path[t] == path[t - 1]) continue;
      if (path[t] != label.blank_id) collapsed.push_back(path[t]);
    }
    if (collapsed != label.tokens) continue;
    double lp = 0.0;
    for (std::size_t t = 0; t < t_len; ++t) lp += log_probs[t * c + path[t]];
    total = kernels::log_add(total, lp);
  }
  return -total;
}

Var intent_ce_loss(Var logits, std::size_t intent_id) {
  const Tensor& x = logits.value();
  if (x.rows() != 1) throw ShapeError("intent_ce_loss: logits must be a single row");
  if (intent_id >= x.cols())
    throw ContractError("intent_ce_loss: intent id " + std::to_string(intent_id) +
                        " out of range " + std::to_string(x.cols()));
  return ad::scale(ad::sum(ad::pick(ad::log_softmax(logits), {intent_id})), -1.0);
}

Var mtl_loss(Var intent_loss, Var ctc_word_loss, MtlWeight w) {
  return ad::add(ad::scale(intent_loss, w.alpha()), ad::scale(ctc_word_loss, 1.0 - w.alpha()));
}

double mtl_loss(double intent_loss, double ctc_word_loss, MtlWeight w) {
  return w.alpha() * intent_loss + (1.0 - w.alpha()) * ctc_word_loss;
}

}  // namespace slu
