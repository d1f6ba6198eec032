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

#include "slu/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "slu/error.hpp"
#include "slu/log.hpp"
#include "slu/losses.hpp"
#include "slu/rng.hpp"

namespace slu {
namespace {

using nlohmann::json;

struct ParamGroup {
  std::vector<Parameter*> params;
  double lr_scale = 1.0;
  AdamState adam;
};

// Builds the loss of one utterance. training enables dropout.
using LossFn = std::function<Var(Graph&, std::size_t index, bool training, std::uint64_t seed)>;

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> lengths,
                                                   std::size_t batch_size) {
  std::vector<std::size_t> order(lengths.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lengths[a] < lengths[b]; });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(
                                             std::min(order.size(), i + batch_size)));
  return batches;
}

TrainHistory run_training(const std::string& phase, std::vector<ParamGroup>& groups,
                          std::span<const std::size_t> train_lengths, std::size_t n_valid,
                          const LossFn& loss_fn, const LossFn& valid_fn,
                          const TrainOptions& opt) {
  if (train_lengths.empty()) throw DataError(phase + ": empty training set");
  if (n_valid == 0) throw DataError(phase + ": empty validation set");
  if (opt.batch_size == 0 || opt.max_epochs == 0 || !(opt.lr > 0.0))
    throw ConfigError(phase + ": batch size, epochs and lr must be positive");

  std::vector<Parameter*> all;
  for (auto& g : groups) all.insert(all.end(), g.params.begin(), g.params.end());
  for (auto* p : all) p->zero_grad();

  TrainSchedule sched;
  sched.lr = opt.lr;
  sched.patience = opt.patience;
  TrainHistory hist;
  std::vector<Tensor> best;
  auto batches = make_batches(train_lengths, opt.batch_size);
  const std::uint64_t batch_seed = derive_seed(opt.seed, "batching");
  const std::uint64_t dropout_seed = derive_seed(opt.seed, "dropout");

  for (std::size_t epoch = 1; epoch <= opt.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(derive_seed(batch_seed, epoch));
    std::shuffle(batches.begin(), batches.end(), rng.engine());
    double train_sum = 0.0;
    for (const auto& batch : batches) {
      for (auto* p : all) p->grad.fill(0.0);
      const double scale = 1.0 / static_cast<double>(batch.size());
      for (std::size_t idx : batch) {
        Graph g;
        const std::uint64_t s = derive_seed(dropout_seed, epoch * train_lengths.size() + idx);
        Var loss = loss_fn(g, idx, true, s);
        train_sum += loss.value().item();
        g.backward(ad::scale(loss, scale));
      }
      clip_grad_norm(all, opt.clip_norm);
      for (auto& g : groups) adam_step(g.adam, g.params, sched.lr * g.lr_scale);
    }
    double val_sum = 0.0;
    for (std::size_t i = 0; i < n_valid; ++i) {
      Graph g;
      val_sum += valid_fn(g, i, false, 0).value().item();
    }
    const double train_loss = train_sum / static_cast<double>(train_lengths.size());
    const double val_loss = val_sum / static_cast<double>(n_valid);
    if (!std::isfinite(val_loss)) throw DataError(phase + ": validation loss is not finite");
    const double lr_used = sched.lr;
    const auto decision = schedule_update(sched, val_loss);
    hist.epochs.push_back({epoch, train_loss, val_loss, lr_used});
    if (decision.improved) {
      hist.best_epoch = epoch;
      hist.best_val = val_loss;
      best.clear();
      for (auto* p : all) best.push_back(p->value);
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char line[200];
    std::snprintf(line, sizeof line, "%s epoch %zu train %.5f valid %.5f lr %.3g%s (%.1fs)",
                  phase.c_str(), epoch, train_loss, val_loss, lr_used,
                  decision.improved ? " *" : "", secs);
    log_info(line);
    if (decision.stop) {
      hist.early_stopped = true;
      break;
    }
  }
  if (opt.restore_best && !best.empty())
    for (std::size_t i = 0; i < all.size(); ++i) all[i]->value = best[i];
  for (auto* p : all) p->zero_grad();
  return hist;
}

Tensor phone_embedding(const PhonemeParams& theta_p, const Utterance& u, std::size_t subsample) {
  return subsample_rows(phoneme_forward(theta_p, u.features.frames).embedding, subsample);
}

CtcLabelSequence word_target(const BpeVocab& vocab, const Utterance& u, std::size_t frames) {
  CtcLabelSequence label{vocab.encode(u.text), BpeVocab::kBlank};
  if (label.tokens.empty()) throw DataError("utterance '" + u.id + "' has an empty transcript");
  if (frames < label.min_frames())
    throw DataError("utterance '" + u.id + "' is CTC-infeasible: " + std::to_string(frames) +
                    " frames for " + std::to_string(label.min_frames()) + " required");
  return label;
}

std::size_t intent_target(const Utterance& u, std::size_t num_intents) {
  if (!u.intent) throw DataError("utterance '" + u.id + "' has no intent label");
  if (u.intent->id >= num_intents)
    throw DataError("utterance '" + u.id + "' has intent id " + std::to_string(u.intent->id) +
                    " outside " + std::to_string(num_intents) + " intents");
  return u.intent->id;
}

GraphOptions graph_options(const TrainOptions& opt, bool training, std::uint64_t seed) {
  GraphOptions g;
  g.dropout = opt.dropout;
  g.training = training;
  g.dropout_seed = seed;
  return g;
}

}  // namespace

namespace detail {
TrainHistory run_param_training(const std::string& phase, std::vector<Parameter*> params,
                                std::span<const std::size_t> train_lengths, std::size_t n_valid,
                                const UttLossFn& loss_fn, const UttLossFn& valid_fn,
                                const TrainOptions& opt) {
  std::vector<ParamGroup> groups(1);
  groups[0].params = std::move(params);
  return run_training(phase, groups, train_lengths, n_valid, loss_fn, valid_fn, opt);
}
}  // namespace detail

void adam_step(AdamState& state, std::span<Parameter* const> params, double lr) {
  if (state.m.empty()) {
    for (auto* p : params) {
      state.m.emplace_back(p->value.size(), 0.0);
      state.v.emplace_back(p->value.size(), 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw ContractError("adam_step: parameter count changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->grad.dims() != params[i]->value.dims() || state.m[i].size() != params[i]->value.size())
      throw ContractError("adam_step: shape mismatch for " + params[i]->name);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i]->value.data();
    auto g = params[i]->grad.data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
      v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      w[k] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (auto* p : params)
    for (double g : p->grad.data()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto* p : params)
      for (double& g : p->grad.data()) g *= s;
  }
  return norm;
}

ScheduleDecision schedule_update(TrainSchedule& sched, double epoch_val_loss) {
  if (!std::isfinite(epoch_val_loss))
    throw ContractError("schedule_update: validation loss must be finite");
  ScheduleDecision d;
  d.improved = epoch_val_loss < sched.best_val;
  if (d.improved) {
    sched.best_val = epoch_val_loss;
    sched.epochs_without_improvement = 0;
  } else {
    ++sched.epochs_without_improvement;
  }
  if (sched.halve_on_val_increase && !std::isnan(sched.prev_val) &&
      epoch_val_loss > sched.prev_val)
    sched.lr *= 0.5;
  sched.prev_val = epoch_val_loss;
  d.lr = sched.lr;
  d.stop = sched.epochs_without_improvement >= sched.patience;
  return d;
}

void write_history_csv(const TrainHistory& h, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "epoch,train_loss,val_loss,lr\n";
  char line[160];
  for (const auto& e : h.epochs) {
    std::snprintf(line, sizeof line, "%zu,%.10g,%.10g,%.10g\n", e.epoch, e.train_loss,
                  e.val_loss, e.lr);
    os << line;
  }
  if (!os) throw IoError("failed writing " + path.string());
}

void to_json(json& j, const TrainOptions& o) {
  j = json{{"lr", o.lr},           {"batch_size", o.batch_size}, {"max_epochs", o.max_epochs},
           {"patience", o.patience}, {"clip_norm", o.clip_norm},   {"dropout", o.dropout},
           {"seed", o.seed},       {"restore_best", o.restore_best}};
}

void from_json(const json& j, TrainOptions& o) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  try {
    get("lr", o.lr);
    get("batch_size", o.batch_size);
    get("max_epochs", o.max_epochs);
    get("patience", o.patience);
    get("clip_norm", o.clip_norm);
    get("dropout", o.dropout);
    get("seed", o.seed);
    get("restore_best", o.restore_best);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid training options: ") + e.what());
  }
}

TrainHistory train_phoneme(PhonemeParams& theta_p, std::span<const Utterance> train,
                           std::span<const Utterance> valid, const TrainOptions& opt) {
  auto check = [&](std::span<const Utterance> utts) {
    for (const auto& u : utts)
      if (u.phones.size() != u.features.num_frames())
        throw DataError("utterance '" + u.id + "' lacks a frame-level phone alignment");
  };
  check(train);
  check(valid);
  std::vector<std::size_t> lengths;
  for (const auto& u : train) lengths.push_back(u.features.num_frames());
  auto loss_on = [&theta_p](std::span<const Utterance> utts) {
    return [&theta_p, utts](Graph& g, std::size_t i, bool training, std::uint64_t) {
      const Utterance& u = utts[i];
      auto out = phoneme_forward(g, theta_p, g.constant(u.features.frames), training);
      return frame_ce_loss(out.logits, u.phones);
    };
  };
  std::vector<ParamGroup> groups(1);
  groups[0].params = parameters(theta_p.conv);
  for (auto* q : parameters(theta_p.proj)) groups[0].params.push_back(q);
  return run_training("phoneme", groups, lengths, valid.size(), loss_on(train), loss_on(valid),
                      opt);
}

TrainHistory train_word(WordParams& theta_w, const PhonemeParams& theta_p, std::size_t subsample,
                        const BpeVocab& vocab, std::span<const Utterance> train,
                        std::span<const Utterance> valid, const TrainOptions& opt) {
  struct Item {
    Tensor p_emb;
    CtcLabelSequence label;
  };
  auto prepare = [&](std::span<const Utterance> utts) {
    std::vector<Item> items;
    items.reserve(utts.size());
    for (const auto& u : utts) {
      Tensor e = phone_embedding(theta_p, u, subsample);
      CtcLabelSequence label = word_target(vocab, u, e.rows());
      items.push_back({std::move(e), std::move(label)});
    }
    return items;
  };
  const auto tr = prepare(train);
  const auto va = prepare(valid);
  std::vector<std::size_t> lengths;
  for (const auto& it : tr) lengths.push_back(it.p_emb.rows());
  auto loss_on = [&theta_w, &opt](const std::vector<Item>& items) {
    return [&theta_w, &opt, &items](Graph& g, std::size_t i, bool training, std::uint64_t seed) {
      GraphOptions go = graph_options(opt, training, seed);
      go.train_w = training;
      auto w = word_forward(g, theta_w, g.constant(items[i].p_emb), go);
      return ctc_loss(w.log_probs, items[i].label);
    };
  };
  std::vector<ParamGroup> groups(1);
  for (auto& l : theta_w.lstm)
    for (auto* q : parameters(l)) groups[0].params.push_back(q);
  for (auto* q : parameters(theta_w.proj)) groups[0].params.push_back(q);
  return run_training("word", groups, lengths, va.size(), loss_on(tr), loss_on(va), opt);
}

TrainHistory train_intent_stepwise(IntentParams& theta_u, const WordParams& theta_w,
                                   const PhonemeParams& theta_p, std::size_t subsample,
                                   std::span<const Utterance> train,
                                   std::span<const Utterance> valid, const TrainOptions& opt) {
  const std::size_t num_intents = theta_u.proj.out_dim();
  struct Item {
    Tensor w_emb;
    std::size_t intent;
  };
  auto prepare = [&](std::span<const Utterance> utts) {
    std::vector<Item> items;
    for (const auto& u : utts) {
      const std::size_t id = intent_target(u, num_intents);
      items.push_back({word_forward(theta_w, phone_embedding(theta_p, u, subsample)).embedding, id});
    }
    return items;
  };
  const auto tr = prepare(train);
  const auto va = prepare(valid);
  std::vector<std::size_t> lengths;
  for (const auto& it : tr) lengths.push_back(it.w_emb.rows());
  auto loss_on = [&theta_u, &opt](const std::vector<Item>& items) {
    return [&theta_u, &opt, &items](Graph& g, std::size_t i, bool training, std::uint64_t seed) {
      GraphOptions go = graph_options(opt, training, seed);
      go.train_u = training;
      Var logits = lu_forward(g, theta_u, g.constant(items[i].w_emb), go);
      return intent_ce_loss(logits, items[i].intent);
    };
  };
  std::vector<ParamGroup> groups(1);
  for (auto& l : theta_u.lstm)
    for (auto* q : parameters(l)) groups[0].params.push_back(q);
  for (auto* q : parameters(theta_u.proj)) groups[0].params.push_back(q);
  return run_training("intent", groups, lengths, va.size(), loss_on(tr), loss_on(va), opt);
}

namespace {

Var mtl_graph(Graph& g, CascadeParams& params, const Tensor& p_emb,
              const CtcLabelSequence& label, std::size_t intent, double alpha,
              const GraphOptions& go) {
  auto w = word_forward(g, params.theta_w, g.constant(p_emb), go);
  Var l_w = ctc_loss(w.log_probs, label);
  Var logits = lu_forward(g, params.theta_u, w.embedding, go);
  Var l_u = intent_ce_loss(logits, intent);
  return mtl_loss(l_u, l_w, MtlWeight(alpha));
}

}  // namespace

TrainHistory train_mtl(CascadeParams& params, const BpeVocab& vocab,
                       std::span<const Utterance> train, std::span<const Utterance> valid,
                       const MtlOptions& opt) {
  MtlWeight(opt.alpha);  // validates alpha
  struct Item {
    Tensor p_emb;
    CtcLabelSequence label;
    std::size_t intent;
  };
  auto prepare = [&](std::span<const Utterance> utts) {
    std::vector<Item> items;
    for (const auto& u : utts) {
      Tensor e = phone_embedding(params.theta_p, u, params.dims.subsample);
      CtcLabelSequence label = word_target(vocab, u, e.rows());
      const std::size_t id = intent_target(u, params.dims.num_intents);
      items.push_back({std::move(e), std::move(label), id});
    }
    return items;
  };
  const auto tr = prepare(train);
  const auto va = prepare(valid);
  std::vector<std::size_t> lengths;
  for (const auto& it : tr) lengths.push_back(it.p_emb.rows());
  auto loss_on = [&params, &opt](const std::vector<Item>& items) {
    return [&params, &opt, &items](Graph& g, std::size_t i, bool training, std::uint64_t seed) {
      GraphOptions go = graph_options(opt.train, training, seed);
      go.train_w = training;
      go.train_u = training;
      return mtl_graph(g, params, items[i].p_emb, items[i].label, items[i].intent, opt.alpha, go);
    };
  };
  std::vector<ParamGroup> groups(2);
  groups[0].params = params.word_parameters();
  groups[1].params = params.intent_parameters();
  if (opt.intent_lr > 0.0) groups[1].lr_scale = opt.intent_lr / opt.train.lr;
  return run_training("mtl", groups, lengths, va.size(), loss_on(tr), loss_on(va), opt.train);
}

double mtl_backward(CascadeParams& params, const Tensor& p_emb, const WordpieceSequence& target,
                    std::size_t intent_id, double alpha) {
  Graph g;
  GraphOptions go;
  go.train_w = true;
  go.train_u = true;
  Var loss = mtl_graph(g, params, p_emb, CtcLabelSequence{target, BpeVocab::kBlank}, intent_id,
                       alpha, go);
  g.backward(loss);
  return loss.value().item();
}

}  // namespace slu
