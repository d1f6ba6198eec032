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

#include "slu/decoding.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "slu/error.hpp"
#include "slu/kernels.hpp"
#include "slu/log.hpp"
#include "slu/losses.hpp"
#include "slu/rng.hpp"

namespace slu {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct PrefixScore {
  double blank = kNegInf;      // ends in blank
  double non_blank = kNegInf;  // ends in the last token
  double total() const { return kernels::log_add(blank, non_blank); }
};

bool better(double sa, const WordpieceSequence& a, double sb, const WordpieceSequence& b) {
  if (sa != sb) return sa > sb;
  return a < b;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
// written to per-index slots so the outcome does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

Tensor log_softmax_vec(std::span<const double> x) {
  Tensor out({x.size()});
  kernels::log_softmax_row(x, out.data());
  return out;
}

std::string percent(double x) {
  if (!std::isfinite(x)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * x);
  return buf;
}

}  // namespace

// --- decoding --------------------------------------------------------------

WordpieceSequence greedy_ctc_decode(const Tensor& wp_log_probs, TokenId blank) {
  WordpieceSequence out;
  TokenId prev = blank;
  for (std::size_t t = 0; t < wp_log_probs.rows(); ++t) {
    const TokenId best = argmax(wp_log_probs.row(t));
    if (best != blank && best != prev) out.push_back(best);
    prev = best;
  }
  return out;
}

std::vector<Hypothesis> beam_nbest_decode(const Tensor& wp_log_probs, std::size_t beam_width,
                                          std::size_t n, TokenId blank) {
  if (n == 0 || beam_width < n)
    throw ContractError("beam_nbest_decode: need beam_width >= N >= 1");
  const std::size_t classes = wp_log_probs.cols();
  if (blank >= classes) throw ContractError("beam_nbest_decode: blank id outside the rows");
  std::vector<std::pair<WordpieceSequence, PrefixScore>> beams;
  beams.push_back({{}, PrefixScore{0.0, kNegInf}});
  for (std::size_t t = 0; t < wp_log_probs.rows(); ++t) {
    const auto lp = wp_log_probs.row(t);
    std::map<WordpieceSequence, PrefixScore> next;
    for (const auto& [prefix, score] : beams) {
      const double total = score.total();
      auto& same = next[prefix];
      same.blank = kernels::log_add(same.blank, total + lp[blank]);
      for (TokenId c = 0; c < classes; ++c) {
        if (c == blank) continue;
        WordpieceSequence ext = prefix;
        ext.push_back(c);
        auto& grown = next[ext];
        if (!prefix.empty() && prefix.back() == c) {
          // A repeat only extends the prefix after a blank.
          auto& stay = next[prefix];
          stay.non_blank = kernels::log_add(stay.non_blank, score.non_blank + lp[c]);
          grown.non_blank = kernels::log_add(grown.non_blank, score.blank + lp[c]);
        } else {
          grown.non_blank = kernels::log_add(grown.non_blank, total + lp[c]);
        }
      }
    }
    beams.assign(next.begin(), next.end());
    std::stable_sort(beams.begin(), beams.end(), [](const auto& a, const auto& b) {
      return better(a.second.total(), a.first, b.second.total(), b.first);
    });
    if (beams.size() > beam_width) beams.resize(beam_width);
  }
  std::vector<Hypothesis> out;
  for (std::size_t i = 0; i < beams.size() && out.size() < n; ++i)
    out.push_back({beams[i].first, beams[i].second.total()});
  return out;
}

// --- NLU -------------------------------------------------------------------

NluParams NluParams::init(std::size_t vocab_size, std::size_t emb_dim, std::size_t hidden,
                          std::size_t layers, std::size_t num_intents, std::uint64_t seed) {
  if (vocab_size == 0 || emb_dim == 0 || hidden == 0 || layers == 0 || num_intents == 0)
    throw ConfigError("NLU dims must be positive");
  Rng rng(derive_seed(seed, "init.nlu"));
  NluParams p;
  Tensor emb({vocab_size, emb_dim});
  const double r = 1.0 / std::sqrt(static_cast<double>(emb_dim));
  for (double& v : emb.data()) v = rng.uniform(-r, r);
  p.embedding = Parameter("nlu.emb", std::move(emb));
  for (std::size_t l = 0; l < layers; ++l)
    p.lstm.push_back(LstmLayerParams::init("nlu.lstm" + std::to_string(l),
                                           l == 0 ? emb_dim : hidden, hidden, rng));
  p.proj = LinearParams::init("nlu.proj", hidden, num_intents, rng);
  return p;
}

std::vector<Parameter*> NluParams::parameters() {
  std::vector<Parameter*> out{&embedding};
  for (auto& l : lstm)
    for (auto* q : slu::parameters(l)) out.push_back(q);
  for (auto* q : slu::parameters(proj)) out.push_back(q);
  return out;
}

Tensor nlu_logits(const NluParams& nlu, std::span<const TokenId> tokens) {
  const std::size_t e = nlu.embedding.value.dims()[1];
  if (tokens.empty()) return nlu.proj.b.value;
  Tensor xs({tokens.size(), e});
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= nlu.vocab_size())
      throw ContractError("nlu: token id " + std::to_string(tokens[i]) + " outside vocabulary");
    auto src = nlu.embedding.value.row(tokens[i]);
    std::copy(src.begin(), src.end(), xs.row(i).begin());
  }
  const Tensor top = lstm_stack_forward(nlu.lstm, xs);
  Tensor last({1, top.cols()});
  auto src = top.row(top.rows() - 1);
  std::copy(src.begin(), src.end(), last.data().begin());
  Tensor logits = linear_forward(nlu.proj.w.value, nlu.proj.b.value, last);
  return Tensor({logits.size()}, logits.storage());
}

Var nlu_forward(Graph& g, NluParams& nlu, std::span<const TokenId> tokens,
                const GraphOptions& opt) {
  const bool train = opt.train_u;
  if (tokens.empty()) {
    Var zero = g.constant(Tensor({1, nlu.proj.in_dim()}));
    return linear_forward(g, nlu.proj, zero, train);
  }
  for (auto t : tokens)
    if (t >= nlu.vocab_size())
      throw ContractError("nlu: token id " + std::to_string(t) + " outside vocabulary");
  Var xs = ad::embed(g.param(nlu.embedding, train), tokens);
  Var top = lstm_stack_forward(g, nlu.lstm, xs, opt.dropout, opt.training,
                               derive_seed(opt.dropout_seed, "nlu"), train);
  Var last = ad::row(top, tokens.size() - 1);
  return linear_forward(g, nlu.proj, last, train);
}

TrainHistory train_nlu(NluParams& nlu, const BpeVocab& vocab, std::span<const Utterance> train,
                       std::span<const Utterance> valid, const TrainOptions& opt) {
  struct Item {
    WordpieceSequence tokens;
    std::size_t intent;
  };
  auto prepare = [&](std::span<const Utterance> utts) {
    std::vector<Item> items;
    for (const auto& u : utts) {
      if (!u.intent) throw DataError("utterance '" + u.id + "' has no intent label");
      if (u.intent->id >= nlu.num_intents())
        throw DataError("utterance '" + u.id + "' has intent id " +
                        std::to_string(u.intent->id) + " outside the NLU output");
      items.push_back({vocab.encode(u.text), u.intent->id});
    }
    return items;
  };
  const auto tr = prepare(train);
  const auto va = prepare(valid);
  // Reuse the MTL machinery's generic loop through a thin intent-only model.
  std::vector<std::size_t> lengths;
  for (const auto& it : tr) lengths.push_back(it.tokens.size());
  return detail::run_param_training(
      "nlu", nlu.parameters(), lengths, va.size(),
      [&](Graph& g, std::size_t i, bool training, std::uint64_t seed) {
        GraphOptions go{false, false, training, opt.dropout, training, seed};
        return intent_ce_loss(nlu_forward(g, nlu, tr[i].tokens, go), tr[i].intent);
      },
      [&](Graph& g, std::size_t i, bool, std::uint64_t) {
        GraphOptions go;
        return intent_ce_loss(nlu_forward(g, nlu, va[i].tokens, go), va[i].intent);
      },
      opt);
}

void save_nlu(const NluParams& nlu, const std::filesystem::path& path) {
  NamedTensors t;
  t.emplace_back("meta.nlu", Tensor::vector({static_cast<double>(nlu.vocab_size()),
                                             static_cast<double>(nlu.embedding.value.dims()[1]),
                                             static_cast<double>(nlu.lstm.front().hidden_dim),
                                             static_cast<double>(nlu.lstm.size()),
                                             static_cast<double>(nlu.num_intents())}));
  for (auto* q : const_cast<NluParams&>(nlu).parameters()) t.emplace_back(q->name, q->value);
  save_tensors(t, path);
}

NluParams load_nlu(const std::filesystem::path& path) {
  std::map<std::string, Tensor> tensors;
  for (auto& [name, t] : load_tensors(path)) tensors[name] = std::move(t);
  auto meta = tensors.find("meta.nlu");
  if (meta == tensors.end() || meta->second.size() != 5)
    throw FormatError("NLU checkpoint " + path.string() + " lacks meta.nlu");
  const auto& m = meta->second;
  auto dim = [&m](std::size_t i) { return static_cast<std::size_t>(m[i]); };
  NluParams nlu = NluParams::init(dim(0), dim(1), dim(2), dim(3), dim(4), 0);
  for (auto* q : nlu.parameters()) {
    auto it = tensors.find(q->name);
    if (it == tensors.end()) throw FormatError("NLU checkpoint: missing parameter " + q->name);
    if (it->second.dims() != q->value.dims())
      throw FormatError("NLU checkpoint: parameter " + q->name + " has the wrong shape");
    q->value = std::move(it->second);
    q->zero_grad();
  }
  return nlu;
}

// --- decisions -------------------------------------------------------------

std::size_t argmax(std::span<const double> xs) {
  if (xs.empty()) throw ContractError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (xs[i] > xs[best]) best = i;
  return best;
}

std::size_t pipeline_intent_1best(const Tensor& wp_log_probs, const NluParams& nlu) {
  return argmax(nlu_logits(nlu, greedy_ctc_decode(wp_log_probs)).data());
}

std::size_t nbest_intent_decision(std::span<const double> hyp_log_probs,
                                  std::span<const std::vector<double>> intent_log_probs) {
  if (hyp_log_probs.empty() || hyp_log_probs.size() != intent_log_probs.size())
    throw ContractError("nbest_intent_decision: need one intent distribution per hypothesis");
  std::vector<double> best(intent_log_probs[0].size(), kNegInf);
  for (std::size_t i = 0; i < hyp_log_probs.size(); ++i) {
    if (intent_log_probs[i].size() != best.size())
      throw ContractError("nbest_intent_decision: ragged intent distributions");
    for (std::size_t u = 0; u < best.size(); ++u)
      best[u] = std::max(best[u], hyp_log_probs[i] + intent_log_probs[i][u]);
  }
  return argmax(best);
}

std::size_t pipeline_intent_nbest(std::span<const Hypothesis> nbest, const NluParams& nlu) {
  if (nbest.empty()) throw ContractError("pipeline_intent_nbest: empty N-best list");
  std::vector<double> hyp;
  std::vector<std::vector<double>> intents;
  for (const auto& h : nbest) {
    hyp.push_back(h.log_prob);
    intents.push_back(log_softmax_vec(nlu_logits(nlu, h.tokens).data()).storage());
  }
  return nbest_intent_decision(hyp, intents);
}

std::size_t pipeline_intent_nbest(const Tensor& wp_log_probs, const NluParams& nlu,
                                  std::size_t beam_width, std::size_t n) {
  const auto hyps = beam_nbest_decode(wp_log_probs, beam_width, n);
  return pipeline_intent_nbest(hyps, nlu);
}

std::size_t e2e_intent(std::span<const double> intent_logits) { return argmax(intent_logits); }

// --- metrics ---------------------------------------------------------------

std::size_t edit_distance(std::span<const std::string> ref, std::span<const std::string> hyp) {
  std::vector<std::size_t> prev(hyp.size() + 1), cur(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[hyp.size()];
}

double wer(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const std::size_t edits = edit_distance(ref, hyp);
  if (ref.empty()) return edits == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  return static_cast<double>(edits) / static_cast<double>(ref.size());
}

double intent_accuracy(std::span<const IntentPair> pairs) {
  if (pairs.empty()) throw ContractError("intent_accuracy: no pairs");
  std::size_t hits = 0;
  for (const auto& p : pairs) hits += p.gold == p.predicted ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

// --- evaluation ------------------------------------------------------------

EvalReport evaluate(const CascadeParams& params, const NluParams& nlu, const BpeVocab& vocab,
                    std::span<const Utterance> utts, const EvalOptions& opt) {
  if (utts.empty()) throw DataError("evaluate: no utterances in the selected split");
  EvalReport report;
  report.rows.resize(utts.size());
  parallel_for(utts.size(), opt.threads, [&](std::size_t i) {
    const Utterance& u = utts[i];
    if (!u.intent) throw DataError("utterance '" + u.id + "' has no intent label");
    const CascadeOutputs out = cascade_forward(params, u.features.frames);
    const WordpieceSequence greedy = greedy_ctc_decode(out.word.log_probs);
    const auto ref = split_words(u.text);
    const auto hyp = vocab.decode_words(greedy);
    EvalRow& row = report.rows[i];
    row.utt_id = u.id;
    row.gold_intent = u.intent->id;
    row.e2e_pred = e2e_intent(out.intent_logits.data());
    row.pipe1_pred = argmax(nlu_logits(nlu, greedy).data());
    row.pipeN_pred = pipeline_intent_nbest(out.word.log_probs, nlu, opt.beam, opt.nbest);
    row.wer_edits = edit_distance(ref, hyp);
    row.ref_len = ref.size();
  });
  report.summary = summarize(report.rows);
  return report;
}

EvalSummary summarize(std::span<const EvalRow> rows) {
  if (rows.empty()) throw ContractError("summarize: no rows");
  EvalSummary s;
  s.utterances = rows.size();
  std::size_t edits = 0, words = 0;
  std::vector<IntentPair> e2e, p1, pn;
  for (const auto& r : rows) {
    edits += r.wer_edits;
    words += r.ref_len;
    e2e.push_back({r.gold_intent, r.e2e_pred});
    p1.push_back({r.gold_intent, r.pipe1_pred});
    pn.push_back({r.gold_intent, r.pipeN_pred});
  }
  s.wer = words ? static_cast<double>(edits) / static_cast<double>(words)
                : (edits ? std::numeric_limits<double>::infinity() : 0.0);
  s.e2e_acc = intent_accuracy(e2e);
  s.pipe1_acc = intent_accuracy(p1);
  s.pipeN_acc = intent_accuracy(pn);
  return s;
}

void write_eval_csv(std::span<const EvalRow> rows, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "utt_id,gold_intent,e2e_pred,pipe1_pred,pipeN_pred,wer_edits,ref_len\n";
  for (const auto& r : rows)
    os << r.utt_id << ',' << r.gold_intent << ',' << r.e2e_pred << ',' << r.pipe1_pred << ','
       << r.pipeN_pred << ',' << r.wer_edits << ',' << r.ref_len << '\n';
  if (!os) throw IoError("failed writing " + path.string());
}

std::vector<EvalRow> read_eval_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line) ||
      line != "utt_id,gold_intent,e2e_pred,pipe1_pred,pipeN_pred,wer_edits,ref_len")
    throw FormatError(path.string() + ": unexpected header");
  std::vector<EvalRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[7];
    for (auto& x : f)
      if (!std::getline(ls, x, ',')) throw FormatError(path.string() + ": short row '" + line + "'");
    try {
      rows.push_back({f[0], std::stoul(f[1]), std::stoul(f[2]), std::stoul(f[3]), std::stoul(f[4]),
                      std::stoul(f[5]), std::stoul(f[6])});
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": bad number in '" + line + "'");
    }
  }
  return rows;
}

std::string format_results_table(std::span<const ConditionResult> rows) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-24s %10s %10s %10s %10s\n", "condition", "ASR WER", "Pipe.",
                "Pipe.N", "E2E");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-24s %10s %10s %10s %10s\n", r.condition.c_str(),
                  percent(r.summary.wer).c_str(), percent(r.summary.pipe1_acc).c_str(),
                  percent(r.summary.pipeN_acc).c_str(),
                  r.has_e2e ? percent(r.summary.e2e_acc).c_str() : "-");
    os << buf;
  }
  return os.str();
}

std::vector<SweepRow> alpha_sweep(const CascadeParams& warm_start, const NluParams& nlu,
                                  const BpeVocab& vocab, std::span<const Utterance> train,
                                  std::span<const Utterance> valid,
                                  std::span<const Utterance> test, std::span<const double> alphas,
                                  const MtlOptions& opt, const EvalOptions& eval_opt) {
  for (double a : alphas) MtlWeight{a};
  std::vector<SweepRow> rows;
  for (double a : alphas) {
    CascadeParams p = warm_start;
    MtlOptions o = opt;
    o.alpha = a;
    char buf[64];
    std::snprintf(buf, sizeof buf, "alpha sweep: alpha=%.2f", a);
    log_info(buf);
    train_mtl(p, vocab, train, valid, o);
    const auto s = evaluate(p, nlu, vocab, test, eval_opt).summary;
    rows.push_back({a, s.wer, s.e2e_acc, s.pipe1_acc});
  }
  return rows;
}

std::string format_sweep_table(std::span<const SweepRow> rows) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-8s %10s %10s %10s\n", "alpha", "ASR WER", "E2E", "Pipe.");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-8.2f %10s %10s %10s\n", r.alpha, percent(r.wer).c_str(),
                  percent(r.e2e_acc).c_str(), percent(r.pipe1_acc).c_str());
    os << buf;
  }
  return os.str();
}

void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "alpha,wer,e2e_acc,pipe1_acc\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.2f,%.10g,%.10g,%.10g\n", r.alpha, r.wer, r.e2e_acc,
                  r.pipe1_acc);
    os << buf;
  }
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace slu
