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

#include "slu/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "slu/error.hpp"
#include "slu/log.hpp"
#include "slu/rng.hpp"

namespace slu {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

const std::array<std::pair<Phase, const char*>, 6> kPhaseNames{{
    {Phase::kPhoneme, "phoneme"},
    {Phase::kWordPretrain, "word-pretrain"},
    {Phase::kWordFinetune, "word-finetune"},
    {Phase::kIntentStepwise, "intent-stepwise"},
    {Phase::kMtl, "mtl"},
    {Phase::kNlu, "nlu"},
}};

std::string stage_name(WordStage s) { return s == WordStage::kPretrain ? "pretrain" : "finetune"; }

json options_json(const TrainOptions& o) {
  json j = o;
  j.erase("seed");  // phase seeds derive from the top-level seed
  return j;
}

TrainOptions options_from(const json& j, const char* key, TrainOptions o) {
  if (!j.contains(key)) return o;
  if (j.at(key).contains("seed"))
    throw ConfigError(std::string(key) + ".seed: phase seeds derive from the top-level seed");
  j.at(key).get_to(o);
  return o;
}

TrainOptions seeded(const TrainOptions& o, std::uint64_t seed, const std::string& phase) {
  TrainOptions out = o;
  out.seed = derive_seed(seed, "train." + phase);
  return out;
}

void require(const fs::path& p, const std::string& phase) {
  if (!fs::exists(p))
    throw DependencyError("missing " + p.string() + "; run '" + phase + "' first");
}

struct Splits {
  std::vector<Utterance> train, valid, test;
};

Splits load_splits(const fs::path& manifest) {
  Splits s;
  for (auto& u : read_manifest(manifest)) {
    switch (u.split) {
      case Split::kTrain: s.train.push_back(std::move(u)); break;
      case Split::kValid: s.valid.push_back(std::move(u)); break;
      case Split::kTest: s.test.push_back(std::move(u)); break;
    }
  }
  return s;
}

const std::vector<Utterance>& pick(const Splits& s, Split which) {
  switch (which) {
    case Split::kTrain: return s.train;
    case Split::kValid: return s.valid;
    case Split::kTest: break;
  }
  return s.test;
}

template <class T>
T load_json_file(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw IoError("cannot read " + p.string());
  try {
    return json::parse(is).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

void write_json_file(const json& j, const fs::path& p) {
  std::ofstream os(p);
  if (!os) throw IoError("cannot write " + p.string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("failed writing " + p.string());
}

SlotGrammar config_grammar(const RunConfig& cfg) {
  return cfg.grammar.empty() ? SlotGrammar::default_grammar()
                             : load_json_file<SlotGrammar>(cfg.grammar);
}

Lexicon config_lexicon(const RunConfig& cfg) {
  return cfg.lexicon.empty() ? Lexicon::default_lexicon() : load_json_file<Lexicon>(cfg.lexicon);
}

double greedy_wer(const CascadeParams& p, const BpeVocab& vocab, std::span<const Utterance> utts) {
  std::size_t edits = 0, words = 0;
  for (const auto& u : utts) {
    const auto out = cascade_forward(p, u.features.frames);
    const auto ref = split_words(u.text);
    edits += edit_distance(ref, vocab.decode_words(greedy_ctc_decode(out.word.log_probs)));
    words += ref.size();
  }
  return words ? static_cast<double>(edits) / static_cast<double>(words) : 0.0;
}

std::string history_name(Phase phase, WordStage on) {
  std::string name = "history_" + to_string(phase);
  if (phase == Phase::kIntentStepwise) name += "_" + stage_name(on);
  return name + ".csv";
}

std::string phase_dependency(Phase p) {
  switch (p) {
    case Phase::kPhoneme: return "train --phase phoneme";
    case Phase::kWordPretrain: return "train --phase word-pretrain";
    case Phase::kWordFinetune: return "train --phase word-finetune";
    case Phase::kIntentStepwise: return "train --phase intent-stepwise";
    case Phase::kMtl: return "train --phase mtl";
    case Phase::kNlu: break;
  }
  return "train --phase nlu";
}

}  // namespace

// --- config ----------------------------------------------------------------

RunConfig RunConfig::defaults() {
  // Sized for a full recipe of roughly ten minutes on one core.
  RunConfig c;
  c.dims.conv_activation = Activation::kTanh;
  c.dims.word_hidden = 64;
  c.dims.word_layers = 2;
  c.dims.intent_hidden = 64;
  c.phoneme.max_epochs = 3;
  c.word_pretrain.lr = 3e-3;
  c.word_pretrain.max_epochs = 6;
  c.word_finetune.lr = c.word_pretrain.lr / 8;
  c.word_finetune.max_epochs = 6;
  c.intent.max_epochs = 10;
  c.nlu_train.max_epochs = 10;
  return c;
}

void RunConfig::validate() const {
  corpus.validate();
  dims.validate();
  if (bpe_size < 2) throw ConfigError("bpe_size must be at least 2");
  if (nlu.emb_dim == 0 || nlu.hidden == 0 || nlu.layers == 0)
    throw ConfigError("nlu dims must be positive");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  for (double a : sweep_alphas)
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("sweep alphas must lie in [0, 1]");
  if (nbest == 0 || beam < nbest) throw ConfigError("need beam >= nbest >= 1");
  if (corpus.feat_dim != dims.feat_dim)
    throw ConfigError("corpus.feat_dim and dims.feat_dim differ");
}

void to_json(json& j, const RunConfig& c) {
  j = json{{"seed", c.seed},
           {"out", c.out.string()},
           {"grammar", c.grammar.string()},
           {"lexicon", c.lexicon.string()},
           {"corpus", c.corpus},
           {"bpe_size", c.bpe_size},
           {"dims", c.dims},
           {"nlu", {{"emb_dim", c.nlu.emb_dim}, {"hidden", c.nlu.hidden}, {"layers", c.nlu.layers}}},
           {"phoneme", options_json(c.phoneme)},
           {"word_pretrain", options_json(c.word_pretrain)},
           {"word_finetune", options_json(c.word_finetune)},
           {"intent", options_json(c.intent)},
           {"nlu_train", options_json(c.nlu_train)},
           {"alpha", c.alpha},
           {"mtl_intent_lr", c.mtl_intent_lr},
           {"sweep_alphas", c.sweep_alphas},
           {"beam", c.beam},
           {"nbest", c.nbest},
           {"split", to_string(c.split)},
           {"frame_interval_ms", c.frame_interval_ms},
           {"threads", c.threads}};
}

void from_json(const json& j, RunConfig& c) {
  static const std::set<std::string> known{
      "seed",          "out",         "grammar", "lexicon",       "corpus",       "bpe_size",
      "dims",          "nlu",         "phoneme", "word_pretrain", "word_finetune", "intent",
      "nlu_train",     "alpha",       "mtl_intent_lr", "sweep_alphas", "beam",    "nbest",
      "split",         "frame_interval_ms", "threads"};
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  try {
    get("seed", c.seed);
    if (j.contains("out")) c.out = j.at("out").get<std::string>();
    if (j.contains("grammar")) c.grammar = j.at("grammar").get<std::string>();
    if (j.contains("lexicon")) c.lexicon = j.at("lexicon").get<std::string>();
    get("corpus", c.corpus);
    get("bpe_size", c.bpe_size);
    get("dims", c.dims);
    if (j.contains("nlu")) {
      const auto& n = j.at("nlu");
      if (n.contains("emb_dim")) n.at("emb_dim").get_to(c.nlu.emb_dim);
      if (n.contains("hidden")) n.at("hidden").get_to(c.nlu.hidden);
      if (n.contains("layers")) n.at("layers").get_to(c.nlu.layers);
    }
    c.phoneme = options_from(j, "phoneme", c.phoneme);
    c.word_pretrain = options_from(j, "word_pretrain", c.word_pretrain);
    c.word_finetune = options_from(j, "word_finetune", c.word_finetune);
    c.intent = options_from(j, "intent", c.intent);
    c.nlu_train = options_from(j, "nlu_train", c.nlu_train);
    get("alpha", c.alpha);
    get("mtl_intent_lr", c.mtl_intent_lr);
    get("sweep_alphas", c.sweep_alphas);
    get("beam", c.beam);
    get("nbest", c.nbest);
    if (j.contains("split")) c.split = split_from_string(j.at("split").get<std::string>());
    get("frame_interval_ms", c.frame_interval_ms);
    get("threads", c.threads);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid run config: ") + e.what());
  }
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  RunConfig c = RunConfig::defaults();
  from_json(j, c);
  return c;
}

void apply_override(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("override must look like key=value, got '" + assignment + "'");
  std::string path = "/" + assignment.substr(0, eq);
  std::replace(path.begin(), path.end(), '.', '/');
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json j = c;
  const json::json_pointer ptr(path);
  if (!j.contains(ptr)) throw ConfigError("unknown config field '" + assignment.substr(0, eq) + "'");
  j[ptr] = value;
  try {
    c = j.get<RunConfig>();
  } catch (const json::exception& e) {
    throw ConfigError("bad value for '" + assignment.substr(0, eq) + "': " + e.what());
  }
}

std::string to_string(Phase p) {
  for (const auto& [phase, name] : kPhaseNames)
    if (phase == p) return name;
  throw ContractError("unknown phase");
}

Phase phase_from_string(const std::string& s) {
  for (const auto& [phase, name] : kPhaseNames)
    if (s == name) return phase;
  throw ConfigError("unknown phase '" + s + "'");
}

fs::path RunLayout::checkpoint(Phase p, WordStage on) const {
  std::string name = to_string(p);
  if (p == Phase::kIntentStepwise) name += "-" + stage_name(on);
  return checkpoints_dir() / (name + ".ckpt");
}

void write_resolved_config(const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  write_json_file(json(cfg), RunLayout(cfg.out).resolved_config());
}

// --- corpus ----------------------------------------------------------------

std::vector<SplitCounts> count_splits(std::span<const Utterance> utts, const std::string& corpus) {
  std::map<Split, std::pair<std::set<std::string>, std::size_t>> by;
  for (const auto& u : utts) {
    by[u.split].first.insert(u.speaker);
    ++by[u.split].second;
  }
  std::vector<SplitCounts> rows;
  for (const auto& [split, v] : by) rows.push_back({corpus, to_string(split), v.first.size(), v.second});
  return rows;
}

std::string format_counts_table(std::span<const SplitCounts> rows) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-10s %-6s %9s %11s\n", "corpus", "split", "Speakers",
                "Utterances");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-10s %-6s %9zu %11zu\n", r.corpus.c_str(), r.split.c_str(),
                  r.speakers, r.utterances);
    os << buf;
  }
  return os.str();
}

std::vector<SplitCounts> cmd_gen_corpus(const RunConfig& cfg) {
  cfg.validate();
  const RunLayout layout(cfg.out);
  const SlotGrammar grammar = config_grammar(cfg);
  const Lexicon lexicon = config_lexicon(cfg);
  grammar.validate();
  lexicon.validate();
  Corpus corpus = gen_corpus(grammar, lexicon, cfg.corpus, cfg.seed);
  std::error_code ec;
  fs::create_directories(layout.corpus_dir(), ec);
  if (ec) throw IoError("cannot create " + layout.corpus_dir().string() + ": " + ec.message());
  write_resolved_config(cfg);
  write_json_file(json(grammar), layout.corpus_dir() / "grammar.json");
  write_json_file(json(lexicon), layout.corpus_dir() / "lexicon.json");
  write_manifest(layout.slu_manifest(), corpus.slu, layout.corpus_dir() / "feats" / "slu");
  write_manifest(layout.pretrain_manifest(), corpus.pretrain,
                 layout.corpus_dir() / "feats" / "pretrain");
  auto rows = count_splits(corpus.slu, "slu");
  for (auto& r : count_splits(corpus.pretrain, "pretrain")) rows.push_back(r);
  return rows;
}

// --- training --------------------------------------------------------------

namespace {

// MTL starts from the fine-tuned word module. The intent module comes from
// the stepwise run on that word module when one exists; otherwise it is the
// fresh initialisation still stored in the fine-tune checkpoint.
CascadeParams mtl_warm_start(const RunLayout& layout) {
  require(layout.checkpoint(Phase::kWordFinetune), phase_dependency(Phase::kWordFinetune));
  const auto stepwise = layout.checkpoint(Phase::kIntentStepwise, WordStage::kFinetune);
  if (fs::exists(stepwise)) {
    log_info("mtl warm start: " + stepwise.filename().string());
    return load_checkpoint(stepwise);
  }
  log_info("mtl warm start: " + layout.checkpoint(Phase::kWordFinetune).filename().string() +
           " (fresh intent module)");
  return load_checkpoint(layout.checkpoint(Phase::kWordFinetune));
}

}  // namespace

PhaseResult cmd_train(const RunConfig& cfg, Phase phase, WordStage on) {
  cfg.validate();
  const RunLayout layout(cfg.out);
  require(layout.slu_manifest(), "gen-corpus");
  fs::create_directories(layout.checkpoints_dir());
  fs::create_directories(layout.reports_dir());
  write_resolved_config(cfg);

  PhaseResult result;
  const std::string name = to_string(phase);
  const auto t0 = std::chrono::steady_clock::now();
  log_info("phase " + name + (phase == Phase::kIntentStepwise ? " on " + stage_name(on) : ""));

  if (phase == Phase::kPhoneme) {
    require(layout.pretrain_manifest(), "gen-corpus");
    const auto grammar = load_json_file<SlotGrammar>(layout.corpus_dir() / "grammar.json");
    const auto lexicon = load_json_file<Lexicon>(layout.corpus_dir() / "lexicon.json");
    const Splits pre = load_splits(layout.pretrain_manifest());
    const Splits slu = load_splits(layout.slu_manifest());
    // The wordpiece inventory covers every training transcript.
    std::vector<std::string> texts;
    for (const auto* s : {&pre.train, &slu.train})
      for (const auto& u : *s) texts.push_back(u.text);
    const BpeVocab vocab = BpeVocab::train(texts, cfg.bpe_size);
    vocab.save(layout.vocab());
    CascadeDims dims = cfg.dims;
    dims.num_phones = lexicon.num_phones();
    dims.num_intents = grammar.num_intents();
    dims.vocab_size = vocab.size();
    CascadeParams p = CascadeParams::init(dims, cfg.seed);
    result.history = train_phoneme(p.theta_p, pre.train, pre.valid, seeded(cfg.phoneme, cfg.seed, name));
    result.checkpoint = layout.checkpoint(phase);
    save_checkpoint(p, result.checkpoint);
  } else if (phase == Phase::kWordPretrain || phase == Phase::kWordFinetune) {
    const bool pretrain = phase == Phase::kWordPretrain;
    const Phase prev = pretrain ? Phase::kPhoneme : Phase::kWordPretrain;
    require(layout.checkpoint(prev), phase_dependency(prev));
    require(layout.vocab(), phase_dependency(Phase::kPhoneme));
    CascadeParams p = load_checkpoint(layout.checkpoint(prev));
    const BpeVocab vocab = BpeVocab::load(layout.vocab());
    const Splits slu = load_splits(layout.slu_manifest());
    result.wer_before = greedy_wer(p, vocab, slu.test);
    const TrainOptions opt = seeded(pretrain ? cfg.word_pretrain : cfg.word_finetune, cfg.seed, name);
    if (pretrain) {
      require(layout.pretrain_manifest(), "gen-corpus");
      const Splits pre = load_splits(layout.pretrain_manifest());
      result.history = train_word(p.theta_w, p.theta_p, p.dims.subsample, vocab, pre.train,
                                  pre.valid, opt);
    } else {
      result.history = train_word(p.theta_w, p.theta_p, p.dims.subsample, vocab, slu.train,
                                  slu.valid, opt);
    }
    result.wer_after = greedy_wer(p, vocab, slu.test);
    result.checkpoint = layout.checkpoint(phase);
    save_checkpoint(p, result.checkpoint);
  } else if (phase == Phase::kIntentStepwise) {
    const Phase prev = on == WordStage::kPretrain ? Phase::kWordPretrain : Phase::kWordFinetune;
    require(layout.checkpoint(prev), phase_dependency(prev));
    CascadeParams p = load_checkpoint(layout.checkpoint(prev));
    const Splits slu = load_splits(layout.slu_manifest());
    result.history = train_intent_stepwise(p.theta_u, p.theta_w, p.theta_p, p.dims.subsample,
                                           slu.train, slu.valid,
                                           seeded(cfg.intent, cfg.seed, name + "." + stage_name(on)));
    result.checkpoint = layout.checkpoint(phase, on);
    save_checkpoint(p, result.checkpoint);
  } else if (phase == Phase::kMtl) {
    CascadeParams p = mtl_warm_start(layout);
    const BpeVocab vocab = BpeVocab::load(layout.vocab());
    const Splits slu = load_splits(layout.slu_manifest());
    MtlOptions mo;
    mo.train = seeded(cfg.word_finetune, cfg.seed, name);
    mo.alpha = cfg.alpha;
    mo.intent_lr = cfg.mtl_intent_lr;
    result.wer_before = greedy_wer(p, vocab, slu.test);
    result.history = train_mtl(p, vocab, slu.train, slu.valid, mo);
    result.wer_after = greedy_wer(p, vocab, slu.test);
    result.checkpoint = layout.checkpoint(phase);
    save_checkpoint(p, result.checkpoint);
  } else {
    require(layout.vocab(), phase_dependency(Phase::kPhoneme));
    const auto grammar = load_json_file<SlotGrammar>(layout.corpus_dir() / "grammar.json");
    const BpeVocab vocab = BpeVocab::load(layout.vocab());
    const Splits slu = load_splits(layout.slu_manifest());
    NluParams nlu = NluParams::init(vocab.size(), cfg.nlu.emb_dim, cfg.nlu.hidden, cfg.nlu.layers,
                                    grammar.num_intents(), cfg.seed);
    result.history = train_nlu(nlu, vocab, slu.train, slu.valid, seeded(cfg.nlu_train, cfg.seed, name));
    result.checkpoint = layout.nlu();
    save_nlu(nlu, result.checkpoint);
  }
  write_history_csv(result.history, layout.reports_dir() / history_name(phase, on));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char buf[160];
  std::snprintf(buf, sizeof buf, "phase %s done in %.1fs, best epoch %zu", name.c_str(), secs,
                result.history.best_epoch);
  log_info(buf);
  return result;
}

// --- evaluation ------------------------------------------------------------

EvalResult cmd_eval(const RunConfig& cfg, Phase model, WordStage on) {
  cfg.validate();
  const RunLayout layout(cfg.out);
  require(layout.slu_manifest(), "gen-corpus");
  if (model == Phase::kPhoneme || model == Phase::kNlu)
    throw ConfigError("eval needs a word, intent or mtl model, not " + to_string(model));
  require(layout.checkpoint(model, on), phase_dependency(model));
  require(layout.nlu(), phase_dependency(Phase::kNlu));
  fs::create_directories(layout.reports_dir());
  const CascadeParams p = load_checkpoint(layout.checkpoint(model, on));
  const NluParams nlu = load_nlu(layout.nlu());
  const BpeVocab vocab = BpeVocab::load(layout.vocab());
  const Splits slu = load_splits(layout.slu_manifest());
  EvalOptions eo;
  eo.beam = cfg.beam;
  eo.nbest = cfg.nbest;
  eo.threads = cfg.threads;
  EvalResult r;
  r.report = evaluate(p, nlu, vocab, pick(slu, cfg.split), eo);
  r.csv = layout.reports_dir() /
          ("eval_" + layout.checkpoint(model, on).stem().string() + "_" + to_string(cfg.split) + ".csv");
  write_eval_csv(r.report.rows, r.csv);
  return r;
}

// --- streaming -------------------------------------------------------------

std::vector<StreamEvent> cmd_stream(const RunConfig& cfg, const std::string& utt_id,
                                    std::ostream& log) {
  const RunLayout layout(cfg.out);
  require(layout.slu_manifest(), "gen-corpus");
  require(layout.checkpoint(Phase::kMtl), phase_dependency(Phase::kMtl));
  const auto lexicon = load_json_file<Lexicon>(layout.corpus_dir() / "lexicon.json");
  const auto intents = load_json_file<SlotGrammar>(layout.corpus_dir() / "grammar.json").intents();
  const BpeVocab vocab = BpeVocab::load(layout.vocab());
  const CascadeParams p = load_checkpoint(layout.checkpoint(Phase::kMtl));
  const auto utts = read_manifest(layout.slu_manifest());
  const Utterance* utt = nullptr;
  for (const auto& u : utts)
    if (u.id == utt_id) utt = &u;
  if (!utt) throw LookupError("unknown utterance id '" + utt_id + "'");

  const CascadeRuntime rt(p);
  StreamingSession session(rt);
  std::vector<StreamEvent> events;
  WordpieceSequence pieces;
  TokenId prev = BpeVocab::kBlank;
  const Tensor& x = utt->features.frames;
  for (std::size_t t = 0; t < x.rows(); ++t) {
    const StreamOutput out = session.push(x.row(t));
    if (out.wp_log_probs) {
      // Incremental greedy collapse; matches greedy_ctc_decode on the prefix.
      const TokenId best = argmax(*out.wp_log_probs);
      if (best != BpeVocab::kBlank && best != prev) pieces.push_back(best);
      prev = best;
    }
    StreamEvent ev{t, argmax(out.phone_logits), pieces, argmax(out.intent_logits)};
    const auto& u = intents.at(ev.top_intent);
    log << "frame=" << t << " phone=" << lexicon.phones.at(ev.top_phone) << " wordpieces=\"";
    for (std::size_t i = 0; i < pieces.size(); ++i)
      log << (i ? " " : "") << vocab.token(pieces[i]);
    log << "\" intent=" << u.action << '/' << u.object << '/' << u.location << '\n';
    events.push_back(std::move(ev));
    if (cfg.frame_interval_ms)
      std::this_thread::sleep_for(std::chrono::milliseconds(cfg.frame_interval_ms));
  }
  return events;
}

// --- sweep and recipe ------------------------------------------------------

std::vector<SweepRow> cmd_sweep_alpha(const RunConfig& cfg) {
  cfg.validate();
  const RunLayout layout(cfg.out);
  require(layout.slu_manifest(), "gen-corpus");
  require(layout.nlu(), phase_dependency(Phase::kNlu));
  const CascadeParams warm = mtl_warm_start(layout);
  fs::create_directories(layout.reports_dir());
  write_resolved_config(cfg);
  const NluParams nlu = load_nlu(layout.nlu());
  const BpeVocab vocab = BpeVocab::load(layout.vocab());
  const Splits slu = load_splits(layout.slu_manifest());
  MtlOptions mo;
  mo.train = seeded(cfg.word_finetune, cfg.seed, to_string(Phase::kMtl));
  mo.intent_lr = cfg.mtl_intent_lr;
  EvalOptions eo;
  eo.beam = cfg.beam;
  eo.nbest = cfg.nbest;
  eo.threads = cfg.threads;
  auto rows = alpha_sweep(warm, nlu, vocab, slu.train, slu.valid, pick(slu, cfg.split),
                          cfg.sweep_alphas, mo, eo);
  write_sweep_csv(rows, layout.reports_dir() / "sweep_alpha.csv");
  std::ofstream(layout.reports_dir() / "sweep_alpha.txt") << format_sweep_table(rows);
  return rows;
}

RecipeResult cmd_recipe(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RecipeResult r;
  log_info(format_counts_table(cmd_gen_corpus(cfg)));
  cmd_train(cfg, Phase::kPhoneme);
  cmd_train(cfg, Phase::kWordPretrain);
  cmd_train(cfg, Phase::kNlu);
  cmd_train(cfg, Phase::kIntentStepwise, WordStage::kPretrain);
  cmd_train(cfg, Phase::kWordFinetune);
  cmd_train(cfg, Phase::kIntentStepwise, WordStage::kFinetune);
  cmd_train(cfg, Phase::kMtl);
  r.pretrain = cmd_eval(cfg, Phase::kIntentStepwise, WordStage::kPretrain).report.summary;
  r.finetune = cmd_eval(cfg, Phase::kIntentStepwise, WordStage::kFinetune).report.summary;
  r.mtl = cmd_eval(cfg, Phase::kMtl).report.summary;
  char label[64];
  std::snprintf(label, sizeof label, "+ MTL alpha=%.2f", cfg.alpha);
  const std::vector<ConditionResult> rows{{"pretrain only", r.pretrain, true},
                                          {"+ fine-tune", r.finetune, true},
                                          {label, r.mtl, true}};
  r.table = format_results_table(rows);
  std::ofstream(RunLayout(cfg.out).reports_dir() / "summary.txt") << r.table;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace slu
