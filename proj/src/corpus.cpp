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

#include "slu/corpus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "slu/bpe.hpp"
#include "slu/error.hpp"
#include "slu/rng.hpp"

namespace slu {
namespace {

using nlohmann::json;

bool has_placeholder(const std::string& pattern, std::string_view ph) {
  return pattern.find(ph) != std::string::npos;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated feature file " + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string speaker_name(const std::string& prefix, std::size_t i) {
  std::ostringstream os;
  os << prefix << (i < 10 ? "0" : "") << i;
  return os.str();
}

}  // namespace

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "valid") return Split::kValid;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + s + "' (expected train, valid or test)");
}

// --- grammar ---------------------------------------------------------------

void SlotGrammar::validate() const {
  if (validity.empty()) throw ConfigError("grammar has no valid intents");
  auto known = [](const std::vector<std::string>& vals, const std::string& v) {
    return std::find(vals.begin(), vals.end(), v) != vals.end();
  };
  std::set<std::array<std::string, 3>> seen;
  for (const auto& t : validity) {
    if (!known(actions, t[0]) || !known(objects, t[1]) || !known(locations, t[2]))
      throw ConfigError("grammar: triple (" + t[0] + ", " + t[1] + ", " + t[2] +
                        ") uses an undeclared slot value");
    if (!seen.insert(t).second)
      throw ConfigError("grammar: duplicate triple (" + t[0] + ", " + t[1] + ", " + t[2] + ")");
  }
}

std::vector<IntentLabel> SlotGrammar::intents() const {
  auto sorted = validity;
  std::sort(sorted.begin(), sorted.end());
  std::vector<IntentLabel> out;
  for (std::size_t i = 0; i < sorted.size(); ++i)
    out.push_back({sorted[i][0], sorted[i][1], sorted[i][2], i});
  return out;
}

bool SlotGrammar::compatible(const SlotTemplate& t, const IntentLabel& u) const {
  if (t.action != u.action) return false;
  const bool filtered = !t.objects.empty();
  if (filtered && std::find(t.objects.begin(), t.objects.end(), u.object) == t.objects.end())
    return false;
  if (has_placeholder(t.pattern, "{object}")) {
    if (u.object == kNone) return false;
  } else if (u.object != kNone && !filtered) {
    return false;
  }
  if (u.location != kNone && !has_placeholder(t.pattern, "{location}") &&
      !has_placeholder(t.pattern, "{loc}"))
    return false;
  return true;
}

std::string SlotGrammar::render(const SlotTemplate& t, const IntentLabel& u) const {
  std::vector<std::string> words;
  std::istringstream is(t.pattern);
  for (std::string w; is >> w;) {
    if (w == "{object}") {
      for (auto& x : split_words(u.object)) words.push_back(x);
    } else if (w == "{location}") {
      if (u.location == kNone) continue;
      words.push_back("in");
      words.push_back("the");
      for (auto& x : split_words(u.location)) words.push_back(x);
    } else if (w == "{loc}") {
      if (u.location == kNone) continue;
      for (auto& x : split_words(u.location)) words.push_back(x);
    } else {
      words.push_back(w);
    }
  }
  return join_words(words);
}

std::vector<std::string> SlotGrammar::words() const {
  std::set<std::string> out;
  for (const auto& u : intents())
    for (const auto& t : templates)
      if (compatible(t, u))
        for (auto& w : split_words(render(t, u))) out.insert(w);
  return {out.begin(), out.end()};
}

void to_json(json& j, const SlotGrammar& g) {
  json templates = json::array();
  for (const auto& t : g.templates) {
    json e{{"action", t.action}, {"pattern", t.pattern}};
    if (!t.objects.empty()) e["objects"] = t.objects;
    templates.push_back(std::move(e));
  }
  j = json{{"actions", g.actions},   {"objects", g.objects},
           {"locations", g.locations}, {"validity", g.validity},
           {"templates", templates}};
}

void from_json(const json& j, SlotGrammar& g) {
  try {
    j.at("actions").get_to(g.actions);
    j.at("objects").get_to(g.objects);
    j.at("locations").get_to(g.locations);
    j.at("validity").get_to(g.validity);
    g.templates.clear();
    for (const auto& e : j.at("templates")) {
      SlotTemplate t;
      e.at("action").get_to(t.action);
      e.at("pattern").get_to(t.pattern);
      if (e.contains("objects")) e.at("objects").get_to(t.objects);
      g.templates.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid grammar document: ") + e.what());
  }
}

std::vector<std::pair<std::string, IntentLabel>> grammar_expand(const SlotGrammar& g,
                                                                std::uint64_t seed,
                                                                std::size_t min_per_intent) {
  g.validate();
  Rng rng(seed);
  std::vector<std::pair<std::string, IntentLabel>> out;
  for (const auto& u : g.intents()) {
    std::vector<const SlotTemplate*> usable;
    for (const auto& t : g.templates)
      if (g.compatible(t, u)) usable.push_back(&t);
    if (usable.empty())
      throw GenerationError("no template can express intent (" + u.action + ", " + u.object +
                            ", " + u.location + ")");
    for (std::size_t k = 0; k < min_per_intent; ++k) {
      const auto* t = usable[static_cast<std::size_t>(
          rng.integer(0, static_cast<std::int64_t>(usable.size()) - 1))];
      out.emplace_back(g.render(*t, u), u);
    }
  }
  return out;
}

// --- lexicon ---------------------------------------------------------------

std::size_t Lexicon::phone_id(const std::string& name) const {
  auto it = std::find(phones.begin(), phones.end(), name);
  if (it == phones.end()) throw ConfigError("lexicon: unknown phone '" + name + "'");
  return static_cast<std::size_t>(it - phones.begin());
}

void Lexicon::validate() const {
  if (phones.empty()) throw ConfigError("lexicon: empty phone inventory");
  for (const auto& [w, prons] : words) {
    if (prons.empty() || prons.front().empty())
      throw ConfigError("lexicon: word '" + w + "' has no pronunciation");
    for (const auto& p : prons)
      for (auto id : p)
        if (id >= phones.size())
          throw ConfigError("lexicon: word '" + w + "' uses phone id " + std::to_string(id));
  }
}

std::vector<std::size_t> Lexicon::phonemize(std::string_view text) const {
  std::vector<std::size_t> out;
  for (const auto& w : split_words(text)) {
    auto it = words.find(w);
    if (it == words.end() || it->second.empty())
      throw LexiconMissError("word '" + w + "' is not in the lexicon");
    const auto& pron = it->second.front();
    out.insert(out.end(), pron.begin(), pron.end());
  }
  return out;
}

void to_json(json& j, const Lexicon& lex) {
  json words = json::object();
  for (const auto& [w, prons] : lex.words) {
    json list = json::array();
    for (const auto& p : prons) {
      json names = json::array();
      for (auto id : p) names.push_back(lex.phones[id]);
      list.push_back(std::move(names));
    }
    words[w] = std::move(list);
  }
  j = json{{"phones", lex.phones}, {"words", words}};
}

void from_json(const json& j, Lexicon& lex) {
  try {
    j.at("phones").get_to(lex.phones);
    lex.words.clear();
    for (const auto& [w, prons] : j.at("words").items())
      for (const auto& p : prons) {
        std::vector<std::size_t> ids;
        for (const auto& name : p) ids.push_back(lex.phone_id(name.get<std::string>()));
        lex.words[w].push_back(std::move(ids));
      }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid lexicon document: ") + e.what());
  }
}

// --- features --------------------------------------------------------------

Tensor make_phone_prototypes(std::size_t num_phones, std::size_t dim, std::uint64_t seed,
                             double min_distance) {
  Rng rng(seed);
  Tensor protos({num_phones, dim});
  for (std::size_t p = 0; p < num_phones; ++p) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000)
        throw GenerationError("cannot place phone prototypes at distance >= " +
                              std::to_string(min_distance));
      auto row = protos.row(p);
      for (double& v : row) v = rng.normal();
      bool ok = true;
      for (std::size_t q = 0; q < p && ok; ++q) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
          const double diff = row[k] - protos.at(q, k);
          d2 += diff * diff;
        }
        ok = std::sqrt(d2) >= min_distance;
      }
      if (ok) break;
    }
  }
  return protos;
}

std::pair<FeatureSequence, PhoneAlignment> synth_features(std::span<const std::size_t> phones,
                                                          const Tensor& prototypes,
                                                          std::uint64_t seed,
                                                          const SynthConfig& cfg) {
  if (cfg.min_dur < 1 || cfg.max_dur < cfg.min_dur)
    throw ContractError("synth_features: need 1 <= min_dur <= max_dur");
  if (phones.empty()) throw ContractError("synth_features: empty phone sequence");
  const std::size_t dim = prototypes.cols();
  if (!cfg.speaker_offset.empty() && cfg.speaker_offset.size() != dim)
    throw ShapeError("synth_features: speaker offset has " +
                     std::to_string(cfg.speaker_offset.size()) + " dims, features have " +
                     std::to_string(dim));
  Rng rng(seed);
  PhoneAlignment align;
  for (auto p : phones) {
    if (p >= prototypes.rows())
      throw ContractError("synth_features: phone id " + std::to_string(p) + " has no prototype");
    const auto dur = static_cast<std::size_t>(rng.integer(
        static_cast<std::int64_t>(cfg.min_dur), static_cast<std::int64_t>(cfg.max_dur)));
    align.insert(align.end(), dur, p);
  }
  Tensor frames({align.size(), dim});
  for (std::size_t t = 0; t < align.size(); ++t) {
    auto proto = prototypes.row(align[t]);
    auto out = frames.row(t);
    for (std::size_t k = 0; k < dim; ++k) {
      double v = proto[k];
      if (!cfg.speaker_offset.empty()) v += cfg.speaker_offset[k];
      if (cfg.noise_sigma > 0.0) v += rng.normal(0.0, cfg.noise_sigma);
      out[k] = static_cast<double>(static_cast<float>(v));
    }
  }
  return {FeatureSequence{std::move(frames)}, std::move(align)};
}

// --- corpus config ---------------------------------------------------------

void CorpusConfig::validate() const {
  if (feat_dim == 0) throw ConfigError("corpus: feat_dim must be positive");
  if (min_dur < 1 || max_dur < min_dur) throw ConfigError("corpus: need 1 <= min_dur <= max_dur");
  if (pretrain_min_words < 1 || pretrain_max_words < pretrain_min_words)
    throw ConfigError("corpus: bad pre-training sentence length range");
  if (slu_speakers[0] == 0 || slu_speakers[1] == 0 || slu_speakers[2] == 0)
    throw ConfigError("corpus: every SLU split needs at least one speaker");
  if (pretrain_speakers[0] == 0 || pretrain_speakers[1] == 0)
    throw ConfigError("corpus: pre-training needs train and valid speakers");
  if (!slu_speaker_names.empty()) {
    std::set<std::string> all;
    for (const char* split : {"train", "valid", "test"}) {
      auto it = slu_speaker_names.find(split);
      if (it == slu_speaker_names.end() || it->second.empty())
        throw ConfigError(std::string("corpus: no speakers named for split ") + split);
      for (const auto& s : it->second)
        if (!all.insert(s).second)
          throw ConfigError("corpus: speaker '" + s + "' appears in more than one split");
    }
  }
}

void to_json(json& j, const CorpusConfig& c) {
  j = json{{"feat_dim", c.feat_dim},
           {"slu_speakers", c.slu_speakers},
           {"slu_utts_per_speaker", c.slu_utts_per_speaker},
           {"pretrain_speakers", c.pretrain_speakers},
           {"pretrain_utts_per_speaker", c.pretrain_utts_per_speaker},
           {"min_per_intent", c.min_per_intent},
           {"pretrain_min_words", c.pretrain_min_words},
           {"pretrain_max_words", c.pretrain_max_words},
           {"min_dur", c.min_dur},
           {"max_dur", c.max_dur},
           {"noise_sigma", c.noise_sigma},
           {"speaker_sigma", c.speaker_sigma},
           {"channel_sigma", c.channel_sigma},
           {"prototype_min_distance", c.prototype_min_distance}};
  if (!c.slu_speaker_names.empty()) j["slu_speaker_names"] = c.slu_speaker_names;
}

void from_json(const json& j, CorpusConfig& c) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  try {
    get("feat_dim", c.feat_dim);
    get("slu_speakers", c.slu_speakers);
    get("slu_utts_per_speaker", c.slu_utts_per_speaker);
    get("pretrain_speakers", c.pretrain_speakers);
    get("pretrain_utts_per_speaker", c.pretrain_utts_per_speaker);
    get("min_per_intent", c.min_per_intent);
    get("pretrain_min_words", c.pretrain_min_words);
    get("pretrain_max_words", c.pretrain_max_words);
    get("min_dur", c.min_dur);
    get("max_dur", c.max_dur);
    get("noise_sigma", c.noise_sigma);
    get("speaker_sigma", c.speaker_sigma);
    get("channel_sigma", c.channel_sigma);
    get("prototype_min_distance", c.prototype_min_distance);
    get("slu_speaker_names", c.slu_speaker_names);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid corpus config: ") + e.what());
  }
}

// --- generation ------------------------------------------------------------

Corpus gen_corpus(const SlotGrammar& g, const Lexicon& lex, const CorpusConfig& cfg,
                  std::uint64_t seed) {
  cfg.validate();
  g.validate();
  lex.validate();
  const auto intents = g.intents();
  if (cfg.slu_utts_per_speaker < cfg.min_per_intent * intents.size())
    throw ConfigError("corpus: " + std::to_string(cfg.slu_utts_per_speaker) +
                      " utterances per speaker cannot cover " + std::to_string(intents.size()) +
                      " intents " + std::to_string(cfg.min_per_intent) + " times");
  std::vector<std::vector<const SlotTemplate*>> usable(intents.size());
  for (const auto& u : intents) {
    for (const auto& t : g.templates)
      if (g.compatible(t, u)) usable[u.id].push_back(&t);
    if (usable[u.id].empty())
      throw GenerationError("no template can express intent (" + u.action + ", " + u.object +
                            ", " + u.location + ")");
  }

  const Tensor protos = make_phone_prototypes(lex.num_phones(), cfg.feat_dim,
                                              derive_seed(seed, "prototypes"),
                                              cfg.prototype_min_distance);
  Rng rng(derive_seed(seed, "corpus"));
  auto offset = [&](double sigma) {
    std::vector<double> v(cfg.feat_dim);
    for (double& x : v) x = rng.normal(0.0, sigma);
    return v;
  };
  const std::vector<double> channel = offset(cfg.channel_sigma);

  auto make_utt = [&](std::string id, std::string speaker, Split split, std::string text,
                      const std::vector<double>& spk_offset) {
    Utterance u;
    u.id = std::move(id);
    u.speaker = std::move(speaker);
    u.split = split;
    u.text = std::move(text);
    SynthConfig sc{cfg.min_dur, cfg.max_dur, cfg.noise_sigma, spk_offset};
    auto [feats, align] = synth_features(lex.phonemize(u.text), protos, rng.next(), sc);
    u.features = std::move(feats);
    u.phones = std::move(align);
    return u;
  };

  Corpus corpus;
  std::set<std::string> slu_texts;
  const Split splits[3] = {Split::kTrain, Split::kValid, Split::kTest};
  for (int s = 0; s < 3; ++s) {
    std::vector<std::string> speakers;
    auto named = cfg.slu_speaker_names.find(to_string(splits[s]));
    if (named != cfg.slu_speaker_names.end()) {
      speakers = named->second;
    } else {
      for (std::size_t i = 0; i < cfg.slu_speakers[s]; ++i)
        speakers.push_back(speaker_name("slu-" + to_string(splits[s]) + "-", i));
    }
    for (const auto& spk : speakers) {
      std::vector<double> spk_offset = offset(cfg.speaker_sigma);
      for (std::size_t k = 0; k < cfg.feat_dim; ++k) spk_offset[k] += channel[k];
      std::vector<std::size_t> order(intents.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng.engine());
      for (std::size_t n = 0; n < cfg.slu_utts_per_speaker; ++n) {
        const IntentLabel& u = intents[order[n % order.size()]];
        const auto& ts = usable[u.id];
        const auto* t = ts[static_cast<std::size_t>(
            rng.integer(0, static_cast<std::int64_t>(ts.size()) - 1))];
        std::string text = g.render(*t, u);
        slu_texts.insert(text);
        Utterance utt = make_utt(spk + "-" + std::to_string(n), spk, splits[s], std::move(text),
                                 spk_offset);
        utt.intent = u;
        corpus.slu.push_back(std::move(utt));
      }
    }
  }

  std::vector<std::string> word_list;
  for (const auto& [w, _] : lex.words) word_list.push_back(w);
  for (int s = 0; s < 2; ++s) {
    for (std::size_t i = 0; i < cfg.pretrain_speakers[s]; ++i) {
      const std::string spk = speaker_name("pre-" + to_string(splits[s]) + "-", i);
      const std::vector<double> spk_offset = offset(cfg.speaker_sigma);
      for (std::size_t n = 0; n < cfg.pretrain_utts_per_speaker; ++n) {
        std::string text;
        do {
          const auto len = rng.integer(static_cast<std::int64_t>(cfg.pretrain_min_words),
                                       static_cast<std::int64_t>(cfg.pretrain_max_words));
          std::vector<std::string> words;
          for (std::int64_t k = 0; k < len; ++k)
            words.push_back(word_list[static_cast<std::size_t>(
                rng.integer(0, static_cast<std::int64_t>(word_list.size()) - 1))]);
          text = join_words(words);
        } while (slu_texts.count(text));
        corpus.pretrain.push_back(
            make_utt(spk + "-" + std::to_string(n), spk, splits[s], std::move(text), spk_offset));
      }
    }
  }
  return corpus;
}

// --- files -----------------------------------------------------------------

void write_feature_file(const std::filesystem::path& path, const FeatureSequence& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write feature file " + path.string());
  os.write("FEAT", 4);
  put_u32(os, 1);
  put_u32(os, static_cast<std::uint32_t>(f.num_frames()));
  put_u32(os, static_cast<std::uint32_t>(f.dim()));
  std::vector<char> buf(f.frames.size() * 4);
  for (std::size_t i = 0; i < f.frames.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(f.frames[i]));
    for (int b = 0; b < 4; ++b) buf[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
  }
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw IoError("failed writing feature file " + path.string());
}

FeatureSequence read_feature_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read feature file " + path.string());
  char magic[4];
  if (!is.read(magic, 4)) throw IoError("truncated feature file " + path.string());
  if (std::memcmp(magic, "FEAT", 4) != 0)
    throw FormatError("bad magic in feature file " + path.string());
  const auto version = get_u32(is, path.string());
  if (version != 1)
    throw FormatError("unsupported feature file version " + std::to_string(version));
  const auto t_len = get_u32(is, path.string());
  const auto dim = get_u32(is, path.string());
  if (t_len == 0 || dim == 0) throw FormatError("empty feature matrix in " + path.string());
  std::vector<unsigned char> buf(static_cast<std::size_t>(t_len) * dim * 4);
  if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw IoError("truncated feature data in " + path.string());
  Tensor frames({t_len, dim});
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(buf[i * 4 + b]) << (8 * b);
    frames[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return {std::move(frames)};
}

nlohmann::json manifest_entry(const Utterance& u) {
  json j{{"id", u.id},
         {"speaker", u.speaker},
         {"split", to_string(u.split)},
         {"text", u.text},
         {"feature_file", u.feature_file},
         {"frames", u.features.num_frames()},
         {"dim", u.features.dim()},
         {"phones", u.phones}};
  if (u.intent)
    j["intent"] = json{{"action", u.intent->action},
                       {"object", u.intent->object},
                       {"location", u.intent->location},
                       {"id", u.intent->id}};
  return j;
}

void write_manifest(const std::filesystem::path& manifest, std::span<Utterance> utts,
                    const std::filesystem::path& feats_dir) {
  std::error_code ec;
  std::filesystem::create_directories(feats_dir, ec);
  if (ec) throw IoError("cannot create " + feats_dir.string() + ": " + ec.message());
  std::ofstream os(manifest);
  if (!os) throw IoError("cannot write manifest " + manifest.string());
  const auto base = manifest.parent_path();
  for (auto& u : utts) {
    const auto feat_path = feats_dir / (u.id + ".feat");
    write_feature_file(feat_path, u.features);
    u.feature_file = std::filesystem::relative(feat_path, base.empty() ? "." : base).generic_string();
    os << manifest_entry(u).dump() << '\n';
  }
  if (!os) throw IoError("failed writing manifest " + manifest.string());
}

std::vector<Utterance> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream is(manifest);
  if (!is) throw IoError("cannot read manifest " + manifest.string());
  std::vector<Utterance> out;
  const auto base = manifest.parent_path();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Utterance u;
      j.at("id").get_to(u.id);
      j.at("speaker").get_to(u.speaker);
      u.split = split_from_string(j.at("split").get<std::string>());
      j.at("text").get_to(u.text);
      j.at("feature_file").get_to(u.feature_file);
      if (j.contains("phones")) j.at("phones").get_to(u.phones);
      if (j.contains("intent") && !j.at("intent").is_null()) {
        const auto& ji = j.at("intent");
        u.intent = IntentLabel{ji.at("action").get<std::string>(),
                               ji.at("object").get<std::string>(),
                               ji.at("location").get<std::string>(),
                               ji.at("id").get<std::size_t>()};
      }
      u.features = read_feature_file(base / u.feature_file);
      const auto frames = j.at("frames").get<std::size_t>();
      const auto dim = j.at("dim").get<std::size_t>();
      if (u.features.num_frames() != frames || u.features.dim() != dim)
        throw FormatError("feature file of '" + u.id + "' disagrees with manifest shape");
      if (!u.phones.empty() && u.phones.size() != frames)
        throw FormatError("alignment of '" + u.id + "' has " + std::to_string(u.phones.size()) +
                          " frames, expected " + std::to_string(frames));
      out.push_back(std::move(u));
    } catch (const json::exception& e) {
      throw FormatError(manifest.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<const Utterance*> select_split(std::span<const Utterance> utts, Split s) {
  std::vector<const Utterance*> out;
  for (const auto& u : utts)
    if (u.split == s) out.push_back(&u);
  return out;
}

}  // namespace slu
