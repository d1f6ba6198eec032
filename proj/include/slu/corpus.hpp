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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "slu/tensor.hpp"

namespace slu {

// Combined (action, object, location) slot values; id indexes the
// canonical sorted list of valid triples.
struct IntentLabel {
  std::string action;
  std::string object;
  std::string location;
  std::size_t id = 0;

  friend bool operator==(const IntentLabel&, const IntentLabel&) = default;
};

// Sentence pattern for one action. "{object}" expands to the object value;
// "{location}" to "in the <location>" and "{loc}" to the bare location; both
// vanish when the location is "none". A non-empty object filter restricts
// the template to those objects and lets the pattern imply the object.
struct SlotTemplate {
  std::string action;
  std::string pattern;
  std::vector<std::string> objects;
};

struct SlotGrammar {
  static constexpr std::string_view kNone = "none";

  std::vector<std::string> actions;
  std::vector<std::string> objects;
  std::vector<std::string> locations;
  std::vector<std::array<std::string, 3>> validity;
  std::vector<SlotTemplate> templates;

  static SlotGrammar default_grammar();
  void validate() const;
  // Valid triples in canonical (sorted) order.
  std::vector<IntentLabel> intents() const;
  std::size_t num_intents() const { return intents().size(); }
  bool compatible(const SlotTemplate& t, const IntentLabel& u) const;
  std::string render(const SlotTemplate& t, const IntentLabel& u) const;
  std::vector<std::string> words() const;
};

void to_json(nlohmann::json& j, const SlotGrammar& g);
void from_json(const nlohmann::json& j, SlotGrammar& g);

struct Lexicon {
  std::vector<std::string> phones;
  // Pronunciations as phone ids; the first one is used for synthesis.
  std::map<std::string, std::vector<std::vector<std::size_t>>> words;

  static Lexicon default_lexicon();
  std::size_t num_phones() const { return phones.size(); }
  std::size_t phone_id(const std::string& name) const;
  void validate() const;
  std::vector<std::size_t> phonemize(std::string_view text) const;
};

void to_json(nlohmann::json& j, const Lexicon& lex);
void from_json(const nlohmann::json& j, Lexicon& lex);

using PhoneAlignment = std::vector<std::size_t>;

struct FeatureSequence {
  Tensor frames;  // [T x D]
  std::size_t num_frames() const { return frames.rows(); }
  std::size_t dim() const { return frames.cols(); }
};

enum class Split { kTrain, kValid, kTest };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct Utterance {
  std::string id;
  std::string speaker;
  Split split = Split::kTrain;
  std::string text;
  PhoneAlignment phones;
  std::optional<IntentLabel> intent;
  FeatureSequence features;
  std::string feature_file;
};

struct SynthConfig {
  std::size_t min_dur = 2;
  std::size_t max_dur = 4;
  double noise_sigma = 0.3;
  std::vector<double> speaker_offset;  // length D, or empty for zero
};

// Prototype feature vector per phone: unit gaussians, rejection-sampled to
// a minimum pairwise distance.
Tensor make_phone_prototypes(std::size_t num_phones, std::size_t dim, std::uint64_t seed,
                             double min_distance = 1.0);

// Each phone lasts a uniform number of frames in [min_dur, max_dur]; every
// frame is prototype + speaker offset + gaussian noise, rounded to float32.
std::pair<FeatureSequence, PhoneAlignment> synth_features(std::span<const std::size_t> phones,
                                                          const Tensor& prototypes,
                                                          std::uint64_t seed,
                                                          const SynthConfig& cfg);

// min_per_intent rendered sentences for every valid triple.
std::vector<std::pair<std::string, IntentLabel>> grammar_expand(const SlotGrammar& g,
                                                                std::uint64_t seed,
                                                                std::size_t min_per_intent = 1);

struct CorpusConfig {
  std::size_t feat_dim = 16;
  std::array<std::size_t, 3> slu_speakers{14, 3, 3};  // train, valid, test
  std::size_t slu_utts_per_speaker = 125;
  std::array<std::size_t, 2> pretrain_speakers{36, 4};  // train, valid
  std::size_t pretrain_utts_per_speaker = 220;
  std::size_t min_per_intent = 1;  // per speaker
  std::size_t pretrain_min_words = 3;
  std::size_t pretrain_max_words = 7;
  std::size_t min_dur = 2;
  std::size_t max_dur = 4;
  double noise_sigma = 0.3;
  double speaker_sigma = 0.2;
  // Per-dimension sigma of a fixed offset applied to every SLU frame; models
  // the acoustic mismatch between the pre-training and SLU recordings.
  double channel_sigma = 0.5;
  double prototype_min_distance = 1.0;
  // Optional explicit speaker names; must be pairwise disjoint.
  std::map<std::string, std::vector<std::string>> slu_speaker_names;

  void validate() const;
};

void to_json(nlohmann::json& j, const CorpusConfig& c);
void from_json(const nlohmann::json& j, CorpusConfig& c);

struct Corpus {
  std::vector<Utterance> slu;
  std::vector<Utterance> pretrain;
};

Corpus gen_corpus(const SlotGrammar& g, const Lexicon& lex, const CorpusConfig& cfg,
                  std::uint64_t seed);

// Feature file: "FEAT", u32 version 1, u32 T, u32 D, T*D float32, all
// little-endian.
void write_feature_file(const std::filesystem::path& path, const FeatureSequence& f);
FeatureSequence read_feature_file(const std::filesystem::path& path);

nlohmann::json manifest_entry(const Utterance& u);
// Writes one JSON object per line; feature files go to feats_dir and are
// referenced relative to the manifest directory.
void write_manifest(const std::filesystem::path& manifest, std::span<Utterance> utts,
                    const std::filesystem::path& feats_dir);
std::vector<Utterance> read_manifest(const std::filesystem::path& manifest);

std::vector<const Utterance*> select_split(std::span<const Utterance> utts, Split s);

}  // namespace slu
