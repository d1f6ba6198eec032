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

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "slu/error.hpp"
#include "slu/experiment.hpp"

namespace slu {
namespace {

namespace fs = std::filesystem;

RunConfig tiny_config(const fs::path& out) {
  RunConfig c = RunConfig::defaults();
  c.out = out;
  c.corpus.slu_speakers = {3, 1, 1};
  c.corpus.slu_utts_per_speaker = 31;
  c.corpus.pretrain_speakers = {2, 1};
  c.corpus.pretrain_utts_per_speaker = 30;
  c.bpe_size = 100;
  c.dims.conv = {{3, 12}};
  c.dims.word_hidden = 12;
  c.dims.word_layers = 1;
  c.dims.intent_hidden = 8;
  c.dims.intent_layers = 1;
  c.nlu = {8, 8, 1};
  for (TrainOptions* o : {&c.phoneme, &c.word_pretrain, &c.word_finetune, &c.intent, &c.nlu_train})
    o->max_epochs = 1;
  c.sweep_alphas = {0.4, 0.8};
  c.beam = 3;
  c.nbest = 2;
  c.threads = 1;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

TEST(Config, JsonRoundTrip) {
  RunConfig c = tiny_config("x");
  c.alpha = 0.45;
  c.split = Split::kValid;
  nlohmann::json j = c;
  const RunConfig back = j.get<RunConfig>();
  EXPECT_EQ(nlohmann::json(back), j);
  EXPECT_EQ(back.alpha, 0.45);
  EXPECT_EQ(back.split, Split::kValid);
  EXPECT_EQ(back.dims.conv.size(), 1u);
}

TEST(Config, RejectsUnknownKeysAndPhaseSeeds) {
  nlohmann::json j = RunConfig::defaults();
  j["learning_rate"] = 1.0;
  EXPECT_THROW(j.get<RunConfig>(), ConfigError);
  j = RunConfig::defaults();
  j["word_pretrain"]["seed"] = 3;
  EXPECT_THROW(j.get<RunConfig>(), ConfigError);
  RunConfig bad = RunConfig::defaults();
  bad.alpha = 1.5;
  EXPECT_ANY_THROW(bad.validate());
  bad = RunConfig::defaults();
  bad.nbest = bad.beam + 1;
  EXPECT_ANY_THROW(bad.validate());
}

TEST(Config, PartialFileKeepsDefaults) {
  const auto d = fresh_dir("slu_cfg");
  fs::create_directories(d);
  std::ofstream(d / "c.json") << R"({"alpha": 0.7, "word_pretrain": {"lr": 0.01}})";
  const RunConfig c = load_run_config(d / "c.json");
  const RunConfig def = RunConfig::defaults();
  EXPECT_EQ(c.alpha, 0.7);
  EXPECT_EQ(c.word_pretrain.lr, 0.01);
  EXPECT_EQ(c.word_pretrain.max_epochs, def.word_pretrain.max_epochs);
  EXPECT_EQ(c.beam, def.beam);
  std::ofstream(d / "bad.json") << "{ not json";
  EXPECT_ANY_THROW(load_run_config(d / "bad.json"));
  fs::remove_all(d);
}

TEST(Config, DottedOverrides) {
  RunConfig c = RunConfig::defaults();
  apply_override(c, "word_pretrain.lr=0.002");
  apply_override(c, "dims.conv=[[3,32]]");
  apply_override(c, "split=valid");
  apply_override(c, "corpus.noise_sigma=0.5");
  EXPECT_EQ(c.word_pretrain.lr, 0.002);
  ASSERT_EQ(c.dims.conv.size(), 1u);
  EXPECT_EQ(c.dims.conv[0].second, 32u);
  EXPECT_EQ(c.split, Split::kValid);
  EXPECT_EQ(c.corpus.noise_sigma, 0.5);
  EXPECT_THROW(apply_override(c, "word_pretrain.seed=3"), ConfigError);
  EXPECT_THROW(apply_override(c, "no_such_field=1"), ConfigError);
  EXPECT_THROW(apply_override(c, "alpha"), ConfigError);
  EXPECT_THROW(apply_override(c, "beam=\"wide\""), ConfigError);
}

TEST(Phases, NamesRoundTrip) {
  for (Phase p : {Phase::kPhoneme, Phase::kWordPretrain, Phase::kWordFinetune,
                  Phase::kIntentStepwise, Phase::kMtl, Phase::kNlu})
    EXPECT_EQ(phase_from_string(to_string(p)), p);
  EXPECT_ANY_THROW(phase_from_string("warmup"));
}

TEST(Commands, DependenciesAreChecked) {
  const RunConfig c = tiny_config(fresh_dir("slu_dep"));
  EXPECT_THROW(cmd_train(c, Phase::kPhoneme), DependencyError);
  cmd_gen_corpus(c);
  try {
    cmd_train(c, Phase::kMtl);
    FAIL();
  } catch (const DependencyError& e) {
    EXPECT_NE(std::string(e.what()).find("train --phase"), std::string::npos);
  }
  EXPECT_THROW(cmd_eval(c, Phase::kMtl), DependencyError);
  fs::remove_all(c.out);
}

TEST(Commands, GenCorpusIsDeterministicAndCountsMatch) {
  RunConfig a = tiny_config(fresh_dir("slu_gen_a"));
  RunConfig b = tiny_config(fresh_dir("slu_gen_b"));
  const auto ra = cmd_gen_corpus(a);
  cmd_gen_corpus(b);
  const RunLayout la(a.out), lb(b.out);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const std::string ma = slurp(la.slu_manifest());
  EXPECT_FALSE(ma.empty());
  EXPECT_EQ(ma, slurp(lb.slu_manifest()));
  // Recount from the manifest.
  std::map<std::string, std::set<std::string>> speakers;
  std::map<std::string, std::size_t> utts;
  std::istringstream lines(ma);
  for (std::string line; std::getline(lines, line);) {
    const auto j = nlohmann::json::parse(line);
    const auto split = j.at("split").get<std::string>();
    speakers[split].insert(j.at("speaker").get<std::string>());
    ++utts[split];
  }
  std::size_t checked = 0;
  for (const auto& r : ra)
    if (r.corpus == "slu") {
      EXPECT_EQ(r.speakers, speakers[r.split].size()) << r.split;
      EXPECT_EQ(r.utterances, utts[r.split]) << r.split;
      ++checked;
    }
  EXPECT_EQ(checked, 3u);
  EXPECT_EQ(utts["train"], 93u);
  const auto table = format_counts_table(ra);
  EXPECT_NE(table.find("Speakers"), std::string::npos);
  EXPECT_NE(table.find("Utterances"), std::string::npos);
  fs::remove_all(a.out);
  fs::remove_all(b.out);
}

TEST(Commands, TinyEndToEnd) {
  const RunConfig c = tiny_config(fresh_dir("slu_e2e"));
  const RunLayout layout(c.out);
  cmd_gen_corpus(c);
  cmd_train(c, Phase::kPhoneme);
  const auto wp = cmd_train(c, Phase::kWordPretrain);
  ASSERT_TRUE(wp.wer_before && wp.wer_after);
  EXPECT_TRUE(fs::exists(wp.checkpoint));
  cmd_train(c, Phase::kNlu);
  cmd_train(c, Phase::kIntentStepwise, WordStage::kPretrain);
  cmd_train(c, Phase::kWordFinetune);
  cmd_train(c, Phase::kIntentStepwise, WordStage::kFinetune);
  const auto mtl = cmd_train(c, Phase::kMtl);
  EXPECT_EQ(mtl.checkpoint, layout.checkpoint(Phase::kMtl));
  EXPECT_TRUE(fs::exists(layout.reports_dir() / "history_mtl.csv"));

  const auto ev = cmd_eval(c, Phase::kMtl);
  ASSERT_TRUE(fs::exists(ev.csv));
  const auto rows = read_eval_csv(ev.csv);
  ASSERT_EQ(rows.size(), 31u);
  EXPECT_EQ(summarize(rows).e2e_acc, ev.report.summary.e2e_acc);

  // Streaming emits one event per output frame and ends on the eval decision.
  for (std::size_t i = 0; i < 3; ++i) {
    std::ostringstream log;
    const auto events = cmd_stream(c, rows[i].utt_id, log);
    ASSERT_FALSE(events.empty());
    EXPECT_EQ(events.back().top_intent, rows[i].e2e_pred);
    for (std::size_t t = 0; t < events.size(); ++t) EXPECT_EQ(events[t].frame, t);
    std::size_t lines = 0;
    for (char ch : log.str()) lines += ch == '\n';
    EXPECT_EQ(lines, events.size());
    EXPECT_NE(log.str().find("intent="), std::string::npos);
  }
  std::ostringstream first, second;
  cmd_stream(c, rows[0].utt_id, first);
  cmd_stream(c, rows[0].utt_id, second);
  EXPECT_EQ(first.str(), second.str());
  std::ostringstream sink;
  EXPECT_THROW(cmd_stream(c, "no-such-utt", sink), LookupError);

  // The resolved configuration on disk carries the run's alpha.
  std::ifstream in(layout.resolved_config());
  EXPECT_EQ(nlohmann::json::parse(in).at("alpha").get<double>(), c.alpha);

  const auto sweep = cmd_sweep_alpha(c);
  ASSERT_EQ(sweep.size(), 2u);
  EXPECT_TRUE(fs::exists(layout.reports_dir() / "sweep_alpha.csv"));
  fs::remove_all(c.out);
}

}  // namespace
}  // namespace slu
