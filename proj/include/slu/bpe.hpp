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

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace slu {

using TokenId = std::size_t;
using WordpieceSequence = std::vector<TokenId>;

// Word-internal byte-pair-encoding vocabulary with a suffix end-of-word
// marker. Id 0 is reserved for the CTC blank and is never produced by
// encode().
class BpeVocab {
 public:
  static constexpr TokenId kBlank = 0;
  static constexpr std::string_view kBlankToken = "<blank>";
  static constexpr std::string_view kEndOfWord = "</w>";

  using Merge = std::pair<std::string, std::string>;

  // Greedy most-frequent-pair merging until target_size tokens exist or no
  // pair occurs at least twice. Ties go to the lexicographically smallest
  // pair.
  static BpeVocab train(std::span<const std::string> corpus, std::size_t target_size);

  WordpieceSequence encode(std::string_view sentence) const;
  std::string decode(std::span<const TokenId> tokens) const;
  // Words of the decoded text.
  std::vector<std::string> decode_words(std::span<const TokenId> tokens) const;

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  bool contains(std::string_view token) const;
  TokenId id(std::string_view token) const;
  const std::vector<Merge>& merges() const noexcept { return merges_; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::string serialize() const;
  static BpeVocab parse(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static BpeVocab load(const std::filesystem::path& path);

  friend bool operator==(const BpeVocab& a, const BpeVocab& b) {
    return a.tokens_ == b.tokens_ && a.merges_ == b.merges_;
  }

 private:
  void add_token(const std::string& t);
  std::vector<std::string> segment(std::string_view word) const;

  std::vector<std::string> tokens_;
  std::map<std::string, TokenId, std::less<>> token_to_id_;
  std::vector<Merge> merges_;
  std::vector<bool> alphabet_{std::vector<bool>(256, false)};
};

// Lowercases and splits on whitespace.
std::vector<std::string> split_words(std::string_view sentence);
std::string join_words(std::span<const std::string> words);

}  // namespace slu
