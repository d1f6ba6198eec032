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

#include "slu/bpe.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "slu/error.hpp"

namespace slu {
namespace {

using Symbols = std::vector<std::string>;

Symbols initial_symbols(std::string_view word) {
  Symbols s;
  for (std::size_t i = 0; i < word.size(); ++i) {
    std::string sym(1, word[i]);
    if (i + 1 == word.size()) sym += BpeVocab::kEndOfWord;
    s.push_back(std::move(sym));
  }
  return s;
}

void apply_merge(Symbols& s, const BpeVocab::Merge& m) {
  Symbols out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i + 1 < s.size() && s[i] == m.first && s[i + 1] == m.second) {
      out.push_back(s[i] + s[i + 1]);
      ++i;
    } else {
      out.push_back(s[i]);
    }
  }
  s = std::move(out);
}

std::string printable(char c) {
  const auto u = static_cast<unsigned char>(c);
  if (std::isprint(u)) return std::string("'") + c + "'";
  std::ostringstream os;
  os << "0x" << std::hex << static_cast<int>(u);
  return os.str();
}

}  // namespace

std::vector<std::string> split_words(std::string_view sentence) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : sentence) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

void BpeVocab::add_token(const std::string& t) {
  if (token_to_id_.count(t)) return;
  token_to_id_.emplace(t, tokens_.size());
  tokens_.push_back(t);
}

BpeVocab BpeVocab::train(std::span<const std::string> corpus, std::size_t target_size) {
  std::map<std::string, std::size_t> word_counts;
  for (const auto& sentence : corpus)
    for (auto& w : split_words(sentence)) ++word_counts[w];
  if (word_counts.empty()) throw ContractError("bpe_train: empty corpus");

  std::set<std::string> alphabet;
  BpeVocab v;
  for (const auto& [w, _] : word_counts)
    for (char c : w) {
      v.alphabet_[static_cast<unsigned char>(c)] = true;
      alphabet.insert(std::string(1, c));
      alphabet.insert(std::string(1, c) + std::string(kEndOfWord));
    }
  if (target_size < alphabet.size() + 1)
    throw ContractError("bpe_train: target size " + std::to_string(target_size) +
                        " below alphabet size + blank (" + std::to_string(alphabet.size() + 1) +
                        ")");
  v.add_token(std::string(kBlankToken));
  for (const auto& s : alphabet) v.add_token(s);

  std::vector<std::pair<Symbols, std::size_t>> words;
  for (const auto& [w, n] : word_counts) words.emplace_back(initial_symbols(w), n);

  while (v.size() < target_size) {
    std::map<Merge, std::size_t> pair_counts;
    for (const auto& [syms, n] : words)
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) pair_counts[{syms[i], syms[i + 1]}] += n;
    // std::map iterates in lexicographic pair order, so the first maximum
    // wins ties.
    const Merge* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [pair, n] : pair_counts)
      if (n > best_count) {
        best = &pair;
        best_count = n;
      }
    if (best == nullptr || best_count < 2) break;
    const Merge merge = *best;
    for (auto& [syms, _] : words) apply_merge(syms, merge);
    v.merges_.push_back(merge);
    v.add_token(merge.first + merge.second);
  }
  return v;
}

std::vector<std::string> BpeVocab::segment(std::string_view word) const {
  for (char c : word)
    if (!alphabet_[static_cast<unsigned char>(c)])
      throw UnknownSymbolError("bpe_encode: unknown character " + printable(c) + " in word '" +
                               std::string(word) + "'");
  Symbols syms = initial_symbols(word);
  for (const auto& m : merges_) {
    if (syms.size() < 2) break;
    apply_merge(syms, m);
  }
  return syms;
}

WordpieceSequence BpeVocab::encode(std::string_view sentence) const {
  WordpieceSequence out;
  for (const auto& w : split_words(sentence))
    for (const auto& sym : segment(w)) out.push_back(id(sym));
  return out;
}

std::vector<std::string> BpeVocab::decode_words(std::span<const TokenId> tokens) const {
  std::vector<std::string> words;
  std::string cur;
  for (TokenId t : tokens) {
    if (t == kBlank) throw ContractError("bpe_decode: blank id in token sequence");
    std::string_view piece = token(t);
    const bool eow = piece.size() >= kEndOfWord.size() &&
                     piece.substr(piece.size() - kEndOfWord.size()) == kEndOfWord;
    if (eow) piece.remove_suffix(kEndOfWord.size());
    cur.append(piece);
    if (eow) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::string BpeVocab::decode(std::span<const TokenId> tokens) const {
  return join_words(decode_words(tokens));
}

const std::string& BpeVocab::token(TokenId id) const {
  if (id >= tokens_.size())
    throw ContractError("token id " + std::to_string(id) + " outside vocabulary of " +
                        std::to_string(tokens_.size()));
  return tokens_[id];
}

bool BpeVocab::contains(std::string_view token) const {
  return token_to_id_.find(token) != token_to_id_.end();
}

TokenId BpeVocab::id(std::string_view token) const {
  auto it = token_to_id_.find(token);
  if (it == token_to_id_.end())
    throw UnknownSymbolError("token '" + std::string(token) + "' not in vocabulary");
  return it->second;
}

std::string BpeVocab::serialize() const {
  std::ostringstream os;
  os << "BPEV1 " << tokens_.size() << '\n';
  for (const auto& t : tokens_) os << t << '\n';
  os << "MERGES\n";
  for (const auto& [l, r] : merges_) os << l << ' ' << r << '\n';
  return os.str();
}

BpeVocab BpeVocab::parse(std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  if (!std::getline(is, line) || line.rfind("BPEV1 ", 0) != 0)
    throw FormatError("vocabulary file: missing 'BPEV1 <size>' header");
  std::size_t n = 0;
  try {
    n = std::stoul(line.substr(6));
  } catch (const std::exception&) {
    throw FormatError("vocabulary file: bad size in header '" + line + "'");
  }
  BpeVocab v;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(is, line)) throw FormatError("vocabulary file: truncated token list");
    if (v.token_to_id_.count(line)) throw FormatError("vocabulary file: duplicate token " + line);
    v.add_token(line);
  }
  if (n == 0 || v.tokens_[0] != kBlankToken)
    throw FormatError("vocabulary file: id 0 must be the blank token");
  if (!std::getline(is, line) || line != "MERGES")
    throw FormatError("vocabulary file: missing MERGES sentinel");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos) throw FormatError("vocabulary file: bad merge line '" + line + "'");
    Merge m{line.substr(0, sp), line.substr(sp + 1)};
    if (!v.contains(m.first + m.second))
      throw FormatError("vocabulary file: merge result '" + m.first + m.second + "' not a token");
    v.merges_.push_back(std::move(m));
  }
  // Single characters, bare or word-final, form the alphabet.
  for (const auto& t : v.tokens_)
    if (t.size() == 1 || (t.size() == 1 + kEndOfWord.size() && t.substr(1) == kEndOfWord))
      v.alphabet_[static_cast<unsigned char>(t[0])] = true;
  return v;
}

void BpeVocab::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write vocabulary file " + path.string());
  os << serialize();
  if (!os) throw IoError("failed writing vocabulary file " + path.string());
}

BpeVocab BpeVocab::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read vocabulary file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

}  // namespace slu
