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

#include <stdexcept>
#include <string>

namespace slu {

// Every error carries a short machine-readable code; the CLI prints it as a
// "<CODE>: message" prefix.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define SLU_DEFINE_ERROR(Name, Code)                                   \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& what) : Error(Code, what) {}      \
  };

SLU_DEFINE_ERROR(ShapeError, "E_SHAPE")
SLU_DEFINE_ERROR(ContractError, "E_CONTRACT")
SLU_DEFINE_ERROR(InfeasibleLabelError, "E_INFEASIBLE_LABEL")
SLU_DEFINE_ERROR(UnknownSymbolError, "E_UNKNOWN_SYMBOL")
SLU_DEFINE_ERROR(LexiconMissError, "E_LEXICON_MISS")
SLU_DEFINE_ERROR(GenerationError, "E_GENERATION")
SLU_DEFINE_ERROR(ConfigError, "E_CONFIG")
SLU_DEFINE_ERROR(FormatError, "E_FORMAT")
SLU_DEFINE_ERROR(IoError, "E_IO")
SLU_DEFINE_ERROR(DataError, "E_DATA")
SLU_DEFINE_ERROR(DependencyError, "E_DEPENDENCY")
SLU_DEFINE_ERROR(LookupError, "E_LOOKUP")

#undef SLU_DEFINE_ERROR

}  // namespace slu
