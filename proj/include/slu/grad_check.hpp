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

#include <functional>

#include "slu/graph.hpp"

namespace slu {

using ScalarFn = std::function<Var(Graph&, Var)>;

// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
// for the scalar function f at x.
double grad_check(const ScalarFn& f, const Tensor& x, double h = 1e-5);

// Same check against every parameter in params, holding x fixed. The function
// receives a fresh graph each call and must bind params itself.
double grad_check_params(const std::function<Var(Graph&)>& f,
                         std::span<Parameter* const> params, double h = 1e-5);

}  // namespace slu
