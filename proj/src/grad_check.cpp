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

#include "slu/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "slu/error.hpp"

namespace slu {
namespace {

double rel_err(double analytic, double numeric) {
  return std::fabs(analytic - numeric) / std::max(1.0, std::fabs(analytic));
}

}  // namespace

double grad_check(const ScalarFn& f, const Tensor& x, double h) {
  std::vector<double> analytic;
  {
    Graph g;
    Var xv = g.variable(x);
    Var loss = f(g, xv);
    g.backward(loss);
    auto gr = g.grad(xv);
    analytic.assign(x.size(), 0.0);
    std::copy(gr.begin(), gr.end(), analytic.begin());
  }
  auto eval = [&](const Tensor& at) {
    Graph g;
    return f(g, g.constant(at)).value().item();
  };
  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = eval(probe);
    probe[i] = orig - h;
    const double down = eval(probe);
    probe[i] = orig;
    worst = std::max(worst, rel_err(analytic[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

double grad_check_params(const std::function<Var(Graph&)>& f,
                         std::span<Parameter* const> params, double h) {
  for (Parameter* p : params) p->zero_grad();
  {
    Graph g;
    g.backward(f(g));
  }
  double worst = 0.0;
  for (Parameter* p : params) {
    const Tensor analytic = p->grad;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      double up, down;
      {
        Graph g;
        up = f(g).value().item();
      }
      p->value[i] = orig - h;
      {
        Graph g;
        down = f(g).value().item();
      }
      p->value[i] = orig;
      worst = std::max(worst, rel_err(analytic[i], (up - down) / (2.0 * h)));
    }
  }
  for (Parameter* p : params) p->zero_grad();
  return worst;
}

}  // namespace slu
