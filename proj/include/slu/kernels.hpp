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

// Numeric kernels shared by the autodiff graph and the streaming decoder.
// Both paths must call exactly these functions so that frame-by-frame and
// whole-sequence evaluation produce bitwise identical results. Every output
// element of gemm() is accumulated in ascending k order regardless of how many
// rows are processed at once; the build disables FP contraction.

#include <cstddef>
#include <span>

namespace slu::kernels {

// c[m x n] = a[m x k] * b[k x n]
void gemm(const double* a, const double* b, double* c, std::size_t m,
          std::size_t k, std::size_t n);
// c[m x n] += a[m x k] * b[k x n]
void gemm_acc(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n);
// b[k x n] += a^T * d, with a[m x k], d[m x n]
void gemm_tn_acc(const double* a, const double* d, double* b, std::size_t m,
                 std::size_t k, std::size_t n);
// c[m x k] += a[m x n] * b[k x n]^T
void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m,
                 std::size_t n, std::size_t k);
void transpose(const double* a, double* out, std::size_t rows, std::size_t cols);

void add(std::span<const double> a, std::span<const double> b, std::span<double> out);
// out[r, :] = x[r, :] + bias for every row
void add_bias(std::span<const double> x, std::span<const double> bias,
              std::span<double> out);

double sigmoid(double x);
void apply_sigmoid(std::span<const double> x, std::span<double> out);
void apply_tanh(std::span<const double> x, std::span<double> out);
void apply_relu(std::span<const double> x, std::span<double> out);

void log_softmax_row(std::span<const double> x, std::span<double> out);

// LSTM cell with gate blocks ordered (input, forget, candidate, output).
// pre has 4H entries; c_prev, h_out, c_out have H entries.
void lstm_cell(std::span<const double> pre, std::span<const double> c_prev,
               std::span<double> h_out, std::span<double> c_out);

// Writes the causal window [x_{t-width+1}, ..., x_t] (zero-padded on the
// left) for frame t of a row-major T x dim sequence.
void causal_window(const double* xs, std::size_t t, std::size_t dim,
                   std::size_t width, double* out);

double log_add(double a, double b);

}  // namespace slu::kernels
