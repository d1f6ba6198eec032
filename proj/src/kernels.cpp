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

#include "slu/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace slu::kernels {

void gemm(const double* a, const double* b, double* c, std::size_t m,
          std::size_t k, std::size_t n) {
  std::fill(c, c + m * n, 0.0);
  gemm_acc(a, b, c, m, k, n);
}

namespace {

// Accumulators for an R x C tile of c live in registers across the whole k
// loop. Each element still sums a[i,0]*b[0,j], a[i,1]*b[1,j], ... in order.
template <std::size_t R, std::size_t C>
inline void tile(const double* a, const double* b, double* c, std::size_t k, std::size_t n,
                 std::size_t lda) {
  double acc[R][C];
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t j = 0; j < C; ++j) acc[r][j] = c[r * n + j];
  for (std::size_t p = 0; p < k; ++p) {
    const double* bp = b + p * n;
    for (std::size_t r = 0; r < R; ++r) {
      const double v = a[r * lda + p];
      for (std::size_t j = 0; j < C; ++j) acc[r][j] += v * bp[j];
    }
  }
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t j = 0; j < C; ++j) c[r * n + j] = acc[r][j];
}

template <std::size_t R>
inline void row_block(const double* a, const double* b, double* c, std::size_t k,
                      std::size_t n) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) tile<R, 8>(a, b + j, c + j, k, n, k);
  for (; j < n; ++j) tile<R, 1>(a, b + j, c + j, k, n, k);
}

}  // namespace

void gemm_acc(const double* a, const double* b, double* c, std::size_t m,
              std::size_t k, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) row_block<4>(a + i * k, b, c + i * n, k, n);
  for (; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) tile<1, 16>(ai, b + j, ci + j, k, n, k);
    for (; j + 8 <= n; j += 8) tile<1, 8>(ai, b + j, ci + j, k, n, k);
    for (; j < n; ++j) tile<1, 1>(ai, b + j, ci + j, k, n, k);
  }
}

void gemm_tn_acc(const double* a, const double* d, double* b, std::size_t m,
                 std::size_t k, std::size_t n) {
  // Tiles of b stay in registers while i runs; each element sums in
  // ascending i.
  auto tn_tile = [&](std::size_t p0, std::size_t rows, std::size_t j0, std::size_t cols) {
    double acc[4][8];
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < cols; ++j) acc[r][j] = b[(p0 + r) * n + j0 + j];
    for (std::size_t i = 0; i < m; ++i) {
      const double* ai = a + i * k + p0;
      const double* di = d + i * n + j0;
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < cols; ++j) acc[r][j] += ai[r] * di[j];
    }
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < cols; ++j) b[(p0 + r) * n + j0 + j] = acc[r][j];
  };
  std::size_t p = 0;
  for (; p + 4 <= k; p += 4) {
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      // Fixed-size body so the compiler keeps the tile in registers.
      double acc[4][8];
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t jj = 0; jj < 8; ++jj) acc[r][jj] = b[(p + r) * n + j + jj];
      for (std::size_t i = 0; i < m; ++i) {
        const double* ai = a + i * k + p;
        const double* di = d + i * n + j;
        for (std::size_t r = 0; r < 4; ++r) {
          const double v = ai[r];
          for (std::size_t jj = 0; jj < 8; ++jj) acc[r][jj] += v * di[jj];
        }
      }
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t jj = 0; jj < 8; ++jj) b[(p + r) * n + j + jj] = acc[r][jj];
    }
    if (j < n) tn_tile(p, 4, j, n - j);
  }
  for (; p < k; ++p)
    for (std::size_t j = 0; j < n; j += 8) tn_tile(p, 1, j, std::min<std::size_t>(8, n - j));
}

void gemm_nt_acc(const double* a, const double* b, double* c, std::size_t m,
                 std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        s0 += ai[j] * bp[j];
        s1 += ai[j + 1] * bp[j + 1];
        s2 += ai[j + 2] * bp[j + 2];
        s3 += ai[j + 3] * bp[j + 3];
      }
      for (; j < n; ++j) s0 += ai[j] * bp[j];
      ci[p] += (s0 + s1) + (s2 + s3);
    }
  }
}

void transpose(const double* a, double* out, std::size_t rows, std::size_t cols) {
  constexpr std::size_t kB = 16;
  for (std::size_t r0 = 0; r0 < rows; r0 += kB)
    for (std::size_t c0 = 0; c0 < cols; c0 += kB) {
      const std::size_t r1 = std::min(rows, r0 + kB), c1 = std::min(cols, c0 + kB);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) out[c * rows + r] = a[r * cols + c];
    }
}

void add(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
}

void add_bias(std::span<const double> x, std::span<const double> bias,
              std::span<double> out) {
  const std::size_t n = bias.size();
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + bias[i % n];
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void apply_sigmoid(std::span<const double> x, std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sigmoid(x[i]);
}

void apply_tanh(std::span<const double> x, std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::tanh(x[i]);
}

void apply_relu(std::span<const double> x, std::span<double> out) {
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void log_softmax_row(std::span<const double> x, std::span<double> out) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : x) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : x) s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - lse;
}

void lstm_cell(std::span<const double> pre, std::span<const double> c_prev,
               std::span<double> h_out, std::span<double> c_out) {
  const std::size_t h = c_prev.size();
  for (std::size_t j = 0; j < h; ++j) {
    const double ig = sigmoid(pre[j]);
    const double fg = sigmoid(pre[h + j]);
    const double gg = std::tanh(pre[2 * h + j]);
    const double og = sigmoid(pre[3 * h + j]);
    const double c = fg * c_prev[j] + ig * gg;
    c_out[j] = c;
    h_out[j] = og * std::tanh(c);
  }
}

void causal_window(const double* xs, std::size_t t, std::size_t dim,
                   std::size_t width, double* out) {
  for (std::size_t w = 0; w < width; ++w) {
    const std::size_t back = width - 1 - w;
    double* dst = out + w * dim;
    if (back > t) {
      std::fill(dst, dst + dim, 0.0);
    } else {
      std::memcpy(dst, xs + (t - back) * dim, dim * sizeof(double));
    }
  }
}

double log_add(double a, double b) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double mx = std::max(a, b);
  return mx + std::log1p(std::exp(-std::fabs(a - b)));
}

}  // namespace slu::kernels
