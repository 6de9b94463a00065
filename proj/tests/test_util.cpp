/* Copyright 2026 The TSCFormer Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tsc::test {

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(shape);
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

std::size_t random_extent(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

namespace oracle {

Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a.at({i, p}) * b.at({p, j});
      c.at({i, j}) = acc;
    }
  return c;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const std::size_t Ho = (H + 2 * pad - kh) / stride + 1, Wo = (W + 2 * pad - kw) / stride + 1;
  Tensor y({B, O, Ho, Wo});
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          double acc = b.empty() ? 0.0 : b[o];
          for (std::size_t c = 0; c < C; ++c)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long yy = static_cast<long>(oy * stride + i) - static_cast<long>(pad);
                const long xx = static_cast<long>(ox * stride + j) - static_cast<long>(pad);
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(H) || xx >= static_cast<long>(W)) continue;
                acc += x.at({n, c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)}) * w.at({o, c, i, j});
              }
          y.at({n, o, oy, ox}) = acc;
        }
  return y;
}

Tensor maxpool2d(const Tensor& x, std::size_t k, std::size_t stride, std::size_t pad) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t Ho = (H + 2 * pad - k) / stride + 1, Wo = (W + 2 * pad - k) / stride + 1;
  Tensor y({B, C, Ho, Wo});
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          double best = -std::numeric_limits<double>::infinity();
          for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) {
              const long yy = static_cast<long>(oy * stride + i) - static_cast<long>(pad);
              const long xx = static_cast<long>(ox * stride + j) - static_cast<long>(pad);
              const bool inside = yy >= 0 && xx >= 0 && yy < static_cast<long>(H) && xx < static_cast<long>(W);
              const double v =
                  inside ? x.at({n, c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)}) : 0.0;
              best = std::max(best, v);
            }
          y.at({n, c, oy, ox}) = best;
        }
  return y;
}

Tensor global_avgpool(const Tensor& x) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor y({B, C});
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      double acc = 0.0;
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) acc += x.at({n, c, i, j});
      y.at({n, c}) = acc / static_cast<double>(H * W);
    }
  return y;
}

Tensor softmax_rows(const Tensor& x) {
  const std::size_t K = x.shape().back(), rows = x.size() / K;
  Tensor y = x;
  for (std::size_t r = 0; r < rows; ++r) {
    const long double lse = log_sum_exp(x.data() + r * K, K);
    for (std::size_t k = 0; k < K; ++k) y[r * K + k] = static_cast<double>(std::exp(x[r * K + k] - lse));
  }
  return y;
}

Tensor batchnorm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor y(x.shape());
  for (std::size_t c = 0; c < C; ++c) {
    long double mean = 0.0;
    for (std::size_t n = 0; n < B; ++n)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) mean += x.at({n, c, i, j});
    mean /= static_cast<long double>(B * H * W);
    long double var = 0.0;
    for (std::size_t n = 0; n < B; ++n)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j) var += (x.at({n, c, i, j}) - mean) * (x.at({n, c, i, j}) - mean);
    var /= static_cast<long double>(B * H * W);
    for (std::size_t n = 0; n < B; ++n)
      for (std::size_t i = 0; i < H; ++i)
        for (std::size_t j = 0; j < W; ++j)
          y.at({n, c, i, j}) =
              static_cast<double>((x.at({n, c, i, j}) - mean) / std::sqrt(var + eps) * gamma[c] + beta[c]);
  }
  return y;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale) {
  const std::size_t B = q.dim(0), L = q.dim(1), D = q.dim(2), N = k.dim(1), Dv = v.dim(2);
  Tensor out({B, L, Dv});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t l = 0; l < L; ++l) {
      std::vector<double> logits(N);
      for (std::size_t n = 0; n < N; ++n) {
        double acc = 0.0;
        for (std::size_t d = 0; d < D; ++d) acc += q.at({b, l, d}) * k.at({b, n, d});
        logits[n] = acc * scale;
      }
      const long double lse = log_sum_exp(logits.data(), N);
      for (std::size_t d = 0; d < Dv; ++d) {
        long double acc = 0.0;
        for (std::size_t n = 0; n < N; ++n) acc += std::exp(logits[n] - lse) * v.at({b, n, d});
        out.at({b, l, d}) = static_cast<double>(acc);
      }
    }
  return out;
}

long double log_sum_exp(const double* row, std::size_t n) {
  long double mx = row[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max<long double>(mx, row[i]);
  long double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += std::exp(static_cast<long double>(row[i]) - mx);
  return mx + std::log(z);
}

Tensor temporal_shift(const Tensor& x, std::size_t divisions) {
  const std::size_t B = x.dim(0), T = x.dim(1), C = x.dim(2), H = x.dim(3), W = x.dim(4);
  const std::size_t f = C / divisions;
  Tensor out(x.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < H; ++i)
          for (std::size_t j = 0; j < W; ++j) {
            double v = 0.0;
            if (c < f) {
              if (t + 1 < T) v = x.at({b, t + 1, c, i, j});
            } else if (c < 2 * f) {
              if (t >= 1) v = x.at({b, t - 1, c, i, j});
            } else {
              v = x.at({b, t, c, i, j});
            }
            out.at({b, t, c, i, j}) = v;
          }
  return out;
}

double topk_accuracy(const Tensor& logits, const std::vector<int>& labels, std::size_t k) {
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  std::size_t hits = 0;
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return logits[b * K + i] > logits[b * K + j]; });
    hits += std::find(order.begin(), order.begin() + k, static_cast<std::size_t>(labels[b])) != order.begin() + k;
  }
  return static_cast<double>(hits) / B;
}

}  // namespace oracle

}  // namespace tsc::test
