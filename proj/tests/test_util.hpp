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
#ifndef TSCFORMER_TESTS_TEST_UTIL_HPP_
#define TSCFORMER_TESTS_TEST_UTIL_HPP_

#include <random>
#include <vector>

#include "tscformer/tensor.hpp"

namespace tsc::test {

Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0);
std::size_t random_extent(std::mt19937_64& rng, std::size_t lo, std::size_t hi);

// Brute-force reference implementations. These never call into the library
// kernels they are used to check.
namespace oracle {

Tensor matmul(const Tensor& a, const Tensor& b);  // rank-2 only
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad);
Tensor maxpool2d(const Tensor& x, std::size_t k, std::size_t stride, std::size_t pad);
Tensor global_avgpool(const Tensor& x);
Tensor softmax_rows(const Tensor& x);  // over the last axis
Tensor batchnorm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);
// Single-head softmax(q k^T * scale) v for q[B,L,D], k[B,N,D], v[B,N,D].
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale);
long double log_sum_exp(const double* row, std::size_t n);
// Bidirectional zero-padded shift of [B, T, C, H, W] by index arithmetic.
Tensor temporal_shift(const Tensor& x, std::size_t divisions);
// Fraction of rows whose label is among the first k of a stable descending
// sort (earlier index wins ties).
double topk_accuracy(const Tensor& logits, const std::vector<int>& labels, std::size_t k);

}  // namespace oracle

}  // namespace tsc::test

#endif  // TSCFORMER_TESTS_TEST_UTIL_HPP_
