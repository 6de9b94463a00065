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

#include <gtest/gtest.h>

#include <random>

#include "test_util.hpp"
#include "tscformer/error.hpp"
#include "tscformer/grad_check.hpp"
#include "tscformer/ops.hpp"
#include "tscformer/temporal_shift.hpp"

namespace tsc {
namespace {

Tensor shift(const Tensor& x, std::size_t divisions) { return temporal_shift(constant(x), ShiftConfig{divisions}).value(); }

TEST(TemporalShiftTest, DefinitionExample) {
  // T=3, C=2, divisions=2, 1x1 spatial; x[:, t, 0] = a_t, x[:, t, 1] = b_t.
  const Tensor x({1, 3, 2, 1, 1}, {1, 10, 2, 20, 3, 30});
  const Tensor out = shift(x, 2);
  EXPECT_EQ(out, Tensor({1, 3, 2, 1, 1}, {2, 0, 3, 10, 0, 20}));
}

TEST(TemporalShiftTest, SingleFrameZeroesShiftedFolds) {
  std::mt19937_64 rng(1);
  const Tensor x = test::random_tensor({2, 1, 8, 2, 2}, rng);
  const Tensor out = shift(x, 4);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t c = 0; c < 8; ++c)
      for (std::size_t s = 0; s < 4; ++s) {
        const std::size_t i = (b * 8 + c) * 4 + s;
        EXPECT_EQ(out[i], c < 4 ? 0.0 : x[i]);
      }
}

TEST(TemporalShiftTest, MatchesLoopOracle) {
  std::mt19937_64 rng(2);
  const Tensor x = test::random_tensor({2, 4, 8, 3, 3}, rng);
  EXPECT_EQ(shift(x, 8), test::oracle::temporal_shift(x, 8));
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t C = test::random_extent(rng, 2, 7);
    const std::size_t d = test::random_extent(rng, 2, C);
    const Tensor y = test::random_tensor(
        {test::random_extent(rng, 1, 3), test::random_extent(rng, 1, 5), C, test::random_extent(rng, 1, 3), 2}, rng);
    EXPECT_EQ(shift(y, d), test::oracle::temporal_shift(y, d));
  }
}

TEST(TemporalShiftTest, StaticFoldUntouchedAndLeakageRule) {
  std::mt19937_64 rng(3);
  const std::size_t B = 2, T = 5, C = 11, S = 6, d = 4, f = C / d;
  const Tensor x = test::random_tensor({B, T, C, 2, 3}, rng);
  const Tensor out = shift(x, d);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t c = 2 * f; c < C; ++c)
        for (std::size_t s = 0; s < S; ++s) {
          const std::size_t i = ((b * T + t) * C + c) * S + s;
          EXPECT_EQ(out[i], x[i]);
        }
  auto fold_sum = [&](const Tensor& v, std::size_t c0, std::size_t c1, std::size_t t0, std::size_t t1) {
    long double acc = 0;
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = t0; t < t1; ++t)
        for (std::size_t c = c0; c < c1; ++c)
          for (std::size_t s = 0; s < S; ++s) acc += v[((b * T + t) * C + c) * S + s];
    return static_cast<double>(acc);
  };
  EXPECT_NEAR(fold_sum(out, 0, f, 0, T), fold_sum(x, 0, f, 1, T), 1e-12);
  EXPECT_NEAR(fold_sum(out, f, 2 * f, 0, T), fold_sum(x, f, 2 * f, 0, T - 1), 1e-12);
}

TEST(TemporalShiftTest, ConstantClipChangesOnlyBoundaryFrames) {
  const std::size_t T = 4, C = 8;
  Tensor x({1, T, C, 1, 2});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t s = 0; s < 2; ++s) x.at({0, t, c, 0, s}) = 1.0 + c;
  const Tensor out = shift(x, 4);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t c = 0; c < C; ++c) {
      const bool boundary = (c < 2 && t == T - 1) || (c >= 2 && c < 4 && t == 0);
      EXPECT_EQ(out.at({0, t, c, 0, 0}), boundary ? 0.0 : x.at({0, t, c, 0, 0}));
    }
}

TEST(TemporalShiftTest, GradientIsTransposeShift) {
  std::mt19937_64 rng(4);
  const Tensor w = test::random_tensor({2, 3, 5, 2, 2}, rng);
  auto f = [&](const Var& x) { return sum(temporal_shift(x, ShiftConfig{2}) * constant(w)); };
  // f is linear in x, so a wide step carries no truncation error.
  const auto r = grad_check(f, test::random_tensor({2, 3, 5, 2, 2}, rng), 1e-2);
  EXPECT_LT(r.max_rel_error, 1e-10);
}

TEST(TemporalShiftTest, RejectsBadConfig) {
  EXPECT_THROW(shift(Tensor({1, 2, 3, 1, 1}), 4), ValidationError);
  EXPECT_THROW(shift(Tensor({1, 2, 3, 1, 1}), 1), ValidationError);
  EXPECT_THROW(temporal_shift(constant(Tensor({2, 3, 1, 1})), ShiftConfig{2}), DimensionError);
}

}  // namespace
}  // namespace tsc
