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

#include <filesystem>
#include <random>
#include <set>
#include <vector>

#include "test_util.hpp"
#include "tscformer/data.hpp"
#include "tscformer/error.hpp"

namespace tsc {
namespace {

ClipPair random_clip(std::mt19937_64& rng, std::size_t T, std::size_t H, std::size_t W) {
  ClipPair c;
  c.rgb = test::random_tensor({T, 3, H, W}, rng, 0.0, 1.0);
  c.event = test::random_tensor({T, 3, H, W}, rng, 0.0, 1.0);
  for (std::size_t t = 0; t < T; ++t) c.frame_times.push_back(100 * (t + 1));
  c.label = 2;
  return c;
}

std::size_t argmax(const Tensor& t, std::size_t offset, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (t[offset + i] > t[offset + best]) best = i;
  }
  return best;
}

TEST(AugmentTest, EvalOnMatchingSizeIsIdentity) {
  std::mt19937_64 rng(1);
  const auto clip = random_clip(rng, 2, 24, 24);
  const auto out = augment(clip, rng, Mode::kEval, 24);
  EXPECT_EQ(out.rgb, clip.rgb);
  EXPECT_EQ(out.event, clip.event);
  EXPECT_EQ(out.frame_times, clip.frame_times);
  EXPECT_EQ(out.label, clip.label);
}

TEST(AugmentTest, DoubleFlipIsIdentity) {
  std::mt19937_64 rng(2);
  const auto clip = random_clip(rng, 2, 16, 16);
  const AugmentDecision flip{0, 4, true};
  const auto twice = apply_augment(apply_augment(clip, flip, 16), flip, 16);
  EXPECT_EQ(twice.rgb, clip.rgb);
  EXPECT_EQ(twice.event, clip.event);
}

TEST(AugmentTest, SameSeedSameOutput) {
  std::mt19937_64 data_rng(3);
  const auto clip = random_clip(data_rng, 3, 32, 40);
  std::mt19937_64 a(99), b(99);
  for (int i = 0; i < 10; ++i) {
    const auto x = augment(clip, a, Mode::kTrain, 20);
    const auto y = augment(clip, b, Mode::kTrain, 20);
    EXPECT_EQ(x.rgb, y.rgb);
    EXPECT_EQ(x.event, y.event);
    EXPECT_EQ(x.rgb.shape(), (Shape{3, 3, 20, 20}));
  }
}

TEST(AugmentTest, SamplesEveryScalePositionAndFlip) {
  std::mt19937_64 rng(4);
  std::set<std::size_t> scales, positions;
  int flips = 0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const auto d = sample_augment(rng);
    scales.insert(d.scale_index);
    positions.insert(d.position);
    flips += d.flip;
  }
  EXPECT_EQ(scales.size(), 4u);
  EXPECT_EQ(positions.size(), 5u);
  EXPECT_NEAR(static_cast<double>(flips) / n, 0.5, 0.05);
}

TEST(AugmentTest, MarkerStaysCoLocatedAcrossModalities) {
  std::mt19937_64 rng(5);
  const std::size_t T = 3, H = 30, W = 30;
  for (int trial = 0; trial < 40; ++trial) {
    ClipPair clip;
    clip.rgb = Tensor({T, 3, H, W});
    clip.event = Tensor({T, 3, H, W});
    for (std::size_t t = 0; t < T; ++t) clip.frame_times.push_back(t);
    std::uniform_int_distribution<std::size_t> u(11, 18);
    const std::size_t mi = u(rng), mj = u(rng);
    for (std::size_t t = 0; t < T; ++t) {
      clip.rgb.at({t, 0, mi, mj}) = 1.0;
      clip.event.at({t, 2, mi, mj}) = 1.0;
    }
    const auto out = augment(clip, rng, Mode::kTrain, 16);
    const std::size_t plane = 16 * 16;
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t a = argmax(out.rgb, (t * 3 + 0) * plane, plane);
      const std::size_t b = argmax(out.event, (t * 3 + 2) * plane, plane);
      EXPECT_EQ(a, b);
      EXPECT_EQ(a, argmax(out.rgb, 0, plane));
    }
  }
}

TEST(AugmentTest, CornerCropWithoutResize) {
  ClipPair clip;
  clip.rgb = Tensor({1, 3, 8, 8});
  clip.event = Tensor({1, 3, 8, 8});
  clip.frame_times = {0};
  for (std::size_t i = 0; i < clip.rgb.size(); ++i) clip.rgb[i] = static_cast<double>(i);
  // scale 0.875 of 8 is 7; bottom-right corner
  const auto out = apply_augment(clip, AugmentDecision{1, 3, false}, 7);
  EXPECT_EQ(out.rgb.shape(), (Shape{1, 3, 7, 7}));
  EXPECT_EQ(out.rgb.at({0, 0, 0, 0}), clip.rgb.at({0, 0, 1, 1}));
  EXPECT_EQ(out.rgb.at({0, 2, 6, 6}), clip.rgb.at({0, 2, 7, 7}));
}

TEST(AugmentTest, RejectsOversizedTarget) {
  std::mt19937_64 rng(6);
  const auto clip = random_clip(rng, 1, 16, 16);
  EXPECT_THROW(augment(clip, rng, Mode::kTrain, 16), ValidationError);
  EXPECT_THROW(augment(clip, rng, Mode::kEval, 17), ValidationError);
  EXPECT_THROW(augment(random_clip(rng, 1, 6, 6), rng, Mode::kEval, 4), ValidationError);
}

TEST(ResizeTest, IdentityAndConstant) {
  std::mt19937_64 rng(7);
  const Tensor x = test::random_tensor({2, 5, 7}, rng);
  EXPECT_EQ(resize_bilinear(x, 5, 7), x);
  const Tensor c({1, 4, 4}, 0.25);
  EXPECT_LT(max_abs_diff(resize_bilinear(c, 9, 3), Tensor({1, 9, 3}, 0.25)), 1e-15);
}

TEST(SynthTest, DeterministicAndBalanced) {
  SynthSpec spec;
  spec.seed = 11;
  spec.num_classes = 4;
  spec.samples_per_class = 3;
  spec.frames = 4;
  spec.height = 16;
  spec.width = 16;
  const auto a = synth_dataset(spec);
  const auto b = synth_dataset(spec);
  ASSERT_EQ(a.size(), 12u);
  std::vector<int> counts(4, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].rgb, b[i].rgb);
    EXPECT_EQ(a[i].event, b[i].event);
    EXPECT_EQ(a[i].label, b[i].label);
    a[i].validate();
    ++counts[a[i].label];
    for (double v : a[i].rgb.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  for (int c : counts) EXPECT_EQ(c, 3);
  spec.seed = 12;
  EXPECT_NE(synth_dataset(spec)[0].rgb, a[0].rgb);
}

TEST(SynthTest, EventsCarryClassSignal) {
  SynthSpec spec;
  spec.seed = 21;
  spec.num_classes = 4;
  spec.samples_per_class = 10;
  spec.frames = 4;
  spec.height = 16;
  spec.width = 16;
  const auto clips = synth_dataset(spec);
  // Nearest centroid on per-row mean event activity, half train, half test.
  const std::size_t H = 16, W = 16, T = 4;
  auto feature = [&](const ClipPair& c) {
    std::vector<double> f(2 * H, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t ch = 0; ch < 2; ++ch) {
        for (std::size_t i = 0; i < H; ++i) {
          for (std::size_t j = 0; j < W; ++j) f[ch * H + i] += c.event.at({t, ch == 0 ? 0u : 2u, i, j}) * (t + 1.0);
        }
      }
    }
    return f;
  };
  std::vector<std::vector<double>> centroid(4, std::vector<double>(2 * H, 0.0));
  std::vector<int> n(4, 0);
  for (std::size_t i = 0; i < clips.size() / 2; ++i) {
    const auto f = feature(clips[i]);
    for (std::size_t k = 0; k < f.size(); ++k) centroid[clips[i].label][k] += f[k];
    ++n[clips[i].label];
  }
  for (int c = 0; c < 4; ++c) {
    for (auto& v : centroid[c]) v /= n[c];
  }
  int correct = 0, total = 0;
  for (std::size_t i = clips.size() / 2; i < clips.size(); ++i) {
    const auto f = feature(clips[i]);
    int best = 0;
    double best_d = 1e300;
    for (int c = 0; c < 4; ++c) {
      double d = 0;
      for (std::size_t k = 0; k < f.size(); ++k) d += (f[k] - centroid[c][k]) * (f[k] - centroid[c][k]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    correct += best == clips[i].label;
    ++total;
  }
  EXPECT_GT(static_cast<double>(correct) / total, 0.25);
}

TEST(SynthTest, RejectsDegenerateSpecs) {
  SynthSpec spec;
  spec.num_classes = 1;
  EXPECT_THROW(synth_dataset(spec), ValidationError);
}

TEST(ClipSeedTest, DistinctAcrossClipsAndEpochs) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 50; ++i) {
    for (std::uint64_t e = 0; e < 5; ++e) seen.insert(clip_seed(7, i, e));
  }
  EXPECT_EQ(seen.size(), 250u);
  EXPECT_EQ(clip_seed(7, 3, 1), clip_seed(7, 3, 1));
}

TEST(DatasetFileTest, RoundTrip) {
  SynthSpec spec;
  spec.num_classes = 2;
  spec.samples_per_class = 2;
  spec.frames = 3;
  spec.height = 8;
  spec.width = 8;
  const auto clips = synth_dataset(spec);
  const auto path = std::filesystem::temp_directory_path() / "tsc_data_test.tsca";
  save_dataset(path, clips, "note");
  const auto back = load_dataset(path);
  ASSERT_EQ(back.size(), clips.size());
  for (std::size_t i = 0; i < clips.size(); ++i) {
    EXPECT_EQ(back[i].rgb, clips[i].rgb);
    EXPECT_EQ(back[i].event, clips[i].event);
    EXPECT_EQ(back[i].label, clips[i].label);
    EXPECT_EQ(back[i].frame_times, clips[i].frame_times);
  }
  std::filesystem::remove(path);
}

TEST(ClipPairTest, ValidateRejectsMismatch) {
  std::mt19937_64 rng(8);
  auto c = random_clip(rng, 2, 8, 8);
  c.frame_times = {5, 5};
  EXPECT_THROW(c.validate(), ValidationError);
  c = random_clip(rng, 2, 8, 8);
  c.event = Tensor({2, 3, 8, 9});
  EXPECT_THROW(c.validate(), DimensionError);
}

}  // namespace
}  // namespace tsc
