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
#ifndef TSCFORMER_DATA_HPP_
#define TSCFORMER_DATA_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "tscformer/events.hpp"
#include "tscformer/ops.hpp"
#include "tscformer/tensor.hpp"

namespace tsc {

// One aligned RGB/event sample. Both clips are [T, 3, H, W] in [0, 1].
struct ClipPair {
  Tensor rgb;
  Tensor event;
  int label = 0;
  std::vector<std::uint64_t> frame_times;

  void validate() const;
  std::size_t frames() const { return rgb.dim(0); }
};

inline constexpr std::array<double, 4> kCropScales{1.0, 0.875, 0.75, 0.66};

// Geometric decision shared by every frame of both modalities of a clip.
struct AugmentDecision {
  std::size_t scale_index = 0;  // into kCropScales
  std::size_t position = 4;     // 0..3 corners (TL, TR, BL, BR), 4 centre
  bool flip = false;
};

AugmentDecision sample_augment(std::mt19937_64& rng);

// Crops the chosen square window, resizes it bilinearly to target x target
// and optionally mirrors horizontally.
ClipPair apply_augment(const ClipPair& pair, const AugmentDecision& decision, std::size_t target);

// Train mode: random multi-scale crop + resize + flip with probability 0.5.
// Eval mode: centre crop at scale 1 + resize.
ClipPair augment(const ClipPair& pair, std::mt19937_64& rng, Mode mode, std::size_t target = 224);

// Half-pixel bilinear resize of every plane of x[..., H, W].
Tensor resize_bilinear(const Tensor& x, std::size_t out_h, std::size_t out_w);

struct SynthSpec {
  std::uint64_t seed = 0;
  int num_classes = 4;
  int samples_per_class = 8;
  std::size_t frames = 8;
  std::size_t height = 48;
  std::size_t width = 48;
};

// Class k draws a moving shape: direction k % 2 (down, up), shape (k / 2) % 3
// (square, disc, cross), speed 1 + k / 6. Events are emitted where the
// rendered brightness changes between consecutive frames and then binned
// and rendered, so both modalities carry the class. Labels cycle through
// the classes. Deterministic in the seed.
std::vector<ClipPair> synth_dataset(const SynthSpec& spec);

// The raw event stream synthesised for one clip, before binning.
EventStream synth_events(const SynthSpec& spec, std::size_t clip_index);

// Mixes a dataset seed with a clip index (and epoch) into an rng seed.
std::uint64_t clip_seed(std::uint64_t seed, std::uint64_t clip_index, std::uint64_t epoch = 0);

void save_dataset(const std::filesystem::path& path, const std::vector<ClipPair>& clips, const std::string& note = {});
std::vector<ClipPair> load_dataset(const std::filesystem::path& path);

}  // namespace tsc

#endif  // TSCFORMER_DATA_HPP_
