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
#ifndef TSCFORMER_FUSION_HPP_
#define TSCFORMER_FUSION_HPP_

#include <string>

#include "tscformer/layers.hpp"

namespace tsc {

enum class FusionMode { kConcat, kAdd };

FusionMode parse_fusion_mode(const std::string& text);
const char* fusion_mode_name(FusionMode mode);

struct FusionConfig {
  FusionMode mode = FusionMode::kConcat;
};

// Largest T*C'*H*W a token projection may produce.
inline constexpr std::size_t kMaxInjectedElements = std::size_t{1} << 26;

// Fully connected layer over the flattened tokens [B, L*D] -> [B, C'*H*W],
// reshaped to one C' x H x W map and tiled over T frames.
class TokenProjection {
 public:
  TokenProjection() = default;
  TokenProjection(const std::string& name, std::size_t tokens, std::size_t dim, std::size_t frames,
                  std::size_t channels, std::size_t height, std::size_t width, Rng& rng);

  // Z[B, L, D] -> [B, T, C', H, W]
  Var operator()(const Var& tokens) const;
  void parameters(ParameterRefs& out) { fc.parameters(out); }

  Linear fc;
  std::size_t frames = 1, channels = 1, height = 1, width = 1;
};

// Bias-free 1x1 restoration of the injected features to C channels. Concat
// mode sees C + C' input channels, add mode requires C' == C and sees C. A
// bias would be absorbed by the next stage's batchnorm or the head bias.
class Fusion {
 public:
  Fusion() = default;
  Fusion(const std::string& name, std::size_t channels, std::size_t injected_channels, FusionMode mode, Rng& rng);

  // feat[B, T, C, H, W], injected[B, T, C', H, W] -> [B, T, C, H, W]
  Var operator()(const Var& feat, const Var& injected) const;
  void parameters(ParameterRefs& out) { conv.parameters(out); }

  // Weight routes input channel c to output c, zero elsewhere.
  void set_passthrough();

  FusionMode mode = FusionMode::kConcat;
  Conv2d conv;
};

// Injected channel count C' for a block with C feature channels.
inline std::size_t injected_channels(FusionMode mode, std::size_t channels, std::size_t token_dim) {
  return mode == FusionMode::kConcat ? token_dim : channels;
}

// F2V or F2E: token projection followed by fusion into one modality.
class FeatureInjector {
 public:
  FeatureInjector() = default;
  FeatureInjector(const std::string& name, std::size_t tokens, std::size_t dim, std::size_t frames,
                  std::size_t channels, std::size_t height, std::size_t width, const FusionConfig& cfg, Rng& rng);

  Var operator()(const Var& feat, const Var& tokens) const { return fuse(feat, project(tokens)); }
  void parameters(ParameterRefs& out);

  TokenProjection project;
  Fusion fuse;
};

}  // namespace tsc

#endif  // TSCFORMER_FUSION_HPP_
