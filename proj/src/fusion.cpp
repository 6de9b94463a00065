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
#include "tscformer/fusion.hpp"

#include <algorithm>

#include "tscformer/error.hpp"

namespace tsc {

FusionMode parse_fusion_mode(const std::string& text) {
  if (text == "concat") return FusionMode::kConcat;
  if (text == "add") return FusionMode::kAdd;
  throw ConfigError("unknown fusion mode '" + text + "' (expected concat or add)");
}

const char* fusion_mode_name(FusionMode mode) { return mode == FusionMode::kConcat ? "concat" : "add"; }

TokenProjection::TokenProjection(const std::string& name, std::size_t tokens, std::size_t dim, std::size_t frames,
                                 std::size_t channels, std::size_t height, std::size_t width, Rng& rng)
    : frames(frames), channels(channels), height(height), width(width) {
  const std::size_t per_frame = channels * height * width;
  if (frames == 0 || per_frame == 0) throw ConfigError(name + ": empty injection target");
  if (per_frame > kMaxInjectedElements / frames || tokens * dim > kMaxInjectedElements / per_frame) {
    throw ConfigError(name + ": injection target " + std::to_string(frames) + "x" + std::to_string(channels) + "x" +
                      std::to_string(height) + "x" + std::to_string(width) + " from " + std::to_string(tokens) +
                      "x" + std::to_string(dim) + " tokens exceeds the 2^26 element limit");
  }
  fc = Linear(name + ".fc", tokens * dim, per_frame, rng);
}

Var TokenProjection::operator()(const Var& tokens) const {
  const std::size_t in = fc.weight.value().dim(0);
  if (tokens.rank() != 3 || tokens.dim(1) * tokens.dim(2) != in) {
    throw DimensionError("token projection: expected [B, L, D] with L*D = " + std::to_string(in) + ", got " +
                         to_string(tokens.shape()));
  }
  const std::size_t B = tokens.dim(0);
  const Var map = reshape(fc(reshape(tokens, {B, in})), {B, 1, channels, height, width});
  if (frames == 1) return map;
  return concat(std::vector<Var>(frames, map), 1);
}

Fusion::Fusion(const std::string& name, std::size_t channels, std::size_t injected_channels, FusionMode mode,
               Rng& rng)
    : mode(mode) {
  if (mode == FusionMode::kAdd && injected_channels != channels) {
    throw DimensionError(name + ": add fusion needs " + std::to_string(channels) + " injected channels, got " +
                         std::to_string(injected_channels));
  }
  const std::size_t in = mode == FusionMode::kConcat ? channels + injected_channels : channels;
  conv = Conv2d(name + ".conv", in, channels, 1, 1, 0, false, rng);
}

Var Fusion::operator()(const Var& feat, const Var& injected) const {
  if (feat.rank() != 5 || injected.rank() != 5) {
    throw DimensionError("fuse: expected [B, T, C, H, W] operands, got " + to_string(feat.shape()) + " and " +
                         to_string(injected.shape()));
  }
  const std::size_t B = feat.dim(0), T = feat.dim(1), C = feat.dim(2), H = feat.dim(3), W = feat.dim(4);
  if (injected.dim(0) != B || injected.dim(1) != T || injected.dim(3) != H || injected.dim(4) != W) {
    throw DimensionError("fuse: injected " + to_string(injected.shape()) + " does not match features " +
                         to_string(feat.shape()));
  }
  Var joint;
  if (mode == FusionMode::kAdd) {
    if (injected.dim(2) != C) {
      throw DimensionError("fuse: add mode needs matching channels, got " + to_string(feat.shape()) + " and " +
                           to_string(injected.shape()));
    }
    joint = feat + injected;
  } else {
    joint = concat({feat, injected}, 2);
  }
  const std::size_t Cin = joint.dim(2);
  if (Cin != conv.weight.value().dim(1)) {
    throw DimensionError("fuse: 1x1 conv expects " + std::to_string(conv.weight.value().dim(1)) +
                         " input channels, got " + std::to_string(Cin));
  }
  return reshape(conv(reshape(joint, {B * T, Cin, H, W})), {B, T, C, H, W});
}

void Fusion::set_passthrough() {
  Tensor& w = conv.weight.mutable_value();
  const std::size_t out = w.dim(0), in = w.dim(1);
  std::fill(w.values().begin(), w.values().end(), 0.0);
  for (std::size_t c = 0; c < std::min(out, in); ++c) w[c * in + c] = 1.0;
}

FeatureInjector::FeatureInjector(const std::string& name, std::size_t tokens, std::size_t dim, std::size_t frames,
                                 std::size_t channels, std::size_t height, std::size_t width,
                                 const FusionConfig& cfg, Rng& rng) {
  const std::size_t cp = injected_channels(cfg.mode, channels, dim);
  project = TokenProjection(name + ".tokens", tokens, dim, frames, cp, height, width, rng);
  fuse = Fusion(name + ".fuse", channels, cp, cfg.mode, rng);
}

void FeatureInjector::parameters(ParameterRefs& out) {
  project.parameters(out);
  fuse.parameters(out);
}

}  // namespace tsc
