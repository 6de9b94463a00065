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
#ifndef TSCFORMER_MODEL_HPP_
#define TSCFORMER_MODEL_HPP_

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tscformer/bridgeformer.hpp"
#include "tscformer/fusion.hpp"
#include "tscformer/layers.hpp"
#include "tscformer/temporal_shift.hpp"

namespace tsc {

// Which clip feeds each of the two branches.
enum class InputPair { kRgbEvent, kRgbRgb, kEventEvent };

InputPair parse_input_pair(const std::string& text);
const char* input_pair_name(InputPair pair);

struct TscFormerConfig {
  std::size_t frames = 8;
  std::size_t height = 32;
  std::size_t width = 32;
  std::array<std::size_t, 4> channels{8, 16, 32, 64};
  std::array<std::size_t, 4> blocks{1, 1, 1, 1};
  std::size_t bottleneck_expansion = 4;  // stage width / reduced width
  std::size_t num_classes = 4;
  bool use_shift = true;
  InputPair inputs = InputPair::kRgbEvent;
  std::uint64_t init_seed = 0;
  ShiftConfig shift;
  BridgeConfig bridge;
  FusionConfig fusion;

  void validate() const;
  // Spatial extent after the stem and after each stage: {stem, s1, s2, s3, s4}.
  std::array<std::size_t, 5> spatial_heights() const;
  std::array<std::size_t, 5> spatial_widths() const;
};

// 7x7 stride-2 conv (no bias, batchnorm follows), batchnorm, relu, 3x3
// stride-2 maxpool.
class Stem {
 public:
  Stem() = default;
  Stem(const std::string& name, std::size_t out_channels, Rng& rng);

  // [N, 3, H, W] -> [N, C0, H/4, W/4]
  Var operator()(const Var& x, Mode mode);
  void parameters(ParameterRefs& out);
  void batchnorms(std::vector<BatchNorm2d*>& out) { out.push_back(&bn); }

  Conv2d conv;
  BatchNorm2d bn;
};

// 1x1 reduce to out / expansion -> 3x3 (stride) -> 1x1 expand, with
// identity or projection shortcut.
class Bottleneck {
 public:
  Bottleneck() = default;
  Bottleneck(const std::string& name, std::size_t in, std::size_t out, std::size_t stride, std::size_t expansion,
             Rng& rng);

  Var operator()(const Var& x, Mode mode);
  void parameters(ParameterRefs& out);
  void batchnorms(std::vector<BatchNorm2d*>& out);

  Conv2d conv1, conv2, conv3;
  BatchNorm2d bn1, bn2, bn3;
  bool project = false;
  Conv2d proj;
  BatchNorm2d proj_bn;
};

// Temporal shift at the stage entrance, then the stage's bottleneck units.
class ResidualStage {
 public:
  ResidualStage() = default;
  ResidualStage(const std::string& name, std::size_t in, std::size_t out, std::size_t stride, std::size_t units,
                std::size_t expansion, Rng& rng);

  // x[N = B*T, C, H, W]; shift is skipped when cfg is null.
  Var operator()(const Var& x, std::size_t frames, const ShiftConfig* shift, Mode mode);
  void parameters(ParameterRefs& out);
  void batchnorms(std::vector<BatchNorm2d*>& out);

  std::vector<Bottleneck> units;
};

class Branch {
 public:
  Branch() = default;
  Branch(const std::string& name, const TscFormerConfig& cfg, Rng& rng);

  void parameters(ParameterRefs& out);
  void batchnorms(std::vector<BatchNorm2d*>& out);

  Stem stem;
  std::array<ResidualStage, 4> stages;
};

// Features after one insertion block, for inspection.
struct BlockFeatures {
  Var rgb;     // [B, T, C, H, W]
  Var event;   // [B, T, C, H, W]
  Var tokens;  // [B, L, D]
};

class TscFormer {
 public:
  explicit TscFormer(const TscFormerConfig& cfg);
  TscFormer(const TscFormer&) = delete;
  TscFormer& operator=(const TscFormer&) = delete;

  const TscFormerConfig& config() const { return cfg_; }

  // Stable order; pointers stay valid for the model's lifetime.
  const ParameterRefs& parameters() const { return params_; }
  const std::vector<BatchNorm2d*>& batchnorms() const { return bns_; }
  const std::vector<std::string>& batchnorm_names() const { return bn_names_; }
  std::size_t parameter_count() const { return count_parameters(params_); }

  // rgb, event: [B, T, 3, H, W] -> logits [B, num_classes]. When blocks is
  // non-null, entry i - 1 receives the features after block i.
  Var forward(const Var& rgb, const Var& event, Mode mode, std::vector<BlockFeatures>* blocks = nullptr);

  Branch rgb_branch;
  Branch event_branch;
  Parameter tokens;                                // [1, L, D]
  std::map<int, BridgeFormer> bridges;             // keyed by insertion block
  std::map<int, FeatureInjector> to_rgb, to_event; // F2V, F2E
  Linear head;

 private:
  TscFormerConfig cfg_;
  ParameterRefs params_;
  std::vector<BatchNorm2d*> bns_;
  std::vector<std::string> bn_names_;
};

Var model_loss(const Var& logits, std::span<const int> labels);

// Groups are the parameter name without its leaf, truncated to two
// components: "rgb.stage1", "bridge2.layer0", "f2v3.fuse", "tokens", "head".
std::string parameter_group(const std::string& name);
std::map<std::string, std::size_t> parameter_counts_by_group(const ParameterRefs& params);

// Parameters owned by the bridges and the F2V/F2E injectors.
std::size_t bridge_parameter_count(TscFormer& model);
std::size_t fusion_parameter_count(TscFormer& model);

// Checkpoint archive: parameters by name, batchnorm running statistics as
// "<bn>.running_mean", "<bn>.running_var" and "<bn>.initialized", plus the
// config text.
void save_checkpoint(const std::filesystem::path& path, const TscFormer& model, const std::string& config_text);
// Every parameter and running statistic must be present with the config's
// shape.
void load_checkpoint(const std::filesystem::path& path, TscFormer& model);
std::string read_checkpoint_config(const std::filesystem::path& path);

}  // namespace tsc

#endif  // TSCFORMER_MODEL_HPP_
