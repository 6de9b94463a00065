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
#ifndef TSCFORMER_ABLATE_HPP_
#define TSCFORMER_ABLATE_HPP_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tscformer/config.hpp"

namespace tsc {

enum class AblationAxis { kComponents, kFusion, kInsertion, kDepth, kTokenDim, kTokenCount, kFrames, kModality };

AblationAxis parse_ablation_axis(const std::string& text);
const char* ablation_axis_name(AblationAxis axis);

// Default value grid per axis. Components rows are "01".."06":
//   01 shift+former+bridge, 02 former+bridge, 03 shift+bridge,
//   04 shift+former, 05 shift, 06 plain CNN.
std::vector<std::string> default_ablation_values(AblationAxis axis);

// Config keys an axis is allowed to touch.
std::vector<std::string> ablation_axis_keys(AblationAxis axis);

struct AblationVariant {
  std::string value;
  RunConfig config;
  std::vector<std::string> changed_keys;  // vs base
};

// One config per value; each differs from base only in the axis keys.
std::vector<AblationVariant> ablation_variants(const RunConfig& base, AblationAxis axis,
                                               const std::vector<std::string>& values);

struct AblationRow {
  AblationVariant variant;
  std::size_t parameters = 0;
  std::size_t steps = 0;
  double final_loss = 0.0;
  Metrics train;
  std::optional<Metrics> heldout;
};

struct AblationTable {
  AblationAxis axis = AblationAxis::kComponents;
  std::vector<AblationRow> rows;
};

// Trains one model per value on the same clips. progress, when set, is
// called after each row.
AblationTable ablate(const RunConfig& base, AblationAxis axis, const std::vector<std::string>& values,
                     const std::vector<ClipPair>& train_clips, const std::vector<ClipPair>& heldout_clips,
                     const std::function<void(const AblationRow&)>& progress = {});

std::string ablation_csv(const AblationTable& table);
std::string ablation_text(const AblationTable& table);

}  // namespace tsc

#endif  // TSCFORMER_ABLATE_HPP_
