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
#ifndef TSCFORMER_MODEL_CHECK_HPP_
#define TSCFORMER_MODEL_CHECK_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tscformer/model.hpp"

namespace tsc {

// T=2, H=W=8, channels [4,4,8,8] with bottleneck expansion 2, L=2, D=8,
// 2 heads, shift divisions 4, 3 classes.
TscFormerConfig tiny_config();

inline constexpr std::size_t kMaxGradcheckParameters = 50000;

struct GroupCheck {
  std::string group;
  std::size_t leaves = 0;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::string worst_leaf;
  std::optional<std::string> failure;

  bool passed(double tolerance) const { return !failure && max_rel_error < tolerance; }
};

struct ModelCheckOptions {
  std::size_t batch = 2;
  double eps = 1e-5;
  std::size_t max_coords = 64;  // per leaf
  std::uint64_t seed = 0;
  Mode mode = Mode::kTrain;  // eval checks against running statistics
};

// Central-difference check of a random projection of the train-mode logits
// with respect to both input clips ("input" group) and every parameter,
// reported per parameter group in first-seen order. Refuses models above
// kMaxGradcheckParameters.
std::vector<GroupCheck> check_model_gradients(const TscFormerConfig& cfg, const ModelCheckOptions& options = {});

}  // namespace tsc

#endif  // TSCFORMER_MODEL_CHECK_HPP_
