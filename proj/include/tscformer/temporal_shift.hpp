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
#ifndef TSCFORMER_TEMPORAL_SHIFT_HPP_
#define TSCFORMER_TEMPORAL_SHIFT_HPP_

#include <cstddef>

#include "tscformer/autodiff.hpp"

namespace tsc {

struct ShiftConfig {
  std::size_t divisions = 8;

  // divisions >= 2 and divisions <= channels
  void validate(std::size_t channels) const;
};

// Bidirectional zero-padded shift of x[B, T, C, H, W] along T. With
// f = C / divisions: channels [0, f) take the next frame's values, channels
// [f, 2f) take the previous frame's values, the rest pass through.
Var temporal_shift(const Var& x, const ShiftConfig& cfg);

}  // namespace tsc

#endif  // TSCFORMER_TEMPORAL_SHIFT_HPP_
