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
#ifndef TSCFORMER_GRAD_CHECK_HPP_
#define TSCFORMER_GRAD_CHECK_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tscformer/autodiff.hpp"

namespace tsc {

// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double analytic, double numeric);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  // Set when a perturbed evaluation was not finite; names the coordinate.
  std::optional<std::string> failure;

  bool passed(double tolerance) const { return !failure && max_rel_error < tolerance; }
};

// Compares the taped gradient of scalar f at x against central differences,
// coordinate by coordinate.
GradCheckResult grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double eps = 1e-5);

struct NamedLeaf {
  std::string name;
  Var leaf;
};

struct LeafCheck {
  std::string name;
  GradCheckResult result;
};

// Checks d(loss)/d(leaf) for several leaves that `loss` closes over. Leaves
// are perturbed in place and restored. At most `max_coords` coordinates per
// leaf are checked (a seeded sample when the leaf is larger).
std::vector<LeafCheck> grad_check_leaves(const std::function<Var()>& loss, const std::vector<NamedLeaf>& leaves,
                                         double eps = 1e-5, std::size_t max_coords = 64, std::uint64_t seed = 0);

}  // namespace tsc

#endif  // TSCFORMER_GRAD_CHECK_HPP_
