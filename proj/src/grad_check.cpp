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
#include "tscformer/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tsc {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

void check_coordinate(Node& node, std::size_t i, double analytic, double eps, const std::function<double()>& eval,
                      const std::string& label, GradCheckResult& result) {
  const double saved = node.value[i];
  node.value[i] = saved + eps;
  const double fp = eval();
  node.value[i] = saved - eps;
  const double fm = eval();
  node.value[i] = saved;
  ++result.checked;
  if (!std::isfinite(fp) || !std::isfinite(fm)) {
    if (!result.failure) result.failure = "non-finite output when perturbing " + label + "[" + std::to_string(i) + "]";
    return;
  }
  const double numeric = (fp - fm) / (2.0 * eps);
  const double err = relative_error(analytic, numeric);
  if (!(err <= result.max_rel_error)) {
    result.max_rel_error = std::isnan(err) ? INFINITY : err;
    result.worst_index = i;
  }
}

}  // namespace

GradCheckResult grad_check(const std::function<Var(const Var&)>& f, const Tensor& x, double eps) {
  Var leaf(x, true);
  Tensor analytic;
  {
    GradTape tape;
    Var out;
    {
      GradTape::Scope scope(tape);
      out = f(leaf);
    }
    tape.backward(out);
    analytic = leaf.grad().empty() ? Tensor::zeros(x.shape()) : leaf.grad();
  }
  GradCheckResult result;
  auto eval = [&] { return f(leaf).value().item(); };
  for (std::size_t i = 0; i < x.size(); ++i) check_coordinate(leaf.node(), i, analytic[i], eps, eval, "x", result);
  return result;
}

std::vector<LeafCheck> grad_check_leaves(const std::function<Var()>& loss, const std::vector<NamedLeaf>& leaves,
                                         double eps, std::size_t max_coords, std::uint64_t seed) {
  for (const auto& l : leaves) l.leaf.node().grad = Tensor::zeros(l.leaf.shape());
  {
    GradTape tape;
    Var out;
    {
      GradTape::Scope scope(tape);
      out = loss();
    }
    tape.backward(out);
  }
  std::vector<Tensor> analytic;
  for (const auto& l : leaves) analytic.push_back(l.leaf.grad());

  std::mt19937_64 rng(seed);
  auto eval = [&] { return loss().value().item(); };
  std::vector<LeafCheck> report;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    Node& node = leaves[k].leaf.node();
    std::vector<std::size_t> coords(node.value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords);
      std::sort(coords.begin(), coords.end());
    }
    LeafCheck check{leaves[k].name, {}};
    for (auto i : coords) check_coordinate(node, i, analytic[k][i], eps, eval, leaves[k].name, check.result);
    report.push_back(std::move(check));
  }
  return report;
}

}  // namespace tsc
