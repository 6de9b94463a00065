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
#include "tscformer/model_check.hpp"

#include <algorithm>
#include <random>

#include "tscformer/error.hpp"
#include "tscformer/grad_check.hpp"

namespace tsc {

TscFormerConfig tiny_config() {
  TscFormerConfig cfg;
  cfg.frames = 2;
  cfg.height = 8;
  cfg.width = 8;
  cfg.channels = {4, 4, 8, 8};
  // A one-channel reduced width makes bn1's gamma scale-invariant through
  // bn2, leaving only an eps-sized gradient.
  cfg.bottleneck_expansion = 2;
  cfg.num_classes = 3;
  cfg.shift.divisions = 4;
  cfg.bridge.tokens = 2;
  cfg.bridge.token_dim = 8;
  cfg.bridge.heads = 2;
  return cfg;
}

std::vector<GroupCheck> check_model_gradients(const TscFormerConfig& cfg, const ModelCheckOptions& options) {
  TscFormer model(cfg);
  if (model.parameter_count() > kMaxGradcheckParameters) {
    throw ValidationError("gradcheck: model has " + std::to_string(model.parameter_count()) +
                          " parameters, limit is " + std::to_string(kMaxGradcheckParameters));
  }
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Shape clip{options.batch, cfg.frames, 3, cfg.height, cfg.width};
  Tensor rgb(clip), event(clip), probe({options.batch, cfg.num_classes});
  for (auto& v : rgb.values()) v = unit(rng);
  for (auto& v : event.values()) v = unit(rng);
  for (auto& v : probe.values()) v = normal(rng);

  const Var rgb_leaf(rgb, true);
  const Var event_leaf(event, true);
  const Var weights = constant(probe);
  // Eval mode needs running statistics; one train pass supplies them.
  if (options.mode == Mode::kEval) model.forward(constant(rgb), constant(event), Mode::kTrain);
  auto loss = [&] { return sum(model.forward(rgb_leaf, event_leaf, options.mode) * weights); };

  std::vector<NamedLeaf> leaves{{"input.rgb", rgb_leaf}, {"input.event", event_leaf}};
  for (const Parameter* p : model.parameters()) leaves.push_back({p->name, p->var});
  const auto checks = grad_check_leaves(loss, leaves, options.eps, options.max_coords, options.seed);

  std::vector<GroupCheck> groups;
  for (const auto& c : checks) {
    const std::string g = parameter_group(c.name);
    auto it = std::find_if(groups.begin(), groups.end(), [&](const GroupCheck& x) { return x.group == g; });
    if (it == groups.end()) {
      GroupCheck gc;
      gc.group = g;
      groups.push_back(gc);
      it = groups.end() - 1;
    }
    ++it->leaves;
    it->checked += c.result.checked;
    if (c.result.failure && !it->failure) it->failure = c.name + ": " + *c.result.failure;
    if (c.result.max_rel_error >= it->max_rel_error) {
      it->max_rel_error = c.result.max_rel_error;
      it->worst_leaf = c.name;
    }
  }
  return groups;
}

}  // namespace tsc
