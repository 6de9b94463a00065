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
#include "tscformer/layers.hpp"

#include <cmath>

namespace tsc {

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool bias_)
    : has_bias(bias_) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor w({in, out});
  for (auto& v : w.values()) v = dist(rng);
  weight = Parameter(name + ".weight", std::move(w));
  if (has_bias) {
    Tensor b({out});
    for (auto& v : b.values()) v = dist(rng);
    bias = Parameter(name + ".bias", std::move(b));
  }
}

void Linear::parameters(ParameterRefs& out) {
  out.push_back(&weight);
  if (has_bias) out.push_back(&bias);
}

LayerNorm::LayerNorm(const std::string& name, std::size_t dim)
    : gamma(name + ".gamma", Tensor::ones({dim})), beta(name + ".beta", Tensor::zeros({dim})) {}

Conv2d::Conv2d(const std::string& name, std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride_,
               std::size_t pad_, bool bias_, Rng& rng)
    : has_bias(bias_), stride(stride_), pad(pad_) {
  const double std_dev = std::sqrt(2.0 / static_cast<double>(in * kernel * kernel));
  std::normal_distribution<double> dist(0.0, std_dev);
  Tensor w({out, in, kernel, kernel});
  for (auto& v : w.values()) v = dist(rng);
  weight = Parameter(name + ".weight", std::move(w));
  if (has_bias) bias = Parameter(name + ".bias", Tensor::zeros({out}));
}

void Conv2d::parameters(ParameterRefs& out) {
  out.push_back(&weight);
  if (has_bias) out.push_back(&bias);
}

BatchNorm2d::BatchNorm2d(const std::string& n, std::size_t channels)
    : name(n), gamma(n + ".gamma", Tensor::ones({channels})), beta(n + ".beta", Tensor::zeros({channels})) {
  state.running_mean = Tensor::zeros({channels});
  state.running_var = Tensor::ones({channels});
}

std::size_t count_parameters(const ParameterRefs& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->value().size();
  return n;
}

}  // namespace tsc
