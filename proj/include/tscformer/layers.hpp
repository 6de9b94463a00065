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
#ifndef TSCFORMER_LAYERS_HPP_
#define TSCFORMER_LAYERS_HPP_

#include <random>
#include <string>
#include <vector>

#include "tscformer/autodiff.hpp"
#include "tscformer/ops.hpp"

namespace tsc {

using ParameterRefs = std::vector<Parameter*>;
using Rng = std::mt19937_64;

// Uniform(-1/sqrt(in), 1/sqrt(in)) weight and optional bias.
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng, bool bias = true);

  Var operator()(const Var& x) const { return linear(x, weight.var, has_bias ? bias.var : Var()); }
  void parameters(ParameterRefs& out);

  Parameter weight;  // [in, out]
  Parameter bias;    // [out]
  bool has_bias = true;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, std::size_t dim);

  Var operator()(const Var& x) const { return layer_norm(x, gamma.var, beta.var); }
  void parameters(ParameterRefs& out) { out.insert(out.end(), {&gamma, &beta}); }

  Parameter gamma;
  Parameter beta;
};

// Kaiming-normal (fan-in, ReLU gain) weights; optional zero bias.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride,
         std::size_t pad, bool bias, Rng& rng);

  Var operator()(const Var& x) const { return conv2d(x, weight.var, has_bias ? bias.var : Var(), stride, pad); }
  void parameters(ParameterRefs& out);

  Parameter weight;  // [out, in, k, k]
  Parameter bias;    // [out]
  bool has_bias = false;
  std::size_t stride = 1;
  std::size_t pad = 0;
};

class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, std::size_t channels);

  Var operator()(const Var& x, Mode mode) { return batchnorm2d(x, gamma.var, beta.var, state, mode); }
  void parameters(ParameterRefs& out) { out.insert(out.end(), {&gamma, &beta}); }

  std::string name;
  Parameter gamma;
  Parameter beta;
  BatchNormState state;
};

std::size_t count_parameters(const ParameterRefs& params);

}  // namespace tsc

#endif  // TSCFORMER_LAYERS_HPP_
