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
#ifndef TSCFORMER_OPS_HPP_
#define TSCFORMER_OPS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "tscformer/autodiff.hpp"
#include "tscformer/tensor.hpp"

// Differentiable operations. Each records its backward rule on the current
// GradTape when one is active and an input requires a gradient.
namespace tsc {

enum class Mode { kTrain, kEval };

inline Var constant(Tensor t) { return Var(std::move(t), false); }

// Element-wise, operands must have identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var relu(const Var& x);
Var gelu(const Var& x);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(const Var& a, double s) { return scale(a, s); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

Var sum(const Var& x);
Var mean(const Var& x);
// Mean over one axis; the axis is removed (a rank-1 input yields shape {1}).
Var mean_axis(const Var& x, std::size_t axis);

Var reshape(const Var& x, Shape shape);
Var permute(const Var& x, const std::vector<std::size_t>& perm);

// a[..., m, k] x b[..., k, n] -> [..., m, n]; leading extents broadcast.
Var matmul(const Var& a, const Var& b);

// x[..., in] * w[in, out] + b[out]
Var linear(const Var& x, const Var& w, const Var& b);

// x[B, C, H, W], w[O, C, kh, kw], b[O] (b may be undefined for no bias).
Var conv2d(const Var& x, const Var& w, const Var& b, std::size_t stride, std::size_t pad);

// Zero-padded max pooling; ties resolve to the first element in row-major
// window order.
Var maxpool2d(const Var& x, std::size_t k, std::size_t stride, std::size_t pad = 0);

// [B, C, H, W] -> [B, C]
Var global_avgpool(const Var& x);

Var softmax(const Var& x, std::size_t axis);

// Normalization over the trailing axis with learnable affine.
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  bool initialized = false;
  double momentum = 0.9;
  double eps = 1e-5;
};

// Per-channel normalization of x[N, C, H, W]. Train mode uses batch
// statistics over N, H, W and updates the running estimates as
// running = momentum * running + (1 - momentum) * batch.
Var batchnorm2d(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, Mode mode);

Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t length);

// Mean categorical cross-entropy of softmax(logits[B, K]) against labels.
Var cross_entropy(const Var& logits, std::span<const int> labels);

}  // namespace tsc

#endif  // TSCFORMER_OPS_HPP_
