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
#ifndef TSCFORMER_AUTODIFF_HPP_
#define TSCFORMER_AUTODIFF_HPP_

#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "tscformer/tensor.hpp"

namespace tsc {

struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  bool requires_grad = false;

  void accumulate(const Tensor& g);
  void accumulate(Tensor&& g);
};

// Handle to a value in the computation graph. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t dim(std::size_t axis) const { return node_->value.dim(axis); }
  std::size_t rank() const { return node_->value.rank(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const { return static_cast<bool>(node_); }

  Node& node() const { return *node_; }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Ordered record of executed differentiable operations. Operations record
// themselves on the tape made current by a GradTape::Scope; with no current
// tape, operations only compute values.
class GradTape {
 public:
  using BackwardFn = std::function<void(const Tensor& grad_out, const Tensor& value_out)>;

  struct Entry {
    std::shared_ptr<Node> output;
    std::vector<std::shared_ptr<Node>> inputs;
    BackwardFn backward;
  };

  class Scope {
   public:
    explicit Scope(GradTape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    GradTape* previous_;
  };

  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  static GradTape* current();

  void push(Entry entry) { entries_.push_back(std::move(entry)); }
  std::size_t size() const { return entries_.size(); }

  // Seeds d(loss)/d(loss) = 1 and replays the entries in reverse order.
  // Gradients accumulate into leaves; every requires_grad input seen on the
  // tape ends up with a gradient of its own shape.
  void backward(const Var& loss);

  void clear() { entries_.clear(); }

 private:
  std::vector<Entry> entries_;
};

void backward(GradTape& tape, const Var& loss);

// Builds the output variable of a differentiable operation and records the
// backward rule when a tape is current and any input requires a gradient.
Var record(Tensor value, std::vector<Var> inputs, GradTape::BackwardFn backward);

// Trainable leaf with a stable name.
struct Parameter {
  std::string name;
  Var var;

  Parameter() = default;
  Parameter(std::string n, Tensor value) : name(std::move(n)), var(std::move(value), true) {}

  const Tensor& value() const { return var.value(); }
  Tensor& mutable_value() { return var.node().value; }
  const Tensor& grad() const { return var.grad(); }
  void zero_grad() { var.node().grad = Tensor::zeros(var.value().shape()); }
};

// Test-only fault injection: when set, the backward rule of the named
// operation scales its input gradients by 1.5.
void set_gradient_fault(std::string op_name);
void clear_gradient_fault();
double gradient_fault_scale(std::string_view op_name);

}  // namespace tsc

#endif  // TSCFORMER_AUTODIFF_HPP_
