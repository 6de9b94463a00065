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
#include "tscformer/autodiff.hpp"

#include <algorithm>
#include <mutex>

#include "tscformer/error.hpp"

namespace tsc {

namespace {

thread_local GradTape* current_tape = nullptr;

std::mutex fault_mutex;
std::string fault_op;
bool fault_active = false;

}  // namespace

void Node::accumulate(const Tensor& g) {
  if (g.shape() != value.shape()) {
    throw DimensionError("gradient shape " + to_string(g.shape()) + " does not match value " +
                         to_string(value.shape()));
  }
  if (grad.empty()) {
    grad = g;
    return;
  }
  grad.vec() += g.vec();
}

void Node::accumulate(Tensor&& g) {
  if (g.shape() != value.shape()) {
    throw DimensionError("gradient shape " + to_string(g.shape()) + " does not match value " +
                         to_string(value.shape()));
  }
  if (grad.empty()) {
    grad = std::move(g);
    return;
  }
  grad.vec() += g.vec();
}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

GradTape::Scope::Scope(GradTape& tape) : previous_(current_tape) { current_tape = &tape; }
GradTape::Scope::~Scope() { current_tape = previous_; }

GradTape* GradTape::current() { return current_tape; }

void GradTape::backward(const Var& loss) {
  if (!loss.defined() || loss.value().size() != 1) {
    throw ValidationError("backward() requires a scalar loss, got shape " +
                          (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  Node& root = loss.node();
  root.accumulate(Tensor(root.value.shape(), 1.0));
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    Node& out = *it->output;
    if (out.grad.empty()) continue;
    it->backward(out.grad, out.value);
  }
  for (const auto& entry : entries_) {
    for (const auto& in : entry.inputs) {
      if (in->requires_grad && in->grad.empty()) in->grad = Tensor::zeros(in->value.shape());
    }
  }
}

void backward(GradTape& tape, const Var& loss) { tape.backward(loss); }

Var record(Tensor value, std::vector<Var> inputs, GradTape::BackwardFn backward) {
  GradTape* tape = GradTape::current();
  const bool needs = tape && std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v.requires_grad(); });
  Var out(std::move(value), needs);
  if (needs) {
    GradTape::Entry entry;
    entry.output = out.node_ptr();
    entry.inputs.reserve(inputs.size());
    for (const auto& in : inputs) entry.inputs.push_back(in.node_ptr());
    entry.backward = std::move(backward);
    tape->push(std::move(entry));
  }
  return out;
}

void set_gradient_fault(std::string op_name) {
  std::lock_guard lock(fault_mutex);
  fault_op = std::move(op_name);
  fault_active = true;
}

void clear_gradient_fault() {
  std::lock_guard lock(fault_mutex);
  fault_op.clear();
  fault_active = false;
}

double gradient_fault_scale(std::string_view op_name) {
  std::lock_guard lock(fault_mutex);
  return (fault_active && fault_op == op_name) ? 1.5 : 1.0;
}

}  // namespace tsc
