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
#ifndef TSCFORMER_TRAIN_HPP_
#define TSCFORMER_TRAIN_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "tscformer/data.hpp"
#include "tscformer/model.hpp"

namespace tsc {

struct TrainConfig {
  std::size_t batch_size = 8;
  std::size_t epochs = 30;
  double lr = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::vector<std::size_t> milestones{25};
  double gamma = 0.1;
  std::size_t max_steps = 0;  // 0: run every epoch
  bool augment = true;
  std::uint64_t seed = 0;

  void validate() const;
};

// Keeps the milestone at 25/30 of the run when the epoch count changes.
std::vector<std::size_t> proportional_milestones(std::size_t epochs);

// lr * gamma^(number of milestones <= epoch)
double lr_at(std::size_t epoch, const TrainConfig& cfg);

// Momentum SGD: v <- momentum * v + (g + weight_decay * p); p <- p - lr * v.
// velocity is resized to match params on first use. A non-finite gradient
// raises NumericError naming the parameter, before anything is updated.
void sgd_step(const ParameterRefs& params, double lr, double momentum, std::vector<Tensor>& velocity,
              double weight_decay = 0.0);

// Fraction of rows whose label ranks among the k largest logits, ties going
// to the lower index.
double topk_accuracy(const Tensor& logits, std::span<const int> labels, std::size_t k);

struct Metrics {
  double top1 = 0.0;
  double top5 = 0.0;
  double loss = 0.0;
  std::size_t k5 = 5;  // effective k of top5: min(5, num_classes)
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  Metrics metrics;  // running training-mode metrics over the epoch
};

struct TrainResult {
  std::vector<double> losses;  // per step
  std::vector<EpochRecord> epochs;
  std::size_t steps = 0;
};

// Uniformly spaced subset of `frames` frames (identity when equal).
ClipPair select_frames(const ClipPair& pair, std::size_t frames);

// Frame selection plus augmentation to the model's input side: a training
// draw when rng is set, the eval centre crop otherwise.
ClipPair prepare_clip(const ClipPair& clip, const TscFormerConfig& cfg, std::mt19937_64* rng = nullptr);

// Stacks clips into [B, T, 3, H, W] tensors.
struct Batch {
  Tensor rgb;
  Tensor event;
  std::vector<int> labels;
};
Batch make_batch(std::span<const ClipPair> clips);

// Epoch e shuffles with a seed mixed from (seed, e); every clip draws its
// augmentation from clip_seed(seed, index, e). When log is set, one JSON
// record per step: step, epoch, lr, loss, top1, top5.
TrainResult train(TscFormer& model, const std::vector<ClipPair>& clips, const TrainConfig& cfg,
                  std::ostream* log = nullptr);

// Eval-mode metrics with centre crop preprocessing.
Metrics evaluate(TscFormer& model, const std::vector<ClipPair>& clips, std::size_t batch_size = 8);

// Eval-mode logits [N, K] for the clips in order.
Tensor predict(TscFormer& model, const std::vector<ClipPair>& clips, std::size_t batch_size = 8);

}  // namespace tsc

#endif  // TSCFORMER_TRAIN_HPP_
