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
#include "tscformer/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include <nlohmann/json.hpp>

#include "tscformer/error.hpp"

namespace tsc {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (!std::isfinite(lr) || lr < 0.0) throw ConfigError("train: lr must be finite and >= 0");
  if (!std::isfinite(momentum) || momentum < 0.0 || momentum >= 1.0) {
    throw ConfigError("train: momentum must lie in [0, 1)");
  }
  if (!std::isfinite(weight_decay) || weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
  if (!std::isfinite(gamma) || gamma <= 0.0) throw ConfigError("train: gamma must be > 0");
  for (std::size_t m : milestones) {
    if (m < 1 || m >= epochs) {
      throw ConfigError("train: milestone " + std::to_string(m) + " outside epoch range [1, " +
                        std::to_string(epochs - 1) + "]");
    }
  }
}

std::vector<std::size_t> proportional_milestones(std::size_t epochs) {
  const auto m = static_cast<std::size_t>(std::lround(static_cast<double>(epochs) * 25.0 / 30.0));
  if (m < 1 || m >= epochs) return {};
  return {m};
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  int passed = 0;
  for (std::size_t m : cfg.milestones) {
    if (m <= epoch) ++passed;
  }
  if (passed == 0) return cfg.lr;
  // Dividing by (1/gamma)^n keeps decimal schedules exact: 0.001 / 10 is
  // 0.0001, while 0.001 * 0.1 is not.
  return cfg.lr / std::pow(1.0 / cfg.gamma, passed);
}

void sgd_step(const ParameterRefs& params, double lr, double momentum, std::vector<Tensor>& velocity,
              double weight_decay) {
  if (velocity.size() != params.size()) {
    velocity.clear();
    for (const Parameter* p : params) velocity.push_back(Tensor::zeros(p->value().shape()));
  }
  for (const Parameter* p : params) {
    const Tensor& g = p->grad();
    if (g.empty()) throw ValidationError("sgd: parameter '" + p->name + "' has no gradient");
    if (g.shape() != p->value().shape()) {
      throw DimensionError("sgd: gradient " + to_string(g.shape()) + " does not match parameter '" + p->name + "' " +
                           to_string(p->value().shape()));
    }
    if (!g.all_finite()) throw NumericError("sgd: non-finite gradient for parameter '" + p->name + "'");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto pv = params[i]->mutable_value().vec();
    auto v = velocity[i].vec();
    const auto g = params[i]->grad().vec();
    if (weight_decay != 0.0) {
      v = momentum * v + g + weight_decay * pv;
    } else {
      v = momentum * v + g;
    }
    pv -= lr * v;
  }
}

double topk_accuracy(const Tensor& logits, std::span<const int> labels, std::size_t k) {
  if (logits.rank() != 2) throw DimensionError("topk: expected [B, K] logits, got " + to_string(logits.shape()));
  const std::size_t B = logits.dim(0), K = logits.dim(1);
  if (labels.size() != B) {
    throw DimensionError("topk: " + std::to_string(labels.size()) + " labels for " + std::to_string(B) + " rows");
  }
  if (k < 1 || k > K) {
    throw ValidationError("topk: k = " + std::to_string(k) + " outside [1, " + std::to_string(K) + "]");
  }
  std::size_t hits = 0;
  for (std::size_t b = 0; b < B; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= K) {
      throw ValidationError("topk: label " + std::to_string(y) + " outside [0, " + std::to_string(K) + ")");
    }
    const double* row = logits.data() + b * K;
    const double target = row[y];
    std::size_t rank = 0;
    for (std::size_t j = 0; j < K; ++j) {
      if (row[j] > target || (row[j] == target && j < static_cast<std::size_t>(y))) ++rank;
    }
    if (rank < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(B);
}

ClipPair select_frames(const ClipPair& pair, std::size_t frames) {
  const std::size_t F = pair.frames();
  if (frames == F) return pair;
  if (frames < 1 || frames > F) {
    throw ValidationError("select_frames: cannot take " + std::to_string(frames) + " frames from a " +
                          std::to_string(F) + "-frame clip");
  }
  const std::size_t plane = pair.rgb.size() / F;
  Shape shape = pair.rgb.shape();
  shape[0] = frames;
  ClipPair out{Tensor(shape), Tensor(shape), pair.label, {}};
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t src = (2 * t + 1) * F / (2 * frames);
    std::copy_n(pair.rgb.data() + src * plane, plane, out.rgb.data() + t * plane);
    std::copy_n(pair.event.data() + src * plane, plane, out.event.data() + t * plane);
    if (!pair.frame_times.empty()) out.frame_times.push_back(pair.frame_times[src]);
  }
  return out;
}

Batch make_batch(std::span<const ClipPair> clips) {
  if (clips.empty()) throw ValidationError("make_batch: no clips");
  const Shape clip_shape = clips[0].rgb.shape();
  Shape shape{clips.size()};
  shape.insert(shape.end(), clip_shape.begin(), clip_shape.end());
  Batch batch{Tensor(shape), Tensor(shape), {}};
  const std::size_t n = numel(clip_shape);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (clips[i].rgb.shape() != clip_shape || clips[i].event.shape() != clip_shape) {
      throw DimensionError("make_batch: clip " + std::to_string(i) + " has shape " +
                           to_string(clips[i].rgb.shape()) + ", expected " + to_string(clip_shape));
    }
    std::copy_n(clips[i].rgb.data(), n, batch.rgb.data() + i * n);
    std::copy_n(clips[i].event.data(), n, batch.event.data() + i * n);
    batch.labels.push_back(clips[i].label);
  }
  return batch;
}

namespace {

std::size_t input_side(const TscFormerConfig& cfg) {
  if (cfg.height != cfg.width) {
    throw ConfigError("training expects square inputs, got " + std::to_string(cfg.height) + "x" +
                      std::to_string(cfg.width));
  }
  return cfg.height;
}

void check_labels(const std::vector<ClipPair>& clips, std::size_t num_classes) {
  for (std::size_t i = 0; i < clips.size(); ++i) {
    if (clips[i].label < 0 || static_cast<std::size_t>(clips[i].label) >= num_classes) {
      throw ValidationError("clip " + std::to_string(i) + " has label " + std::to_string(clips[i].label) +
                            " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
}

}  // namespace

ClipPair prepare_clip(const ClipPair& clip, const TscFormerConfig& cfg, std::mt19937_64* rng) {
  const ClipPair framed = select_frames(clip, cfg.frames);
  std::mt19937_64 unused(0);
  return augment(framed, rng != nullptr ? *rng : unused, rng != nullptr ? Mode::kTrain : Mode::kEval,
                 input_side(cfg));
}

TrainResult train(TscFormer& model, const std::vector<ClipPair>& clips, const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (clips.empty()) throw ValidationError("train: empty dataset");
  const TscFormerConfig& mc = model.config();
  check_labels(clips, mc.num_classes);
  const std::size_t k5 = std::min<std::size_t>(5, mc.num_classes);

  TrainResult result;
  std::vector<Tensor> velocity;
  std::vector<std::size_t> order(clips.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.max_steps != 0 && result.steps >= cfg.max_steps) break;
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(clip_seed(cfg.seed, ~std::uint64_t{0}, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = lr_at(epoch, cfg);
    EpochRecord record{epoch, lr, {}};
    record.metrics.k5 = k5;
    double loss_sum = 0.0, top1_sum = 0.0, top5_sum = 0.0;
    std::size_t seen = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      if (cfg.max_steps != 0 && result.steps >= cfg.max_steps) break;
      std::vector<ClipPair> items;
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) {
        std::mt19937_64 rng(clip_seed(cfg.seed, order[i], epoch));
        items.push_back(prepare_clip(clips[order[i]], mc, cfg.augment ? &rng : nullptr));
      }
      const Batch batch = make_batch(items);
      for (Parameter* p : model.parameters()) p->zero_grad();

      GradTape tape;
      Var loss;
      Tensor logits;
      {
        GradTape::Scope scope(tape);
        const Var out = model.forward(constant(batch.rgb), constant(batch.event), Mode::kTrain);
        loss = model_loss(out, batch.labels);
        logits = out.value();
      }
      const double loss_value = loss.value().item();
      if (!std::isfinite(loss_value)) {
        throw NumericError("train: non-finite loss at step " + std::to_string(result.steps));
      }
      tape.backward(loss);
      sgd_step(model.parameters(), lr, cfg.momentum, velocity, cfg.weight_decay);

      const double top1 = topk_accuracy(logits, batch.labels, 1);
      const double top5 = topk_accuracy(logits, batch.labels, k5);
      const auto n = static_cast<double>(items.size());
      loss_sum += loss_value * n;
      top1_sum += top1 * n;
      top5_sum += top5 * n;
      seen += items.size();
      result.losses.push_back(loss_value);
      if (log != nullptr) {
        nlohmann::ordered_json line;
        line["step"] = result.steps;
        line["epoch"] = epoch;
        line["lr"] = lr;
        line["loss"] = loss_value;
        line["top1"] = top1;
        line["top5"] = top5;
        *log << line.dump() << '\n';
      }
      ++result.steps;
    }
    if (seen == 0) break;
    record.metrics.loss = loss_sum / static_cast<double>(seen);
    record.metrics.top1 = top1_sum / static_cast<double>(seen);
    record.metrics.top5 = top5_sum / static_cast<double>(seen);
    result.epochs.push_back(record);
  }
  if (log != nullptr) log->flush();
  return result;
}

Tensor predict(TscFormer& model, const std::vector<ClipPair>& clips, std::size_t batch_size) {
  if (clips.empty()) throw ValidationError("predict: empty dataset");
  if (batch_size < 1) throw ConfigError("predict: batch_size must be >= 1");
  const TscFormerConfig& mc = model.config();
  const std::size_t K = mc.num_classes;
  Tensor out({clips.size(), K});
  for (std::size_t start = 0; start < clips.size(); start += batch_size) {
    std::vector<ClipPair> items;
    for (std::size_t i = start; i < std::min(clips.size(), start + batch_size); ++i) {
      items.push_back(prepare_clip(clips[i], mc, nullptr));
    }
    const Batch batch = make_batch(items);
    const Var logits = model.forward(constant(batch.rgb), constant(batch.event), Mode::kEval);
    std::copy_n(logits.value().data(), items.size() * K, out.data() + start * K);
  }
  return out;
}

Metrics evaluate(TscFormer& model, const std::vector<ClipPair>& clips, std::size_t batch_size) {
  check_labels(clips, model.config().num_classes);
  const Tensor logits = predict(model, clips, batch_size);
  std::vector<int> labels;
  for (const auto& c : clips) labels.push_back(c.label);
  Metrics m;
  m.k5 = std::min<std::size_t>(5, model.config().num_classes);
  m.top1 = topk_accuracy(logits, labels, 1);
  m.top5 = topk_accuracy(logits, labels, m.k5);
  m.loss = cross_entropy(constant(logits), labels).value().item();
  if (m.top1 > m.top5) throw NumericError("evaluate: top1 exceeds top5");
  return m;
}

}  // namespace tsc
