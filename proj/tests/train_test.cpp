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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "test_util.hpp"
#include "tscformer/error.hpp"
#include "tscformer/model_check.hpp"
#include "tscformer/train.hpp"

namespace tsc {
namespace {

void set_grad(Parameter& p, Tensor g) { p.var.node().grad = std::move(g); }

TEST(SgdStepTest, PlainStep) {
  Parameter p("p", Tensor({1}, 1.0));
  set_grad(p, Tensor({1}, 2.0));
  std::vector<Tensor> velocity;
  sgd_step({&p}, 0.5, 0.0, velocity);
  EXPECT_EQ(p.value()[0], 0.0);
}

TEST(SgdStepTest, ZeroGradientDecaysVelocity) {
  Parameter p("p", Tensor({2}, 1.0));
  std::vector<Tensor> velocity{Tensor({2}, 4.0)};
  set_grad(p, Tensor({2}, 0.0));
  sgd_step({&p}, 0.0, 0.9, velocity);
  EXPECT_EQ(p.value(), Tensor({2}, 1.0));
  EXPECT_EQ(velocity[0], Tensor({2}, 0.9 * 4.0));
}

TEST(SgdStepTest, MomentumAndWeightDecayRule) {
  Parameter p("p", Tensor({1}, 2.0));
  std::vector<Tensor> velocity{Tensor({1}, 1.0)};
  set_grad(p, Tensor({1}, 0.5));
  sgd_step({&p}, 0.1, 0.9, velocity, 0.01);
  const double v = 0.9 * 1.0 + 0.5 + 0.01 * 2.0;
  EXPECT_DOUBLE_EQ(velocity[0][0], v);
  EXPECT_DOUBLE_EQ(p.value()[0], 2.0 - 0.1 * v);
}

TEST(SgdStepTest, QuadraticBowlConverges) {
  const Tensor target({3}, {1.5, -2.0, 0.25});
  Parameter p("p", Tensor({3}, 0.0));
  std::vector<Tensor> velocity;
  for (int step = 0; step < 100; ++step) {
    GradTape tape;
    Var loss;
    {
      GradTape::Scope scope(tape);
      const Var d = p.var - constant(target);
      loss = 0.5 * sum(d * d);
    }
    p.zero_grad();
    tape.backward(loss);
    sgd_step({&p}, 0.5, 0.1, velocity);
  }
  EXPECT_LT(max_abs_diff(p.value(), target), 1e-6);
}

TEST(SgdStepTest, NonFiniteGradientNamesParameterAndUpdatesNothing) {
  Parameter a("a", Tensor({1}, 1.0)), b("b.weight", Tensor({1}, 1.0));
  set_grad(a, Tensor({1}, 1.0));
  set_grad(b, Tensor({1}, std::nan("")));
  std::vector<Tensor> velocity;
  try {
    sgd_step({&a, &b}, 0.1, 0.9, velocity);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("b.weight"), std::string::npos);
  }
  EXPECT_EQ(a.value()[0], 1.0);
}

TEST(SgdStepTest, NonzeroGradientChangesParameters) {
  std::mt19937_64 rng(1);
  Parameter p("p", test::random_tensor({4}, rng));
  const Tensor before = p.value();
  set_grad(p, test::random_tensor({4}, rng));
  std::vector<Tensor> velocity;
  sgd_step({&p}, 1e-3, 0.9, velocity);
  EXPECT_NE(p.value(), before);
}

TEST(LrAtTest, MilestoneSchedule) {
  TrainConfig cfg;
  EXPECT_EQ(lr_at(0, cfg), 0.001);
  EXPECT_EQ(lr_at(24, cfg), 0.001);
  EXPECT_EQ(lr_at(25, cfg), 0.0001);
  EXPECT_EQ(lr_at(29, cfg), 0.0001);
  cfg.milestones = {2, 4};
  EXPECT_EQ(lr_at(4, cfg), 1e-5);
  cfg.gamma = 0.0;
  EXPECT_EQ(lr_at(4, cfg), 0.0);
  EXPECT_EQ(proportional_milestones(30), (std::vector<std::size_t>{25}));
  EXPECT_EQ(proportional_milestones(6), (std::vector<std::size_t>{5}));
}

TEST(TrainConfigTest, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.milestones = {30};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.lr = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(TopkTest, Examples) {
  const Tensor logits({1, 3}, {3, 1, 2});
  EXPECT_EQ(topk_accuracy(logits, std::vector<int>{0}, 1), 1.0);
  EXPECT_EQ(topk_accuracy(logits, std::vector<int>{2}, 1), 0.0);
  EXPECT_EQ(topk_accuracy(logits, std::vector<int>{2}, 2), 1.0);
  EXPECT_EQ(topk_accuracy(logits, std::vector<int>{1}, 3), 1.0);
  const Tensor ties({1, 3}, {1, 1, 1});
  EXPECT_EQ(topk_accuracy(ties, std::vector<int>{0}, 1), 1.0);
  EXPECT_EQ(topk_accuracy(ties, std::vector<int>{1}, 1), 0.0);
  EXPECT_THROW(topk_accuracy(logits, std::vector<int>{0}, 4), ValidationError);
  EXPECT_THROW(topk_accuracy(logits, std::vector<int>{0}, 0), ValidationError);
}

TEST(TopkTest, MatchesSortOracle) {
  std::mt19937_64 rng(2);
  const std::size_t B = 64, K = 10;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits({B, K});
    std::uniform_int_distribution<int> small(0, 4);
    for (auto& v : logits.values()) v = small(rng);  // frequent ties
    std::vector<int> labels(B);
    for (auto& l : labels) l = static_cast<int>(rng() % K);
    for (std::size_t k = 1; k <= K; ++k) {
      EXPECT_EQ(topk_accuracy(logits, labels, k), test::oracle::topk_accuracy(logits, labels, k));
    }
  }
}

TEST(SelectFramesTest, UniformSubset) {
  ClipPair c;
  c.rgb = Tensor({8, 3, 2, 2});
  c.event = Tensor({8, 3, 2, 2});
  for (std::size_t t = 0; t < 8; ++t) {
    c.frame_times.push_back(10 * t);
    c.rgb[t * 12] = static_cast<double>(t);
  }
  const ClipPair s = select_frames(c, 4);
  EXPECT_EQ(s.frame_times, (std::vector<std::uint64_t>{10, 30, 50, 70}));
  EXPECT_EQ(s.rgb[12], 3.0);
  EXPECT_EQ(select_frames(c, 8).rgb, c.rgb);
  EXPECT_THROW(select_frames(c, 9), ValidationError);
}

std::vector<ClipPair> tiny_clips(const TscFormerConfig& cfg, int per_class) {
  SynthSpec spec;
  spec.seed = 5;
  spec.num_classes = static_cast<int>(cfg.num_classes);
  spec.samples_per_class = per_class;
  spec.frames = cfg.frames;
  spec.height = 13;
  spec.width = 13;
  return synth_dataset(spec);
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.batch_size = 3;
  t.epochs = 2;
  t.milestones = {1};
  t.lr = 0.01;
  t.seed = 9;
  return t;
}

TEST(TrainTest, ZeroLearningRateLeavesParametersUnchanged) {
  const auto cfg = tiny_config();
  TscFormer model(cfg);
  std::vector<Tensor> before;
  for (auto* p : model.parameters()) before.push_back(p->value());
  auto t = tiny_train();
  t.lr = 0.0;
  train(model, tiny_clips(cfg, 2), t);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(model.parameters()[i]->value(), before[i]);
}

TEST(TrainTest, SameSeedSameLogAndCurve) {
  const auto cfg = tiny_config();
  const auto clips = tiny_clips(cfg, 2);
  std::ostringstream log_a, log_b;
  TscFormer a(cfg), b(cfg);
  const auto ra = train(a, clips, tiny_train(), &log_a);
  const auto rb = train(b, clips, tiny_train(), &log_b);
  EXPECT_EQ(ra.losses, rb.losses);
  EXPECT_EQ(log_a.str(), log_b.str());
  EXPECT_EQ(ra.steps, 4u);
  EXPECT_EQ(ra.epochs.size(), 2u);
  EXPECT_EQ(ra.epochs[1].lr, 0.001);
  const std::string first = log_a.str().substr(0, log_a.str().find('\n'));
  EXPECT_EQ(first.find("{\"step\":0,\"epoch\":0,\"lr\":0.01,\"loss\":"), 0u) << first;

  auto other = tiny_train();
  other.seed = 10;
  TscFormer c(cfg);
  EXPECT_NE(train(c, clips, other).losses, ra.losses);
}

TEST(TrainTest, MaxStepsStopsEarly) {
  const auto cfg = tiny_config();
  TscFormer model(cfg);
  auto t = tiny_train();
  t.max_steps = 3;
  EXPECT_EQ(train(model, tiny_clips(cfg, 2), t).steps, 3u);
}

TEST(TrainTest, NonFiniteLossAbortsWithStep) {
  const auto cfg = tiny_config();
  TscFormer model(cfg);
  model.head.bias.mutable_value()[0] = std::numeric_limits<double>::infinity();
  try {
    train(model, tiny_clips(cfg, 2), tiny_train());
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
  }
}

TEST(EvaluateTest, MetricsAreOrderedAndMatchPredict) {
  const auto cfg = tiny_config();
  const auto clips = tiny_clips(cfg, 2);
  TscFormer model(cfg);
  train(model, clips, tiny_train());
  const Metrics m = evaluate(model, clips, 4);
  EXPECT_LE(m.top1, m.top5);
  EXPECT_EQ(m.k5, 3u);
  EXPECT_EQ(m.top5, 1.0);
  const Tensor logits = predict(model, clips, 4);
  std::vector<int> labels;
  for (const auto& c : clips) labels.push_back(c.label);
  EXPECT_EQ(m.top1, topk_accuracy(logits, labels, 1));
  EXPECT_LT(max_abs_diff(predict(model, clips, 1), logits), 1e-12);
}

}  // namespace
}  // namespace tsc
