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

#include <cmath>
#include <filesystem>
#include <random>

#include "test_util.hpp"
#include "tscformer/data.hpp"
#include "tscformer/error.hpp"
#include "tscformer/model.hpp"
#include "tscformer/model_check.hpp"
#include "tscformer/train.hpp"

namespace tsc {
namespace {

using test::random_tensor;

Tensor clip_tensor(std::mt19937_64& rng, const TscFormerConfig& cfg, std::size_t batch) {
  return random_tensor({batch, cfg.frames, 3, cfg.height, cfg.width}, rng, 0.0, 1.0);
}

Tensor eval_logits(TscFormer& model, const Tensor& rgb, const Tensor& evt) {
  return model.forward(constant(rgb), constant(evt), Mode::kEval).value();
}

// One train-mode pass so batchnorm running statistics exist.
void warm_up(TscFormer& model, const Tensor& rgb, const Tensor& evt) {
  model.forward(constant(rgb), constant(evt), Mode::kTrain);
}

TEST(StemTest, QuartersExtentsAndZeroInputGivesZero) {
  Rng rng(1);
  Stem stem("stem", 4, rng);
  const Var y = stem(constant(random_tensor({2, 3, 32, 32}, rng)), Mode::kTrain);
  EXPECT_EQ(y.shape(), (Shape{2, 4, 8, 8}));
  const Var z = stem(constant(Tensor({2, 3, 32, 32})), Mode::kTrain);
  EXPECT_EQ(z.value().max_abs(), 0.0);
}

TEST(BottleneckTest, StrideHalvesAndZeroGammaLeavesShortcut) {
  Rng rng(2);
  Bottleneck unit("u", 4, 8, 2, 2, rng);
  ASSERT_TRUE(unit.project);
  const Var x = constant(random_tensor({3, 4, 6, 6}, rng));
  EXPECT_EQ(unit(x, Mode::kTrain).shape(), (Shape{3, 8, 3, 3}));
  std::fill(unit.bn3.gamma.mutable_value().values().begin(), unit.bn3.gamma.mutable_value().values().end(), 0.0);
  const Tensor out = unit(x, Mode::kTrain).value();
  const Tensor shortcut = relu(unit.proj_bn(unit.proj(x), Mode::kTrain)).value();
  EXPECT_EQ(out, shortcut);

  Bottleneck same("v", 8, 8, 1, 2, rng);
  EXPECT_FALSE(same.project);
  std::fill(same.bn3.gamma.mutable_value().values().begin(), same.bn3.gamma.mutable_value().values().end(), 0.0);
  const Var y = constant(random_tensor({3, 8, 3, 3}, rng));
  EXPECT_EQ(same(y, Mode::kTrain).value(), relu(y).value());
}

TEST(ResidualStageTest, MatchesManualComposition) {
  Rng rng(3);
  ResidualStage stage("s", 4, 8, 2, 2, 2, rng);
  const std::size_t B = 2, T = 3;
  const Var x = constant(random_tensor({B * T, 4, 4, 4}, rng));
  const ShiftConfig shift{4};
  const Tensor out = stage(x, T, &shift, Mode::kTrain).value();
  Var h = reshape(temporal_shift(reshape(x, {B, T, 4, 4, 4}), shift), {B * T, 4, 4, 4});
  for (auto& unit : stage.units) h = unit(h, Mode::kTrain);
  EXPECT_EQ(out, h.value());
  EXPECT_EQ(out.shape(), (Shape{B * T, 8, 2, 2}));
}

TEST(TscFormerTest, OutputShapesForSeveralConfigs) {
  std::mt19937_64 rng(4);
  TscFormerConfig a = tiny_config();
  TscFormerConfig b = tiny_config();
  b.frames = 3;
  b.height = 12;
  b.width = 16;
  b.num_classes = 5;
  b.bridge.insertion_blocks = {2, 4};
  TscFormerConfig c = tiny_config();
  c.fusion.mode = FusionMode::kAdd;
  c.bridge.depth = 2;
  c.use_shift = false;
  for (const auto& cfg : {a, b, c}) {
    TscFormer model(cfg);
    std::vector<BlockFeatures> blocks;
    const Var y = model.forward(constant(clip_tensor(rng, cfg, 2)), constant(clip_tensor(rng, cfg, 2)), Mode::kTrain,
                                &blocks);
    EXPECT_EQ(y.shape(), (Shape{2, cfg.num_classes}));
    ASSERT_EQ(blocks.size(), 4u);
    const auto hs = cfg.spatial_heights();
    const auto ws = cfg.spatial_widths();
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(blocks[i].rgb.shape(), (Shape{2, cfg.frames, cfg.channels[i], hs[i + 1], ws[i + 1]}));
      EXPECT_EQ(blocks[i].event.shape(), blocks[i].rgb.shape());
      EXPECT_EQ(blocks[i].tokens.shape(), (Shape{2, cfg.bridge.tokens, cfg.bridge.token_dim}));
    }
  }
}

TEST(TscFormerTest, EvalIsDeterministicAndConstructionIsSeeded) {
  std::mt19937_64 rng(5);
  const auto cfg = tiny_config();
  TscFormer m1(cfg), m2(cfg);
  ASSERT_EQ(m1.parameter_count(), m2.parameter_count());
  for (std::size_t i = 0; i < m1.parameters().size(); ++i) {
    EXPECT_EQ(m1.parameters()[i]->name, m2.parameters()[i]->name);
    EXPECT_EQ(m1.parameters()[i]->value(), m2.parameters()[i]->value());
  }
  const Tensor rgb = clip_tensor(rng, cfg, 3), evt = clip_tensor(rng, cfg, 3);
  warm_up(m1, rgb, evt);
  EXPECT_EQ(eval_logits(m1, rgb, evt), eval_logits(m1, rgb, evt));
}

TEST(TscFormerTest, EvalBeforeAnyTrainingPassIsRejected) {
  std::mt19937_64 rng(6);
  const auto cfg = tiny_config();
  TscFormer model(cfg);
  EXPECT_THROW(eval_logits(model, clip_tensor(rng, cfg, 1), clip_tensor(rng, cfg, 1)), ValidationError);
}

TEST(TscFormerTest, BatchPermutationEquivariance) {
  std::mt19937_64 rng(7);
  const auto cfg = tiny_config();
  TscFormer model(cfg);
  const std::size_t B = 4, per = cfg.frames * 3 * cfg.height * cfg.width;
  const Tensor rgb = clip_tensor(rng, cfg, B), evt = clip_tensor(rng, cfg, B);
  warm_up(model, rgb, evt);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  Tensor prgb(rgb.shape()), pevt(evt.shape());
  for (std::size_t b = 0; b < B; ++b) {
    std::copy_n(rgb.data() + perm[b] * per, per, prgb.data() + b * per);
    std::copy_n(evt.data() + perm[b] * per, per, pevt.data() + b * per);
  }
  const Tensor y = eval_logits(model, rgb, evt);
  const Tensor py = eval_logits(model, prgb, pevt);
  const std::size_t K = cfg.num_classes;
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t k = 0; k < K; ++k) EXPECT_NEAR(py[b * K + k], y[perm[b] * K + k], 1e-12);
}

TEST(TscFormerTest, RejectsMismatchedModalities) {
  std::mt19937_64 rng(8);
  auto cfg = tiny_config();
  TscFormer model(cfg);
  cfg.frames = 3;
  EXPECT_THROW(model.forward(constant(clip_tensor(rng, tiny_config(), 1)), constant(clip_tensor(rng, cfg, 1)),
                             Mode::kTrain),
               DimensionError);
}

TEST(TscFormerConfigTest, Validation) {
  auto cfg = tiny_config();
  EXPECT_NO_THROW(cfg.validate());
  cfg.height = 10;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.channels[0] = 2;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.bridge.heads = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(parse_input_pair("depth"), ConfigError);
  EXPECT_EQ(parse_input_pair("event_event"), InputPair::kEventEvent);
}

TEST(ParameterBookkeepingTest, RemovingInsertionsDropsBridgeAndFusion) {
  auto cfg = tiny_config();
  TscFormer full(cfg);
  cfg.bridge.insertion_blocks = {};
  TscFormer bare(cfg);
  EXPECT_GT(bridge_parameter_count(full), 0u);
  EXPECT_GT(fusion_parameter_count(full), 0u);
  EXPECT_EQ(bridge_parameter_count(bare), 0u);
  EXPECT_EQ(fusion_parameter_count(bare), 0u);
  EXPECT_EQ(full.parameter_count() - bare.parameter_count(),
            bridge_parameter_count(full) + fusion_parameter_count(full));
}

TEST(ParameterBookkeepingTest, ConcatVersusAddDifference) {
  auto cfg = tiny_config();
  TscFormer concat(cfg);
  cfg.fusion.mode = FusionMode::kAdd;
  TscFormer add(cfg);
  const std::size_t L = cfg.bridge.tokens, D = cfg.bridge.token_dim;
  const auto hs = cfg.spatial_heights(), ws = cfg.spatial_widths();
  long expected = 0;
  for (int b : cfg.bridge.insertion_blocks) {
    const long C = static_cast<long>(cfg.channels[b - 1]);
    const long HW = static_cast<long>(hs[b] * ws[b]);
    const long fuse = (C + static_cast<long>(D)) * C - C * C;
    const long project = static_cast<long>(L * D + 1) * (static_cast<long>(D) - C) * HW;
    expected += 2 * (fuse + project);
  }
  EXPECT_EQ(static_cast<long>(concat.parameter_count()) - static_cast<long>(add.parameter_count()), expected);
  EXPECT_EQ(bridge_parameter_count(concat), bridge_parameter_count(add));
}

TEST(ParameterBookkeepingTest, GroupsPartitionTheCount) {
  TscFormer model(tiny_config());
  const auto groups = parameter_counts_by_group(model.parameters());
  std::size_t total = 0;
  for (const auto& [name, n] : groups) total += n;
  EXPECT_EQ(total, model.parameter_count());
  EXPECT_EQ(parameter_group("bridge2.layer0.attn.q.weight"), "bridge2.layer0");
  EXPECT_EQ(parameter_group("tokens"), "tokens");
  EXPECT_EQ(parameter_group("head.bias"), "head");
  EXPECT_TRUE(groups.count("f2v3.fuse"));
}

TEST(CheckpointTest, RoundTripGivesIdenticalLogits) {
  std::mt19937_64 rng(9);
  const auto cfg = tiny_config();
  TscFormer model(cfg);
  const Tensor rgb = clip_tensor(rng, cfg, 2), evt = clip_tensor(rng, cfg, 2);
  warm_up(model, rgb, evt);
  for (Parameter* p : model.parameters()) {
    for (auto& v : p->mutable_value().values()) v += 0.01;
  }
  const Tensor before = eval_logits(model, rgb, evt);
  const auto path = std::filesystem::temp_directory_path() / "tsc_model_test.ckpt";
  save_checkpoint(path, model, "note = 1\n");
  EXPECT_EQ(read_checkpoint_config(path), "note = 1\n");

  auto other_cfg = cfg;
  other_cfg.init_seed = 77;
  TscFormer restored(other_cfg);
  load_checkpoint(path, restored);
  EXPECT_EQ(eval_logits(restored, rgb, evt), before);

  auto wrong = cfg;
  wrong.bridge.token_dim = 4;
  TscFormer mismatched(wrong);
  EXPECT_THROW(load_checkpoint(path, mismatched), ValidationError);
  std::filesystem::remove(path);
}

TEST(LossTest, UniformLogitsGiveLogK) {
  const std::vector<int> labels{0, 3, 1};
  const Var loss = model_loss(constant(Tensor({3, 5}, 0.7)), labels);
  EXPECT_NEAR(loss.value().item(), std::log(5.0), 1e-15);
  std::mt19937_64 rng(10);
  const Var logits = constant(random_tensor({3, 5}, rng));
  EXPECT_EQ(model_loss(logits, labels).value(), cross_entropy(logits, labels).value());
}

TEST(LossTest, DecreasesOnFixedSyntheticBatch) {
  auto cfg = tiny_config();
  cfg.num_classes = 4;
  SynthSpec spec;
  spec.seed = 3;
  spec.num_classes = 4;
  spec.samples_per_class = 2;
  spec.frames = cfg.frames;
  spec.height = cfg.height;
  spec.width = cfg.width;
  const auto clips = synth_dataset(spec);
  const Batch batch = make_batch(clips);
  TscFormer model(cfg);
  std::vector<Tensor> velocity;
  std::vector<double> losses;
  for (int step = 0; step <= 50; ++step) {
    GradTape tape;
    Var loss;
    {
      GradTape::Scope scope(tape);
      loss = model_loss(model.forward(constant(batch.rgb), constant(batch.event), Mode::kTrain), batch.labels);
    }
    for (Parameter* p : model.parameters()) p->zero_grad();
    tape.backward(loss);
    sgd_step(model.parameters(), 0.01, 0.9, velocity);
    losses.push_back(loss.value().item());
  }
  int decreases = 0;
  for (std::size_t i = 1; i < losses.size(); ++i) decreases += losses[i] < losses[i - 1];
  EXPECT_GE(decreases, 45) << "first " << losses.front() << " last " << losses.back();
}

}  // namespace
}  // namespace tsc
