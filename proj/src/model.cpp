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
#include "tscformer/model.hpp"

#include "tscformer/error.hpp"
#include "tscformer/io.hpp"

namespace tsc {

InputPair parse_input_pair(const std::string& text) {
  if (text == "rgb_event") return InputPair::kRgbEvent;
  if (text == "rgb_rgb") return InputPair::kRgbRgb;
  if (text == "event_event") return InputPair::kEventEvent;
  throw ConfigError("unknown input pair '" + text + "' (expected rgb_event, rgb_rgb or event_event)");
}

const char* input_pair_name(InputPair pair) {
  switch (pair) {
    case InputPair::kRgbRgb:
      return "rgb_rgb";
    case InputPair::kEventEvent:
      return "event_event";
    default:
      return "rgb_event";
  }
}

namespace {

std::size_t halve_up(std::size_t n) { return (n + 1) / 2; }

std::array<std::size_t, 5> extents_after_stages(std::size_t input) {
  std::array<std::size_t, 5> out{};
  out[0] = input / 4;
  out[1] = out[0];
  for (std::size_t i = 2; i < 5; ++i) out[i] = halve_up(out[i - 1]);
  return out;
}

}  // namespace

void TscFormerConfig::validate() const {
  if (frames < 1) throw ConfigError("model: frames must be >= 1");
  if (height < 4 || width < 4 || height % 4 != 0 || width % 4 != 0) {
    throw ConfigError("model: input " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible by 4");
  }
  if (bottleneck_expansion < 1) throw ConfigError("model: bottleneck_expansion must be >= 1");
  for (std::size_t i = 0; i < 4; ++i) {
    if (channels[i] < bottleneck_expansion || channels[i] % bottleneck_expansion != 0) {
      throw ConfigError("model: stage " + std::to_string(i + 1) + " width " + std::to_string(channels[i]) +
                        " is not a positive multiple of bottleneck_expansion " +
                        std::to_string(bottleneck_expansion));
    }
    if (blocks[i] < 1) throw ConfigError("model: stage " + std::to_string(i + 1) + " needs at least one unit");
  }
  if (num_classes < 1) throw ConfigError("model: num_classes must be >= 1");
  if (use_shift) {
    // Stage i shifts its input, which carries channels[max(i - 1, 0)].
    for (std::size_t i = 0; i < 3; ++i) {
      if (shift.divisions < 2 || channels[i] < shift.divisions) {
        throw ConfigError("model: shift divisions " + std::to_string(shift.divisions) + " invalid for " +
                          std::to_string(channels[i]) + " channels");
      }
    }
  }
  bridge.validate();
}

std::array<std::size_t, 5> TscFormerConfig::spatial_heights() const { return extents_after_stages(height); }
std::array<std::size_t, 5> TscFormerConfig::spatial_widths() const { return extents_after_stages(width); }

Stem::Stem(const std::string& name, std::size_t out_channels, Rng& rng)
    : conv(name + ".conv", 3, out_channels, 7, 2, 3, false, rng), bn(name + ".bn", out_channels) {}

Var Stem::operator()(const Var& x, Mode mode) {
  if (x.rank() != 4 || x.dim(1) != 3) throw DimensionError("stem: expected [N, 3, H, W], got " + to_string(x.shape()));
  if (x.dim(2) % 4 != 0 || x.dim(3) % 4 != 0) {
    throw ConfigError("stem: spatial extents " + to_string(x.shape()) + " not divisible by 4");
  }
  return maxpool2d(relu(bn(conv(x), mode)), 3, 2, 1);
}

void Stem::parameters(ParameterRefs& out) {
  conv.parameters(out);
  bn.parameters(out);
}

Bottleneck::Bottleneck(const std::string& name, std::size_t in, std::size_t out, std::size_t stride,
                       std::size_t expansion, Rng& rng) {
  const std::size_t mid = out / expansion;
  conv1 = Conv2d(name + ".conv1", in, mid, 1, 1, 0, false, rng);
  bn1 = BatchNorm2d(name + ".bn1", mid);
  conv2 = Conv2d(name + ".conv2", mid, mid, 3, stride, 1, false, rng);
  bn2 = BatchNorm2d(name + ".bn2", mid);
  conv3 = Conv2d(name + ".conv3", mid, out, 1, 1, 0, false, rng);
  bn3 = BatchNorm2d(name + ".bn3", out);
  project = in != out || stride != 1;
  if (project) {
    proj = Conv2d(name + ".proj", in, out, 1, stride, 0, false, rng);
    proj_bn = BatchNorm2d(name + ".proj_bn", out);
  }
}

Var Bottleneck::operator()(const Var& x, Mode mode) {
  Var h = relu(bn1(conv1(x), mode));
  h = relu(bn2(conv2(h), mode));
  h = bn3(conv3(h), mode);
  const Var shortcut = project ? proj_bn(proj(x), mode) : x;
  return relu(h + shortcut);
}

void Bottleneck::parameters(ParameterRefs& out) {
  conv1.parameters(out);
  bn1.parameters(out);
  conv2.parameters(out);
  bn2.parameters(out);
  conv3.parameters(out);
  bn3.parameters(out);
  if (project) {
    proj.parameters(out);
    proj_bn.parameters(out);
  }
}

void Bottleneck::batchnorms(std::vector<BatchNorm2d*>& out) {
  out.insert(out.end(), {&bn1, &bn2, &bn3});
  if (project) out.push_back(&proj_bn);
}

ResidualStage::ResidualStage(const std::string& name, std::size_t in, std::size_t out, std::size_t stride,
                             std::size_t count, std::size_t expansion, Rng& rng) {
  for (std::size_t u = 0; u < count; ++u) {
    units.emplace_back(name + ".unit" + std::to_string(u), u == 0 ? in : out, out, u == 0 ? stride : 1, expansion,
                       rng);
  }
}

Var ResidualStage::operator()(const Var& x, std::size_t frames, const ShiftConfig* shift, Mode mode) {
  Var h = x;
  if (shift != nullptr) {
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    h = reshape(temporal_shift(reshape(x, {N / frames, frames, C, H, W}), *shift), {N, C, H, W});
  }
  for (auto& unit : units) h = unit(h, mode);
  return h;
}

void ResidualStage::parameters(ParameterRefs& out) {
  for (auto& unit : units) unit.parameters(out);
}

void ResidualStage::batchnorms(std::vector<BatchNorm2d*>& out) {
  for (auto& unit : units) unit.batchnorms(out);
}

Branch::Branch(const std::string& name, const TscFormerConfig& cfg, Rng& rng)
    : stem(name + ".stem", cfg.channels[0], rng) {
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t in = i == 0 ? cfg.channels[0] : cfg.channels[i - 1];
    stages[i] = ResidualStage(name + ".stage" + std::to_string(i + 1), in, cfg.channels[i], i == 0 ? 1 : 2,
                              cfg.blocks[i], cfg.bottleneck_expansion, rng);
  }
}

void Branch::parameters(ParameterRefs& out) {
  stem.parameters(out);
  for (auto& stage : stages) stage.parameters(out);
}

void Branch::batchnorms(std::vector<BatchNorm2d*>& out) {
  stem.batchnorms(out);
  for (auto& stage : stages) stage.batchnorms(out);
}

TscFormer::TscFormer(const TscFormerConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.init_seed);
  rgb_branch = Branch("rgb", cfg_, rng);
  event_branch = Branch("evt", cfg_, rng);
  const BridgeConfig& bc = cfg_.bridge;
  tokens = make_global_tokens(bc.tokens, bc.token_dim, rng);
  const auto hs = cfg_.spatial_heights();
  const auto ws = cfg_.spatial_widths();
  if (bc.active()) {
    for (int b : bc.insertion_blocks) {
      const std::size_t i = static_cast<std::size_t>(b);
      const std::size_t C = cfg_.channels[i - 1];
      const std::string suffix = std::to_string(b);
      bridges.emplace(b, BridgeFormer("bridge" + suffix, C, bc, rng));
      to_rgb.emplace(b, FeatureInjector("f2v" + suffix, bc.tokens, bc.token_dim, cfg_.frames, C, hs[i], ws[i],
                                        cfg_.fusion, rng));
      to_event.emplace(b, FeatureInjector("f2e" + suffix, bc.tokens, bc.token_dim, cfg_.frames, C, hs[i], ws[i],
                                          cfg_.fusion, rng));
    }
  }
  head = Linear("head", 2 * cfg_.channels[3] + bc.tokens * bc.token_dim, cfg_.num_classes, rng);

  rgb_branch.parameters(params_);
  event_branch.parameters(params_);
  params_.push_back(&tokens);
  for (auto& [b, bridge] : bridges) {
    bridge.parameters(params_);
    to_rgb.at(b).parameters(params_);
    to_event.at(b).parameters(params_);
  }
  head.parameters(params_);

  rgb_branch.batchnorms(bns_);
  event_branch.batchnorms(bns_);
  for (const BatchNorm2d* bn : bns_) bn_names_.push_back(bn->name);
}

Var TscFormer::forward(const Var& rgb, const Var& event, Mode mode, std::vector<BlockFeatures>* blocks) {
  if (rgb.rank() != 5 || rgb.shape() != event.shape()) {
    throw DimensionError("model: expected matching [B, T, 3, H, W] clips, got " + to_string(rgb.shape()) + " and " +
                         to_string(event.shape()));
  }
  const std::size_t B = rgb.dim(0), T = rgb.dim(1);
  if (T != cfg_.frames || rgb.dim(2) != 3 || rgb.dim(3) != cfg_.height || rgb.dim(4) != cfg_.width) {
    throw DimensionError("model: clip " + to_string(rgb.shape()) + " does not match config [B x " +
                         std::to_string(cfg_.frames) + "x3x" + std::to_string(cfg_.height) + "x" +
                         std::to_string(cfg_.width) + "]");
  }
  const Var& first = cfg_.inputs == InputPair::kEventEvent ? event : rgb;
  const Var& second = cfg_.inputs == InputPair::kRgbRgb ? rgb : event;
  const Shape frame_shape{B * T, 3, cfg_.height, cfg_.width};
  Var fi = rgb_branch.stem(reshape(first, frame_shape), mode);
  Var fe = event_branch.stem(reshape(second, frame_shape), mode);
  Var z = broadcast_tokens(tokens, B);
  const ShiftConfig* shift = cfg_.use_shift ? &cfg_.shift : nullptr;
  if (blocks != nullptr) blocks->clear();

  for (int b = 1; b <= 4; ++b) {
    const std::size_t i = static_cast<std::size_t>(b) - 1;
    fi = rgb_branch.stages[i](fi, T, shift, mode);
    fe = event_branch.stages[i](fe, T, shift, mode);
    const auto it = bridges.find(b);
    if (it == bridges.end() && blocks == nullptr) continue;
    const std::size_t C = fi.dim(1), H = fi.dim(2), W = fi.dim(3);
    const Shape clip_shape{B, T, C, H, W};
    Var vi = reshape(fi, clip_shape);
    Var ve = reshape(fe, clip_shape);
    if (it != bridges.end()) {
      z = it->second(z, vi, ve);
      vi = to_rgb.at(b)(vi, z);
      ve = to_event.at(b)(ve, z);
      fi = reshape(vi, {B * T, C, H, W});
      fe = reshape(ve, {B * T, C, H, W});
    }
    if (blocks != nullptr) blocks->push_back({vi, ve, z});
  }

  const std::size_t C = fi.dim(1);
  const Var pooled_i = mean_axis(reshape(global_avgpool(fi), {B, T, C}), 1);
  const Var pooled_e = mean_axis(reshape(global_avgpool(fe), {B, T, C}), 1);
  const Var flat_z = reshape(z, {B, z.dim(1) * z.dim(2)});
  return head(concat({pooled_i, pooled_e, flat_z}, 1));
}

Var model_loss(const Var& logits, std::span<const int> labels) { return cross_entropy(logits, labels); }

std::string parameter_group(const std::string& name) {
  const auto leaf = name.rfind('.');
  if (leaf == std::string::npos) return name;
  const std::string owner = name.substr(0, leaf);
  const auto first = owner.find('.');
  if (first == std::string::npos) return owner;
  const auto second = owner.find('.', first + 1);
  return second == std::string::npos ? owner : owner.substr(0, second);
}

std::map<std::string, std::size_t> parameter_counts_by_group(const ParameterRefs& params) {
  std::map<std::string, std::size_t> out;
  for (const Parameter* p : params) out[parameter_group(p->name)] += p->value().size();
  return out;
}

std::size_t bridge_parameter_count(TscFormer& model) {
  ParameterRefs refs;
  for (auto& [b, bridge] : model.bridges) bridge.parameters(refs);
  return count_parameters(refs);
}

std::size_t fusion_parameter_count(TscFormer& model) {
  ParameterRefs refs;
  for (auto& [b, inj] : model.to_rgb) inj.parameters(refs);
  for (auto& [b, inj] : model.to_event) inj.parameters(refs);
  return count_parameters(refs);
}

void save_checkpoint(const std::filesystem::path& path, const TscFormer& model, const std::string& config_text) {
  Archive archive;
  archive.text = config_text;
  for (const Parameter* p : model.parameters()) archive.entries.emplace(p->name, p->value());
  for (const BatchNorm2d* bn : model.batchnorms()) {
    archive.entries.emplace(bn->name + ".running_mean", bn->state.running_mean);
    archive.entries.emplace(bn->name + ".running_var", bn->state.running_var);
    archive.entries.emplace(bn->name + ".initialized", Tensor::scalar(bn->state.initialized ? 1.0 : 0.0));
  }
  write_archive(path, archive);
}

namespace {

const Tensor& checked_entry(const Archive& archive, const std::string& name, const Shape& expected) {
  const auto it = archive.entries.find(name);
  if (it == archive.entries.end()) throw ValidationError("checkpoint: missing entry '" + name + "'");
  if (it->second.shape() != expected) {
    throw ValidationError("checkpoint: entry '" + name + "' has shape " + to_string(it->second.shape()) +
                          ", config expects " + to_string(expected));
  }
  return it->second;
}

}  // namespace

void load_checkpoint(const std::filesystem::path& path, TscFormer& model) {
  const Archive archive = read_archive(path);
  // Validate everything before mutating the model.
  for (const Parameter* p : model.parameters()) checked_entry(archive, p->name, p->value().shape());
  for (const BatchNorm2d* bn : model.batchnorms()) {
    const Shape c{bn->gamma.value().size()};
    checked_entry(archive, bn->name + ".running_mean", c);
    checked_entry(archive, bn->name + ".running_var", c);
    checked_entry(archive, bn->name + ".initialized", {1});
  }
  for (Parameter* p : model.parameters()) p->mutable_value() = archive.at(p->name);
  for (BatchNorm2d* bn : model.batchnorms()) {
    bn->state.running_mean = archive.at(bn->name + ".running_mean");
    bn->state.running_var = archive.at(bn->name + ".running_var");
    bn->state.initialized = archive.at(bn->name + ".initialized").item() != 0.0;
  }
}

std::string read_checkpoint_config(const std::filesystem::path& path) { return read_archive(path).text; }

}  // namespace tsc
