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
#include "tscformer/bridgeformer.hpp"

#include <cmath>

#include "tscformer/error.hpp"

namespace tsc {

void BridgeConfig::validate() const {
  if (tokens < 1) throw ConfigError("bridge: token count must be >= 1");
  if (token_dim < 1) throw ConfigError("bridge: token dimension must be >= 1");
  if (depth < 1) throw ConfigError("bridge: depth must be >= 1");
  if (heads < 1 || token_dim % heads != 0) {
    throw ConfigError("bridge: token dimension " + std::to_string(token_dim) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (ffn_expansion < 1) throw ConfigError("bridge: ffn expansion must be >= 1");
  for (int b : insertion_blocks) {
    if (b < 1 || b > 4) throw ConfigError("bridge: insertion block " + std::to_string(b) + " outside 1..4");
  }
}

Parameter make_global_tokens(std::size_t tokens, std::size_t dim, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 0.02);
  Tensor z({1, tokens, dim});
  for (auto& v : z.values()) v = dist(rng);
  return Parameter("tokens", std::move(z));
}

Var broadcast_tokens(const Parameter& tokens, std::size_t batch) {
  if (batch == 1) return tokens.var;
  return concat(std::vector<Var>(batch, tokens.var), 0);
}

namespace {

// [B, L, D] -> [B, h, L, D/h]
Var split_heads(const Var& x, std::size_t heads) {
  const std::size_t B = x.dim(0), L = x.dim(1), D = x.dim(2);
  if (heads == 1) return reshape(x, {B, 1, L, D});
  return permute(reshape(x, {B, L, heads, D / heads}), {0, 2, 1, 3});
}

Var merge_heads(const Var& x) {
  const std::size_t B = x.dim(0), h = x.dim(1), L = x.dim(2), dh = x.dim(3);
  if (h == 1) return reshape(x, {B, L, dh});
  return reshape(permute(x, {0, 2, 1, 3}), {B, L, h * dh});
}

void check_attention_shapes(const Var& q, const Var& k, std::size_t heads) {
  if (q.rank() != 3 || k.rank() != 3) {
    throw DimensionError("attention: expected [B, L, D] operands, got " + to_string(q.shape()) + " and " +
                         to_string(k.shape()));
  }
  if (q.dim(0) != k.dim(0) || q.dim(2) != k.dim(2)) {
    throw DimensionError("attention: query " + to_string(q.shape()) + " does not match key " + to_string(k.shape()));
  }
  if (heads < 1 || q.dim(2) % heads != 0) {
    throw ConfigError("attention: dimension " + std::to_string(q.dim(2)) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
}

}  // namespace

Var attention_weights(const Var& q, const Var& k, std::size_t heads, double factor) {
  check_attention_shapes(q, k, heads);
  if (factor == 0.0) factor = 1.0 / std::sqrt(static_cast<double>(q.dim(2)));
  const Var logits = scale(matmul(split_heads(q, heads), permute(split_heads(k, heads), {0, 1, 3, 2})), factor);
  return softmax(logits, 3);
}

Var multi_head_attention(const Var& q, const Var& k, const Var& v, std::size_t heads, double factor) {
  if (v.rank() != 3 || v.dim(0) != k.dim(0) || v.dim(1) != k.dim(1) || v.dim(2) != k.dim(2)) {
    throw DimensionError("attention: value " + to_string(v.shape()) + " does not match key " + to_string(k.shape()));
  }
  const Var weights = attention_weights(q, k, heads, factor);
  return merge_heads(matmul(weights, split_heads(v, heads)));
}

Tensor sinusoidal_encoding(std::size_t count, std::size_t dim) {
  Tensor pe({count, dim});
  for (std::size_t n = 0; n < count; ++n) {
    for (std::size_t d = 0; d < dim; ++d) {
      const double freq = std::pow(10000.0, -static_cast<double>(d - d % 2) / static_cast<double>(dim));
      const double angle = static_cast<double>(n) * freq;
      pe[n * dim + d] = d % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

KvProjection::KvProjection(const std::string& name, std::size_t channels, std::size_t dim, Rng& rng)
    : conv(name + ".proj", 2 * channels, dim, 1, 1, 0, true, rng) {}

Var KvProjection::operator()(const Var& feat_rgb, const Var& feat_evt) const {
  if (feat_rgb.rank() != 5 || feat_rgb.shape() != feat_evt.shape()) {
    throw DimensionError("kv projection: expected matching [B, T, C, H, W] maps, got " + to_string(feat_rgb.shape()) +
                         " and " + to_string(feat_evt.shape()));
  }
  const std::size_t B = feat_rgb.dim(0), T = feat_rgb.dim(1), C = feat_rgb.dim(2);
  const std::size_t H = feat_rgb.dim(3), W = feat_rgb.dim(4);
  if (2 * C != conv.weight.value().dim(1)) {
    throw DimensionError("kv projection: expected " + std::to_string(conv.weight.value().dim(1) / 2) +
                         " channels per modality, got " + std::to_string(C));
  }
  const Var joint = reshape(concat({feat_rgb, feat_evt}, 2), {B * T, 2 * C, H, W});
  const Var proj = conv(joint);
  const std::size_t D = proj.dim(1);
  return reshape(permute(reshape(proj, {B, T, D, H * W}), {0, 1, 3, 2}), {B, T * H * W, D});
}

CrossAttention::CrossAttention(const std::string& name, std::size_t dim, std::size_t heads, Rng& rng)
    : q(name + ".q", dim, dim, rng),
      k(name + ".k", dim, dim, rng, false),
      v(name + ".v", dim, dim, rng),
      o(name + ".o", dim, dim, rng),
      heads(heads) {}

Var CrossAttention::operator()(const Var& queries, const Var& kv) const {
  return o(multi_head_attention(q(queries), k(kv), v(kv), heads));
}

void CrossAttention::parameters(ParameterRefs& out) {
  q.parameters(out);
  k.parameters(out);
  v.parameters(out);
  o.parameters(out);
}

SelfAttention::SelfAttention(const std::string& name, std::size_t dim, std::size_t heads, Rng& rng)
    : norm(name + ".norm", dim),
      q(name + ".q", dim, dim, rng),
      k(name + ".k", dim, dim, rng, false),
      v(name + ".v", dim, dim, rng),
      o(name + ".o", dim, dim, rng),
      heads(heads) {}

Var SelfAttention::operator()(const Var& x) const {
  const Var h = norm(x);
  return x + o(multi_head_attention(q(h), k(h), v(h), heads));
}

void SelfAttention::parameters(ParameterRefs& out) {
  norm.parameters(out);
  q.parameters(out);
  k.parameters(out);
  v.parameters(out);
  o.parameters(out);
}

FeedForward::FeedForward(const std::string& name, std::size_t dim, std::size_t expansion, Rng& rng)
    : norm(name + ".norm", dim), up(name + ".up", dim, dim * expansion, rng), down(name + ".down", dim * expansion, dim, rng) {}

Var FeedForward::operator()(const Var& x) const { return x + down(gelu(up(norm(x)))); }

void FeedForward::parameters(ParameterRefs& out) {
  norm.parameters(out);
  up.parameters(out);
  down.parameters(out);
}

BridgeLayer::BridgeLayer(const std::string& name, const BridgeConfig& cfg, Rng& rng)
    : use_cross(cfg.use_cross_attention), use_former(cfg.use_former) {
  if (use_cross) cross = CrossAttention(name + ".cross", cfg.token_dim, cfg.heads, rng);
  if (use_former) {
    self = SelfAttention(name + ".attn", cfg.token_dim, cfg.heads, rng);
    ffn = FeedForward(name + ".ffn", cfg.token_dim, cfg.ffn_expansion, rng);
  }
}

Var BridgeLayer::operator()(const Var& tokens, const Var& kv) const {
  Var z = use_cross ? cross(tokens, kv) : tokens;
  if (use_former) z = ffn(self(z));
  return z;
}

void BridgeLayer::parameters(ParameterRefs& out) {
  if (use_cross) cross.parameters(out);
  if (use_former) {
    self.parameters(out);
    ffn.parameters(out);
  }
}

BridgeFormer::BridgeFormer(const std::string& name, std::size_t channels, const BridgeConfig& cfg, Rng& rng)
    : use_cross(cfg.use_cross_attention), positional(cfg.positional_encoding) {
  cfg.validate();
  if (use_cross) kv = KvProjection(name + ".kv", channels, cfg.token_dim, rng);
  for (std::size_t j = 0; j < cfg.depth; ++j) layers.emplace_back(name + ".layer" + std::to_string(j), cfg, rng);
}

Var BridgeFormer::operator()(const Var& tokens, const Var& feat_rgb, const Var& feat_evt) const {
  Var memory;
  if (use_cross) {
    memory = kv(feat_rgb, feat_evt);
    if (positional) {
      const std::size_t B = memory.dim(0), N = memory.dim(1), D = memory.dim(2);
      const Tensor pe = sinusoidal_encoding(N, D);
      Tensor tiled({B, N, D});
      for (std::size_t b = 0; b < B; ++b) std::copy(pe.data(), pe.data() + N * D, tiled.data() + b * N * D);
      memory = memory + constant(std::move(tiled));
    }
  }
  Var z = tokens;
  for (const auto& layer : layers) z = layer(z, memory);
  return z;
}

void BridgeFormer::parameters(ParameterRefs& out) {
  if (use_cross) kv.parameters(out);
  for (auto& layer : layers) layer.parameters(out);
}

}  // namespace tsc
