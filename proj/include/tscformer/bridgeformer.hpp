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
#ifndef TSCFORMER_BRIDGEFORMER_HPP_
#define TSCFORMER_BRIDGEFORMER_HPP_

#include <set>
#include <string>
#include <vector>

#include "tscformer/layers.hpp"

namespace tsc {

struct BridgeConfig {
  std::size_t tokens = 3;       // L
  std::size_t token_dim = 64;   // D
  std::size_t depth = 1;
  std::size_t heads = 4;
  std::size_t ffn_expansion = 4;
  std::set<int> insertion_blocks{1, 2, 3, 4};
  bool use_cross_attention = true;  // the bridge into CNN features
  bool use_former = true;           // MHSA + FFN on the tokens
  bool positional_encoding = false; // sinusoidal code added to key/value tokens

  void validate() const;
  // Any token processing happens at all.
  bool active() const { return !insertion_blocks.empty() && (use_cross_attention || use_former); }
};

// Global token values Z[1, L, D] ~ Normal(0, 0.02), replicated over the batch
// at forward time.
Parameter make_global_tokens(std::size_t tokens, std::size_t dim, Rng& rng);
Var broadcast_tokens(const Parameter& tokens, std::size_t batch);

// softmax(q k^T * scale) v per head. q[B, L, D], k and v [B, N, D]; heads
// split D evenly. scale defaults to 1/sqrt(D).
Var multi_head_attention(const Var& q, const Var& k, const Var& v, std::size_t heads, double scale = 0.0);

// Attention weights [B, heads, L, N] of the computation above.
Var attention_weights(const Var& q, const Var& k, std::size_t heads, double scale = 0.0);

// Channel-concatenates two [B, T, C, H, W] feature maps, projects 2C -> D
// with a 1x1 convolution and flattens T, H, W into a token axis:
// [B, T*H*W, D], frame-major.
class KvProjection {
 public:
  KvProjection() = default;
  KvProjection(const std::string& name, std::size_t channels, std::size_t dim, Rng& rng);

  Var operator()(const Var& feat_rgb, const Var& feat_evt) const;
  void parameters(ParameterRefs& out) { conv.parameters(out); }

  Conv2d conv;
};

// Global tokens query the key/value tokens; output projection, no residual.
// The key projection has no bias: softmax would cancel it.
class CrossAttention {
 public:
  CrossAttention() = default;
  CrossAttention(const std::string& name, std::size_t dim, std::size_t heads, Rng& rng);

  Var operator()(const Var& queries, const Var& kv) const;
  void parameters(ParameterRefs& out);

  Linear q, k, v, o;
  std::size_t heads = 1;
};

// Pre-norm residual self-attention: x + o(attn(LN(x))). Bias-free keys.
class SelfAttention {
 public:
  SelfAttention() = default;
  SelfAttention(const std::string& name, std::size_t dim, std::size_t heads, Rng& rng);

  Var operator()(const Var& x) const;
  void parameters(ParameterRefs& out);

  LayerNorm norm;
  Linear q, k, v, o;
  std::size_t heads = 1;
};

// Pre-norm residual MLP: x + W2 gelu(W1 LN(x)).
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(const std::string& name, std::size_t dim, std::size_t expansion, Rng& rng);

  Var operator()(const Var& x) const;
  void parameters(ParameterRefs& out);

  LayerNorm norm;
  Linear up, down;
};

// One depth unit: cross-attention, then MHSA, then FFN, each stage optional
// per BridgeConfig.
class BridgeLayer {
 public:
  BridgeLayer() = default;
  BridgeLayer(const std::string& name, const BridgeConfig& cfg, Rng& rng);

  Var operator()(const Var& tokens, const Var& kv) const;
  void parameters(ParameterRefs& out);

  bool use_cross = true;
  bool use_former = true;
  CrossAttention cross;
  SelfAttention self;
  FeedForward ffn;
};

// The bridge attached to one CNN block.
class BridgeFormer {
 public:
  BridgeFormer() = default;
  BridgeFormer(const std::string& name, std::size_t channels, const BridgeConfig& cfg, Rng& rng);

  // Z'[B, L, D] from Z[B, L, D] and the two [B, T, C, H, W] feature maps.
  Var operator()(const Var& tokens, const Var& feat_rgb, const Var& feat_evt) const;
  void parameters(ParameterRefs& out);

  bool use_cross = true;
  bool positional = false;
  KvProjection kv;
  std::vector<BridgeLayer> layers;
};

// Fixed sinusoidal code [N, D] (sin on even, cos on odd dims).
Tensor sinusoidal_encoding(std::size_t count, std::size_t dim);

}  // namespace tsc

#endif  // TSCFORMER_BRIDGEFORMER_HPP_
