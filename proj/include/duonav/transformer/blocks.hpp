/*
 * Copyright 2026 The duonav Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DUONAV_TRANSFORMER_BLOCKS_HPP
#define DUONAV_TRANSFORMER_BLOCKS_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "duonav/transformer/layers.hpp"

namespace duonav::transformer {

/// Widths and depths of the four stacks.
struct AttentionConfig {
  int width = 64;
  int heads = 4;
  int ffn_multiplier = 4;
  int language_encoder_depth = 9;
  int route_encoder_depth = 1;
  int language_decoder_depth = 4;
  int route_decoder_depth = 4;

  void validate() const {
    if (width < 2) throw std::invalid_argument("attention width must be >= 2");
    if (heads < 1 || width % heads != 0) throw std::invalid_argument("width must be divisible by heads");
    if (ffn_multiplier < 1) throw std::invalid_argument("ffn multiplier must be >= 1");
    if (language_encoder_depth < 1 || route_encoder_depth < 1 || language_decoder_depth < 1 ||
        route_decoder_depth < 1)
      throw std::invalid_argument("stack depths must be >= 1");
  }
};

/// Pre-norm residual self-attention: x + MHA(LN(x), LN(x)).
template <typename Scalar>
class SelfAttention {
 public:
  SelfAttention() = default;
  SelfAttention(ParameterStore<Scalar>& store, const std::string& name, Index width, int heads, int group, Rng& rng)
      : norm_(store, name + ".norm", width, group), attn_(store, name + ".attn", width, heads, group, rng) {}

  Tensor<Scalar> operator()(Tape<Scalar>& tape, const Tensor<Scalar>& x, const Mask* mask = nullptr,
                            diffcore::AttentionWeights<Scalar>* weights = nullptr) const {
    if (x.rows() == 0) throw diffcore::DimensionError("self attention over an empty sequence");
    Tensor<Scalar> h = norm_(tape, x);
    return diffcore::add(x, attn_(tape, h, h, mask, weights));
  }

  const MultiHeadAttention<Scalar>& attention() const { return attn_; }

 private:
  LayerNorm<Scalar> norm_;
  MultiHeadAttention<Scalar> attn_;
};

/// Pre-norm residual cross-attention: x + MHA(LN(x), context).
template <typename Scalar>
class CrossAttention {
 public:
  CrossAttention() = default;
  CrossAttention(ParameterStore<Scalar>& store, const std::string& name, Index width, int heads, int group, Rng& rng)
      : norm_(store, name + ".norm", width, group), attn_(store, name + ".attn", width, heads, group, rng) {}

  Tensor<Scalar> operator()(Tape<Scalar>& tape, const Tensor<Scalar>& query, const Tensor<Scalar>& context,
                            diffcore::AttentionWeights<Scalar>* weights = nullptr) const {
    if (context.rows() == 0) throw diffcore::DimensionError("cross attention over an empty context");
    return diffcore::add(query, attn_(tape, norm_(tape, query), context, nullptr, weights));
  }

  const MultiHeadAttention<Scalar>& attention() const { return attn_; }

 private:
  LayerNorm<Scalar> norm_;
  MultiHeadAttention<Scalar> attn_;
};

/// Pre-norm residual feed-forward: x + W2 gelu(W1 LN(x)).
template <typename Scalar>
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(ParameterStore<Scalar>& store, const std::string& name, Index width, int multiplier, int group,
              Rng& rng)
      : norm_(store, name + ".norm", width, group),
        expand_(store, name + ".expand", width, width * multiplier, group, rng),
        contract_(store, name + ".contract", width * multiplier, width, group, rng) {}

  Tensor<Scalar> operator()(Tape<Scalar>& tape, const Tensor<Scalar>& x) const {
    return diffcore::add(x, contract_(tape, diffcore::gelu(expand_(tape, norm_(tape, x)))));
  }

 private:
  LayerNorm<Scalar> norm_;
  Linear<Scalar> expand_;
  Linear<Scalar> contract_;
};

/// Self-attention restricted by a lower-triangular mask.
template <typename Scalar>
Tensor<Scalar> causal_self_attention(const SelfAttention<Scalar>& layer, Tape<Scalar>& tape,
                                     const Tensor<Scalar>& x) {
  if (x.rows() == 0) throw diffcore::DimensionError("self attention over an empty sequence");
  Mask mask = diffcore::causal_mask(x.rows());
  return layer(tape, x, &mask);
}

enum class StackKind { LanguageEncoder, RouteEncoder, LanguageDecoder, RouteDecoder };

inline const char* stack_name(StackKind kind) {
  switch (kind) {
    case StackKind::LanguageEncoder: return "language_encoder";
    case StackKind::RouteEncoder: return "route_encoder";
    case StackKind::LanguageDecoder: return "language_decoder";
    case StackKind::RouteDecoder: return "route_decoder";
  }
  return "?";
}

/// One of the four block stacks:
///   language encoder  [self_att; feedforward] x depth
///   route encoder     cross_att (route-state compression), then [self_att; feedforward] x depth
///   decoders          [cross_att; self_att; feedforward] x depth (language decoder self_att is causal)
/// Every stack ends with a layer norm and maps [n, d] queries to [n, d].
template <typename Scalar>
class BlockStack {
 public:
  BlockStack() = default;
  BlockStack(ParameterStore<Scalar>& store, StackKind kind, const AttentionConfig& cfg, int group, Rng& rng)
      : kind_(kind) {
    cfg.validate();
    const std::string base = stack_name(kind);
    depth_ = depth_for(kind, cfg);
    if (kind == StackKind::RouteEncoder) compress_ = CrossAttention<Scalar>(store, base + ".compress", cfg.width, cfg.heads, group, rng);
    for (int i = 0; i < depth_; ++i) {
      const std::string prefix = base + ".block" + std::to_string(i);
      Block b;
      if (is_decoder())
        b.cross = CrossAttention<Scalar>(store, prefix + ".cross", cfg.width, cfg.heads, group, rng);
      b.self = SelfAttention<Scalar>(store, prefix + ".self", cfg.width, cfg.heads, group, rng);
      b.ffn = FeedForward<Scalar>(store, prefix + ".ffn", cfg.width, cfg.ffn_multiplier, group, rng);
      blocks_.push_back(std::move(b));
    }
    final_norm_ = LayerNorm<Scalar>(store, base + ".final_norm", cfg.width, group);
  }

  static int depth_for(StackKind kind, const AttentionConfig& cfg) {
    switch (kind) {
      case StackKind::LanguageEncoder: return cfg.language_encoder_depth;
      case StackKind::RouteEncoder: return cfg.route_encoder_depth;
      case StackKind::LanguageDecoder: return cfg.language_decoder_depth;
      case StackKind::RouteDecoder: return cfg.route_decoder_depth;
    }
    return 0;
  }

  StackKind kind() const { return kind_; }
  int depth() const { return depth_; }
  bool is_decoder() const { return kind_ == StackKind::LanguageDecoder || kind_ == StackKind::RouteDecoder; }

  /// Runs the stack on `x`. Decoders require `context`; encoders reject it
  /// (the route encoder consumes its cross-attention through compress()).
  /// `causal` masks the self-attention; the language decoder is always causal.
  Tensor<Scalar> operator()(Tape<Scalar>& tape, const Tensor<Scalar>& x, const Tensor<Scalar>* context = nullptr,
                            bool causal = false) const {
    if (x.rows() == 0) throw diffcore::DimensionError(std::string(stack_name(kind_)) + ": empty input");
    if (is_decoder() && !context) throw std::invalid_argument(std::string(stack_name(kind_)) + " needs a context");
    if (!is_decoder() && context) throw std::invalid_argument(std::string(stack_name(kind_)) + " takes no context");
    const bool masked = causal || kind_ == StackKind::LanguageDecoder;
    Mask mask;
    if (masked) mask = diffcore::causal_mask(x.rows());
    Tensor<Scalar> h = x;
    for (const Block& b : blocks_) {
      if (is_decoder()) h = b.cross(tape, h, *context);
      h = b.self(tape, h, masked ? &mask : nullptr);
      h = b.ffn(tape, h);
    }
    return final_norm_(tape, h);
  }

  /// Route-state compression r = a + cross_att(a, O); only on the route encoder.
  Tensor<Scalar> compress(Tape<Scalar>& tape, const Tensor<Scalar>& action, const Tensor<Scalar>& observations,
                          diffcore::AttentionWeights<Scalar>* weights = nullptr) const {
    if (kind_ != StackKind::RouteEncoder) throw std::logic_error("compress() is specific to the route encoder");
    return compress_(tape, action, observations, weights);
  }

  const CrossAttention<Scalar>& compression_layer() const { return compress_; }

 private:
  struct Block {
    CrossAttention<Scalar> cross;
    SelfAttention<Scalar> self;
    FeedForward<Scalar> ffn;
  };

  StackKind kind_ = StackKind::LanguageEncoder;
  int depth_ = 0;
  CrossAttention<Scalar> compress_;
  std::vector<Block> blocks_;
  LayerNorm<Scalar> final_norm_;
};

}  // namespace duonav::transformer

#endif  // DUONAV_TRANSFORMER_BLOCKS_HPP
