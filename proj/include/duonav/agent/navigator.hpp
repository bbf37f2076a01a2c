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

#ifndef DUONAV_AGENT_NAVIGATOR_HPP
#define DUONAV_AGENT_NAVIGATOR_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "duonav/agent/types.hpp"
#include "duonav/real.hpp"
#include "duonav/transformer/blocks.hpp"

namespace duonav::agent {

using Tape = diffcore::Tape<Real>;
using Tensor = diffcore::Tensor<Real>;
using ParamStore = diffcore::ParameterStore<Real>;
using Param = diffcore::Parameter<Real>;

/// Parameter groups; an optimizer step for a task only touches the groups
/// that task trains.
enum ParamGroup : int {
  kRouteEncoderGroup = 0,
  kLanguageEncoderGroup = 1,
  kRouteDecoderGroup = 2,
  kLanguageDecoderGroup = 3,
  kMatchingGroup = 4,
};

const char* group_name(int group);

struct ModelConfig {
  transformer::AttentionConfig attention;
  int visual_dim = 32;
  int views = 8;
  /// Rows of the temporal embedding; step indices must stay below it.
  int horizon = 16;
  /// Rows of the word-position embedding.
  int max_text_length = 128;
  int vocab_size = 0;
  /// Steps before STOP becomes a legal decision.
  int min_steps = 0;

  void validate() const;
};

enum class LanguageMode { Bidirectional, Causal };

/// Environment surface the navigator needs at inference time.
class PanoramaSource {
 public:
  virtual ~PanoramaSource() = default;
  virtual Panorama panorama(int node) const = 0;
  /// Node reached by taking `view` at `node`; throws ActionError if not navigable.
  virtual int step(int node, int view) const = 0;
};

struct FollowResult {
  Route route;
  std::vector<int> nodes;
  std::vector<Distribution> decisions;
  bool stopped = false;
  bool truncated = false;
};

/// Per-step greedy decoding record of generate_instruction().
struct GenerationTrace {
  std::vector<Distribution> steps;
};

/// Single parameter set serving instruction following (route decoder) and
/// instruction generation (language decoder) over shared route and language
/// encoders.
class Navigator {
 public:
  Navigator(const ModelConfig& config, std::uint64_t seed);
  Navigator(const Navigator&) = delete;
  Navigator& operator=(const Navigator&) = delete;

  const ModelConfig& config() const { return config_; }
  ParamStore& parameters() { return store_; }
  const ParamStore& parameters() const { return store_; }
  int width() const { return config_.attention.width; }
  int stop_index() const { return config_.views; }

  // -- token construction ----------------------------------------------------

  /// o_{t,k} = Fv(v) + Ftheta(theta) + tau_t + tau_O for every view; [K, d].
  Tensor observation_tokens(Tape& tape, const Panorama& pano, int step) const;
  /// a_t = Fv(v_a) + Ftheta(theta_a) + tau_t + tau_A; [1, d].
  Tensor action_token(Tape& tape, const Panorama& pano, int action, int step) const;
  /// r_t = a_t + cross_att(a_t, O_t); [1, d].
  Tensor compress_route_state(Tape& tape, const Tensor& action_token, const Tensor& observations) const;
  /// r_1 .. r_n for the first `count` steps of a route; [count, d].
  Tensor route_states(Tape& tape, const Route& route, int count) const;

  // -- encoders --------------------------------------------------------------

  /// Following mode: self_att([r_1 .. r_{t-1}, O_t]) where `history` holds the
  /// t-1 completed steps and `current` is O_t; [t-1+K, d].
  Tensor encode_route_following(Tape& tape, const Route& history, const Panorama& current) const;
  /// Same, from precomputed route states (nullptr when t = 1).
  Tensor encode_route_following(Tape& tape, const Tensor* history_states, const Panorama& current,
                                int step) const;
  /// Generation mode: self_att([r_1 .. r_T]); [T, d].
  Tensor encode_route_generation(Tape& tape, const Route& route) const;
  /// Token ids starting at position `first_position`; [len, d].
  Tensor encode_language(Tape& tape, std::span<const int> tokens, int first_position, LanguageMode mode) const;
  /// Instruction-following input x_1 .. x_L.
  Tensor encode_instruction(Tape& tape, const Instruction& ins) const;

  // -- decoders and heads ----------------------------------------------------

  /// Masked logits over the K views and STOP; [1, K+1]. `mask_out` receives
  /// the legality mask used for the softmax.
  Tensor action_logits(Tape& tape, const Tensor& route_encoding, const Tensor& language_encoding,
                       const Panorama& current, int step, diffcore::Mask* mask_out) const;
  Distribution decode_action(Tape& tape, const Tensor& route_encoding, const Tensor& language_encoding,
                             const Panorama& current, int step) const;
  /// Word logits for each row of the language prefix; [n, vocab].
  Tensor word_logits(Tape& tape, const Tensor& language_prefix, const Tensor& route_encoding) const;
  /// q_l from the last row of the prefix encoding.
  Distribution decode_word(Tape& tape, const Tensor& language_prefix, const Tensor& route_encoding) const;
  /// Alignment logit from mean-pooled route and instruction encodings; [1, 1].
  Tensor matching_logit(Tape& tape, const Tensor& route_encoding, const Tensor& language_encoding) const;
  double itm_score(const Instruction& ins, const Route& route) const;

  // -- inference loops -------------------------------------------------------

  FollowResult follow_instruction(const Instruction& ins, const PanoramaSource& env, int start_node,
                                  int max_steps) const;
  Instruction generate_instruction(const Route& route, int max_len, GenerationTrace* trace = nullptr) const;

  // -- named submodules, for tests and inspection ----------------------------

  const transformer::BlockStack<Real>& route_encoder() const { return route_encoder_; }
  const transformer::BlockStack<Real>& language_encoder() const { return language_encoder_; }
  const transformer::BlockStack<Real>& route_decoder() const { return route_decoder_; }
  const transformer::BlockStack<Real>& language_decoder() const { return language_decoder_; }
  const transformer::TwoLayerHead<Real>& action_head() const { return action_head_; }
  const transformer::TwoLayerHead<Real>& word_head() const { return word_head_; }
  const transformer::TwoLayerHead<Real>& matching_head() const { return matching_head_; }
  Param& visual_projection_weight() const { return visual_proj_.weight(); }
  Param& stop_embedding() const { return *stop_; }
  Param& temporal_embedding() const { return *temporal_; }
  Param& observation_type() const { return *type_obs_; }
  Param& action_type() const { return *type_act_; }

 private:
  Tensor view_features(Tape& tape, const Panorama& pano) const;
  Tensor step_embedding(Tape& tape, int step) const;

  ModelConfig config_;
  ParamStore store_;
  transformer::Linear<Real> visual_proj_;
  transformer::Linear<Real> orientation_proj_;
  Param* temporal_ = nullptr;
  Param* type_obs_ = nullptr;
  Param* type_act_ = nullptr;
  Param* word_embedding_ = nullptr;
  Param* position_embedding_ = nullptr;
  Param* stop_ = nullptr;
  transformer::BlockStack<Real> route_encoder_;
  transformer::BlockStack<Real> language_encoder_;
  transformer::BlockStack<Real> route_decoder_;
  transformer::BlockStack<Real> language_decoder_;
  transformer::TwoLayerHead<Real> action_head_;
  transformer::TwoLayerHead<Real> word_head_;
  transformer::TwoLayerHead<Real> matching_head_;
};

}  // namespace duonav::agent

#endif  // DUONAV_AGENT_NAVIGATOR_HPP
