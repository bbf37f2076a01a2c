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

#include "duonav/agent/navigator.hpp"

#include <numeric>

namespace duonav::agent {

using diffcore::Matrix;
using transformer::StackKind;

const char* group_name(int group) {
  switch (group) {
    case kRouteEncoderGroup: return "route_encoder";
    case kLanguageEncoderGroup: return "language_encoder";
    case kRouteDecoderGroup: return "route_decoder";
    case kLanguageDecoderGroup: return "language_decoder";
    case kMatchingGroup: return "matching";
  }
  return "unknown";
}

void ModelConfig::validate() const {
  attention.validate();
  if (visual_dim < 1) throw std::invalid_argument("visual_dim must be >= 1");
  if (views < 1) throw std::invalid_argument("views must be >= 1");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (max_text_length < 2) throw std::invalid_argument("max_text_length must be >= 2");
  if (vocab_size <= Vocabulary::kSpecials) throw std::invalid_argument("vocab_size must exceed the special tokens");
  if (min_steps < 0) throw std::invalid_argument("min_steps must be >= 0");
}

Navigator::Navigator(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  transformer::Rng rng(seed);
  const int d = config_.attention.width;
  const auto& att = config_.attention;

  visual_proj_ = transformer::Linear<Real>(store_, "token.visual", config_.visual_dim, d, kRouteEncoderGroup, rng);
  orientation_proj_ = transformer::Linear<Real>(store_, "token.orientation", 4, d, kRouteEncoderGroup, rng);
  temporal_ = &store_.add("token.temporal", transformer::xavier_uniform<Real>(config_.horizon, d, rng), kRouteEncoderGroup);
  type_obs_ = &store_.add("token.type_observation", transformer::xavier_uniform<Real>(1, d, rng), kRouteEncoderGroup);
  type_act_ = &store_.add("token.type_action", transformer::xavier_uniform<Real>(1, d, rng), kRouteEncoderGroup);
  route_encoder_ = transformer::BlockStack<Real>(store_, StackKind::RouteEncoder, att, kRouteEncoderGroup, rng);

  word_embedding_ = &store_.add("language.word_embedding",
                                transformer::xavier_uniform<Real>(config_.vocab_size, d, rng), kLanguageEncoderGroup);
  position_embedding_ = &store_.add("language.position_embedding",
                                    transformer::xavier_uniform<Real>(config_.max_text_length, d, rng),
                                    kLanguageEncoderGroup);
  language_encoder_ =
      transformer::BlockStack<Real>(store_, StackKind::LanguageEncoder, att, kLanguageEncoderGroup, rng);

  route_decoder_ = transformer::BlockStack<Real>(store_, StackKind::RouteDecoder, att, kRouteDecoderGroup, rng);
  stop_ = &store_.add("action.stop_embedding", transformer::xavier_uniform<Real>(1, d, rng), kRouteDecoderGroup);
  action_head_ = transformer::TwoLayerHead<Real>(store_, "action.head", d, d, 1, kRouteDecoderGroup, rng);

  language_decoder_ =
      transformer::BlockStack<Real>(store_, StackKind::LanguageDecoder, att, kLanguageDecoderGroup, rng);
  word_head_ =
      transformer::TwoLayerHead<Real>(store_, "word.head", d, d, config_.vocab_size, kLanguageDecoderGroup, rng);

  matching_head_ = transformer::TwoLayerHead<Real>(store_, "matching.head", 2 * d, d, 1, kMatchingGroup, rng);
}

Tensor Navigator::view_features(Tape& tape, const Panorama& pano) const {
  if (pano.size() != config_.views)
    throw std::invalid_argument("panorama has " + std::to_string(pano.size()) + " views, model expects " +
                                std::to_string(config_.views));
  const int k = pano.size();
  Matrix<Real> visual(k, config_.visual_dim);
  Matrix<Real> orient(k, 4);
  for (int i = 0; i < k; ++i) {
    const auto& v = pano.views[static_cast<std::size_t>(i)];
    if (static_cast<int>(v.visual.size()) != config_.visual_dim)
      throw std::invalid_argument("visual feature size mismatch");
    for (int j = 0; j < config_.visual_dim; ++j) visual(i, j) = static_cast<Real>(v.visual[static_cast<std::size_t>(j)]);
    for (int j = 0; j < 4; ++j) orient(i, j) = static_cast<Real>(v.orientation[static_cast<std::size_t>(j)]);
  }
  return diffcore::add(visual_proj_(tape, tape.constant(std::move(visual))),
                       orientation_proj_(tape, tape.constant(std::move(orient))));
}

Tensor Navigator::step_embedding(Tape& tape, int step) const {
  if (step < 0 || step >= config_.horizon)
    throw HorizonError("step " + std::to_string(step) + " outside temporal horizon " + std::to_string(config_.horizon));
  const int ids[1] = {step};
  return diffcore::embedding_lookup(tape.parameter(*temporal_), std::span<const int>(ids, 1));
}

Tensor Navigator::observation_tokens(Tape& tape, const Panorama& pano, int step) const {
  Tensor time = step_embedding(tape, step);
  Tensor feats = view_features(tape, pano);
  return diffcore::add(diffcore::add(feats, time), tape.parameter(*type_obs_));
}

Tensor Navigator::action_token(Tape& tape, const Panorama& pano, int action, int step) const {
  if (!pano.is_navigable(action)) throw ActionError("action " + std::to_string(action) + " is not a navigable view");
  Tensor time = step_embedding(tape, step);
  const auto& v = pano.views[static_cast<std::size_t>(action)];
  Matrix<Real> visual(1, config_.visual_dim);
  for (int j = 0; j < config_.visual_dim; ++j) visual(0, j) = static_cast<Real>(v.visual[static_cast<std::size_t>(j)]);
  Matrix<Real> orient(1, 4);
  for (int j = 0; j < 4; ++j) orient(0, j) = static_cast<Real>(v.orientation[static_cast<std::size_t>(j)]);
  Tensor feats = diffcore::add(visual_proj_(tape, tape.constant(std::move(visual))),
                               orientation_proj_(tape, tape.constant(std::move(orient))));
  return diffcore::add(diffcore::add(feats, time), tape.parameter(*type_act_));
}

Tensor Navigator::compress_route_state(Tape& tape, const Tensor& action_token, const Tensor& observations) const {
  return route_encoder_.compress(tape, action_token, observations);
}

Tensor Navigator::route_states(Tape& tape, const Route& route, int count) const {
  if (count < 1 || count > route.length()) throw std::out_of_range("route_states: bad step count");
  std::vector<Tensor> states;
  states.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const RouteStep& s = route.steps[static_cast<std::size_t>(i)];
    Tensor obs = observation_tokens(tape, s.observation, i);
    Tensor act = action_token(tape, s.observation, s.action, i);
    states.push_back(compress_route_state(tape, act, obs));
  }
  return diffcore::concat_rows<Real>(std::span<const Tensor>(states));
}

Tensor Navigator::encode_route_following(Tape& tape, const Route& history, const Panorama& current) const {
  if (history.length() == 0) return encode_route_following(tape, nullptr, current, 0);
  Tensor states = route_states(tape, history, history.length());
  return encode_route_following(tape, &states, current, history.length());
}

Tensor Navigator::encode_route_following(Tape& tape, const Tensor* history_states, const Panorama& current,
                                         int step) const {
  Tensor obs = observation_tokens(tape, current, step);
  if (!history_states) return route_encoder_(tape, obs);
  return route_encoder_(tape, diffcore::concat_rows<Real>({*history_states, obs}));
}

Tensor Navigator::encode_route_generation(Tape& tape, const Route& route) const {
  if (route.length() < 1) throw std::invalid_argument("cannot encode an empty route");
  return route_encoder_(tape, route_states(tape, route, route.length()));
}

Tensor Navigator::encode_language(Tape& tape, std::span<const int> tokens, int first_position,
                                  LanguageMode mode) const {
  if (tokens.empty()) throw std::invalid_argument("cannot encode an empty token sequence");
  const int n = static_cast<int>(tokens.size());
  if (first_position < 0 || first_position + n > config_.max_text_length)
    throw HorizonError("token positions exceed max_text_length " + std::to_string(config_.max_text_length));
  std::vector<int> positions(static_cast<std::size_t>(n));
  std::iota(positions.begin(), positions.end(), first_position);
  Tensor words = diffcore::embedding_lookup(tape.parameter(*word_embedding_), tokens);
  Tensor pos = diffcore::embedding_lookup(tape.parameter(*position_embedding_), std::span<const int>(positions));
  return language_encoder_(tape, diffcore::add(words, pos), nullptr, mode == LanguageMode::Causal);
}

Tensor Navigator::encode_instruction(Tape& tape, const Instruction& ins) const {
  std::vector<int> words = ins.words();
  return encode_language(tape, words, 1, LanguageMode::Bidirectional);
}

Tensor Navigator::action_logits(Tape& tape, const Tensor& route_encoding, const Tensor& language_encoding,
                                const Panorama& current, int step, diffcore::Mask* mask_out) const {
  const int k = config_.views;
  if (current.size() != k) throw std::invalid_argument("panorama view count does not match the model");
  if (route_encoding.rows() < k) throw diffcore::DimensionError("route encoding shorter than one panorama");
  diffcore::Mask mask(1, k + 1);
  for (int i = 0; i < k; ++i) mask(0, i) = current.is_navigable(i);
  mask(0, k) = step >= config_.min_steps;
  if (!mask.any()) throw PolicyError("no navigable view and stopping is not yet allowed");

  Tensor query = diffcore::concat_rows<Real>({route_encoding, tape.parameter(*stop_)});
  Tensor decoded = route_decoder_(tape, query, &language_encoding);
  Tensor candidates = diffcore::slice_rows(decoded, decoded.rows() - (k + 1), k + 1);
  Tensor logits = diffcore::transpose(action_head_(tape, candidates));
  if (mask_out) *mask_out = mask;
  return logits;
}

Distribution Navigator::decode_action(Tape& tape, const Tensor& route_encoding, const Tensor& language_encoding,
                                      const Panorama& current, int step) const {
  diffcore::Mask mask;
  Tensor logits = action_logits(tape, route_encoding, language_encoding, current, step, &mask);
  Tensor probs = diffcore::softmax(logits, 1, &mask);
  Distribution out;
  out.probs.assign(probs.value().data(), probs.value().data() + probs.value().size());
  return out;
}

Tensor Navigator::word_logits(Tape& tape, const Tensor& language_prefix, const Tensor& route_encoding) const {
  return word_head_(tape, language_decoder_(tape, language_prefix, &route_encoding));
}

Distribution Navigator::decode_word(Tape& tape, const Tensor& language_prefix, const Tensor& route_encoding) const {
  Tensor logits = word_logits(tape, language_prefix, route_encoding);
  Tensor last = diffcore::softmax(diffcore::slice_rows(logits, logits.rows() - 1, 1));
  Distribution out;
  out.probs.assign(last.value().data(), last.value().data() + last.value().size());
  return out;
}

Tensor Navigator::matching_logit(Tape& tape, const Tensor& route_encoding, const Tensor& language_encoding) const {
  Tensor pooled = diffcore::concat_cols(diffcore::mean_rows(route_encoding), diffcore::mean_rows(language_encoding));
  return matching_head_(tape, pooled);
}

double Navigator::itm_score(const Instruction& ins, const Route& route) const {
  Tape tape(false);
  Tensor r = encode_route_generation(tape, route);
  Tensor x = encode_instruction(tape, ins);
  return static_cast<double>(diffcore::sigmoid(matching_logit(tape, r, x)).item());
}

FollowResult Navigator::follow_instruction(const Instruction& ins, const PanoramaSource& env, int start_node,
                                           int max_steps) const {
  if (max_steps < 0) throw std::invalid_argument("max_steps must be >= 0");
  if (max_steps >= config_.horizon)
    throw HorizonError("max_steps " + std::to_string(max_steps) + " needs a horizon above " +
                       std::to_string(config_.horizon));
  Tape tape(false);
  Tensor language = encode_instruction(tape, ins);
  FollowResult result;
  result.nodes.push_back(start_node);
  int node = start_node;
  std::vector<Tensor> history;
  for (int t = 0;; ++t) {
    Panorama pano = env.panorama(node);
    if (t == max_steps) {
      result.truncated = true;
      result.route.terminal = std::move(pano);
      break;
    }
    Tensor hist;
    if (!history.empty()) hist = diffcore::concat_rows<Real>(std::span<const Tensor>(history));
    Tensor route = encode_route_following(tape, history.empty() ? nullptr : &hist, pano, t);
    Distribution p = decode_action(tape, route, language, pano, t);
    result.decisions.push_back(p);
    const int choice = p.argmax();
    if (choice == stop_index()) {
      result.stopped = true;
      result.route.terminal = std::move(pano);
      break;
    }
    Tensor obs = observation_tokens(tape, pano, t);
    Tensor act = action_token(tape, pano, choice, t);
    history.push_back(compress_route_state(tape, act, obs));
    result.route.steps.push_back(RouteStep{pano, choice});
    node = env.step(node, choice);
    result.nodes.push_back(node);
  }
  return result;
}

Instruction Navigator::generate_instruction(const Route& route, int max_len, GenerationTrace* trace) const {
  if (max_len < 0) throw std::invalid_argument("max_len must be >= 0");
  if (max_len + 1 > config_.max_text_length) throw HorizonError("max_len exceeds the position table");
  Tape tape(false);
  Tensor route_enc = encode_route_generation(tape, route);
  std::vector<int> prefix{Vocabulary::kBos};
  std::vector<int> words;
  while (static_cast<int>(words.size()) < max_len) {
    Tensor lang = encode_language(tape, prefix, 0, LanguageMode::Causal);
    Distribution q = decode_word(tape, lang, route_enc);
    if (trace) trace->steps.push_back(q);
    const int next = q.argmax();
    if (next == Vocabulary::kEos) break;
    words.push_back(next);
    prefix.push_back(next);
  }
  return Instruction::frame(words);
}

}  // namespace duonav::agent
