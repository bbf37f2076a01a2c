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

#ifndef DUONAV_TRANSFORMER_LAYERS_HPP
#define DUONAV_TRANSFORMER_LAYERS_HPP

#include <cmath>
#include <random>
#include <string>

#include "duonav/diffcore/ops.hpp"
#include "duonav/diffcore/tensor.hpp"

namespace duonav::transformer {

using diffcore::Index;
using diffcore::Mask;
using diffcore::Matrix;
using diffcore::Parameter;
using diffcore::ParameterStore;
using diffcore::Tape;
using diffcore::Tensor;
using Rng = std::mt19937_64;

/// Xavier/Glorot uniform fill for a [fan_in, fan_out] matrix.
template <typename Scalar>
Matrix<Scalar> xavier_uniform(Index fan_in, Index fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix<Scalar> m(fan_in, fan_out);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(dist(rng));
  return m;
}

/// y = x W + b with W [in, out] and b [1, out]; b is optional.
template <typename Scalar>
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore<Scalar>& store, const std::string& name, Index in, Index out, int group, Rng& rng,
         bool with_bias = true)
      : weight_(&store.add(name + ".weight", xavier_uniform<Scalar>(in, out, rng), group)),
        bias_(with_bias ? &store.add(name + ".bias", Matrix<Scalar>::Zero(1, out), group) : nullptr) {}

  Tensor<Scalar> operator()(Tape<Scalar>& tape, const Tensor<Scalar>& x) const {
    Tensor<Scalar> y = diffcore::matmul(x, tape.parameter(*weight_));
    return bias_ ? diffcore::add(y, tape.parameter(*bias_)) : y;
  }

  Parameter<Scalar>& weight() const { return *weight_; }
  bool has_bias() const { return bias_ != nullptr; }
  Parameter<Scalar>& bias() const { return *bias_; }

 private:
  Parameter<Scalar>* weight_ = nullptr;
  Parameter<Scalar>* bias_ = nullptr;
};

template <typename Scalar>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore<Scalar>& store, const std::string& name, Index width, int group)
      : gain_(&store.add(name + ".gain", Matrix<Scalar>::Ones(1, width), group)),
        bias_(&store.add(name + ".bias", Matrix<Scalar>::Zero(1, width), group)) {}

  Tensor<Scalar> operator()(Tape<Scalar>& tape, const Tensor<Scalar>& x) const {
    return diffcore::layer_norm(x, tape.parameter(*gain_), tape.parameter(*bias_));
  }

 private:
  Parameter<Scalar>* gain_ = nullptr;
  Parameter<Scalar>* bias_ = nullptr;
};

/// Two-layer feed-forward map `out(gelu(in(x)))`, used for scoring heads.
template <typename Scalar>
class TwoLayerHead {
 public:
  TwoLayerHead() = default;
  TwoLayerHead(ParameterStore<Scalar>& store, const std::string& name, Index in, Index hidden, Index out, int group,
               Rng& rng)
      : in_(store, name + ".in", in, hidden, group, rng), out_(store, name + ".out", hidden, out, group, rng) {}

  Tensor<Scalar> operator()(Tape<Scalar>& tape, const Tensor<Scalar>& x) const {
    return out_(tape, diffcore::gelu(in_(tape, x)));
  }

  const Linear<Scalar>& input_layer() const { return in_; }
  const Linear<Scalar>& output_layer() const { return out_; }

 private:
  Linear<Scalar> in_;
  Linear<Scalar> out_;
};

/// Query/key/value/output projections around diffcore::attention. The key
/// projection is bias-free.
template <typename Scalar>
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore<Scalar>& store, const std::string& name, Index width, int heads, int group,
                     Rng& rng)
      : heads_(heads),
        query_(store, name + ".query", width, width, group, rng),
        key_(store, name + ".key", width, width, group, rng, false),
        value_(store, name + ".value", width, width, group, rng),
        output_(store, name + ".output", width, width, group, rng) {}

  Tensor<Scalar> operator()(Tape<Scalar>& tape, const Tensor<Scalar>& queries, const Tensor<Scalar>& context,
                            const Mask* mask = nullptr,
                            diffcore::AttentionWeights<Scalar>* weights = nullptr) const {
    Tensor<Scalar> q = query_(tape, queries);
    Tensor<Scalar> k = key_(tape, context);
    Tensor<Scalar> v = value_(tape, context);
    return output_(tape, diffcore::attention(q, k, v, heads_, mask, weights));
  }

  int heads() const { return heads_; }
  const Linear<Scalar>& query() const { return query_; }
  const Linear<Scalar>& key() const { return key_; }
  const Linear<Scalar>& value() const { return value_; }
  const Linear<Scalar>& output() const { return output_; }

 private:
  int heads_ = 1;
  Linear<Scalar> query_, key_, value_, output_;
};

}  // namespace duonav::transformer

#endif  // DUONAV_TRANSFORMER_LAYERS_HPP
