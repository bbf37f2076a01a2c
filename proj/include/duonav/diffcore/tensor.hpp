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

#ifndef DUONAV_DIFFCORE_TENSOR_HPP
#define DUONAV_DIFFCORE_TENSOR_HPP

#include <array>
#include <cstddef>
#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <stdexcept>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace duonav::diffcore {

/// Dense row-major matrix. Every tensor in the engine is rank 2; vectors are
/// stored as 1 x n rows and scalars as 1 x 1.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Index = Eigen::Index;
using Shape = std::array<Index, 2>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class DegenerateInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an op produces NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string shape_string(Index rows, Index cols) {
  return "[" + std::to_string(rows) + "," + std::to_string(cols) + "]";
}

/// A learnable weight living outside any tape. `group` is an opaque tag used
/// by optimizers to decide which parameters a task is allowed to update.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  int group = 0;

  Parameter(std::string n, Matrix<Scalar> v, int g)
      : name(std::move(n)), value(std::move(v)), grad(Matrix<Scalar>::Zero(value.rows(), value.cols())), group(g) {}

  Shape shape() const { return {value.rows(), value.cols()}; }
  Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

template <typename Scalar>
class Tape;

/// Lightweight handle to a value recorded on a Tape.
template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;
  Tensor(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix<Scalar>& value() const { return tape_->value(id_); }
  const Matrix<Scalar>& grad() const { return tape_->grad(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  Shape shape() const { return {rows(), cols()}; }
  bool requires_grad() const { return tape_->requires_grad(id_); }
  Tape<Scalar>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  /// Convenience for 1 x 1 tensors.
  Scalar item() const {
    if (value().size() != 1) throw DimensionError("item() on non-scalar " + shape_string(rows(), cols()));
    return value()(0, 0);
  }

 private:
  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records operations in creation order, which is a valid topological order.
/// backward() walks the record in reverse, visiting each node once and
/// accumulating gradients additively across fan-out.
///
/// A tape built with `record = false` keeps values only; it is the inference
/// mode used by greedy decoding and evaluation.
template <typename Scalar>
class Tape {
 public:
  using MatrixT = Matrix<Scalar>;
  /// Receives the tape and the node's own gradient; must push gradient into
  /// the node's inputs through accumulate().
  using BackwardFn = std::function<void(Tape&, const MatrixT&)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Tensor<Scalar> constant(MatrixT value) { return push(std::move(value), false, nullptr); }

  /// Free leaf that receives a gradient (used by gradient checks of single ops).
  Tensor<Scalar> variable(MatrixT value) { return push(std::move(value), record_, nullptr); }

  /// Leaf bound to an external parameter; backward() adds into `p.grad`.
  Tensor<Scalar> parameter(Parameter<Scalar>& p) {
    if (auto it = bound_.find(&p); it != bound_.end()) return Tensor<Scalar>(this, it->second);
    Node node;
    node.external = &p.value;
    node.param = &p;
    node.requires_grad = record_;
    nodes_.push_back(std::move(node));
    bound_.emplace(&p, nodes_.size() - 1);
    return Tensor<Scalar>(this, nodes_.size() - 1);
  }

  /// Record an op output. `requires_grad` should be true iff any input does.
  Tensor<Scalar> push(MatrixT value, bool requires_grad, BackwardFn backward) {
    // Any NaN or infinity makes the sum non-finite.
    if (!std::isfinite(value.sum())) throw NumericError("non-finite value produced by op");
    Node node;
    node.value = std::move(value);
    node.requires_grad = record_ && requires_grad;
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Tensor<Scalar>(this, nodes_.size() - 1);
  }

  const MatrixT& value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
  }

  const MatrixT& grad(std::size_t id) const { return nodes_[id].grad; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Add `g` into the gradient of node `id` (no-op for constants).
  template <typename Derived>
  void accumulate(std::size_t id, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Add row i of `g` into row rows[i] of node `id`'s gradient.
  template <typename Derived>
  void accumulate_rows(std::size_t id, std::span<const int> rows, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      const MatrixT& v = value(id);
      n.grad = MatrixT::Zero(v.rows(), v.cols());
    }
    for (std::size_t i = 0; i < rows.size(); ++i) n.grad.row(rows[i]) += g.row(static_cast<Index>(i));
  }

  /// Add `g` into rows [first, first + g.rows()) of node `id`'s gradient.
  template <typename Derived>
  void accumulate_block(std::size_t id, Index first, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      const MatrixT& v = value(id);
      n.grad = MatrixT::Zero(v.rows(), v.cols());
    }
    n.grad.middleRows(first, g.rows()) += g;
  }

  /// Reverse sweep from a 1 x 1 loss.
  void backward(const Tensor<Scalar>& loss) {
    if (loss.rows() != 1 || loss.cols() != 1)
      throw DimensionError("backward() needs a scalar loss, got " + shape_string(loss.rows(), loss.cols()));
    if (!record_) throw std::logic_error("backward() on a non-recording tape");
    accumulate(loss.id(), MatrixT::Ones(1, 1));
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.param) n.param->grad += n.grad;
      if (n.backward) n.backward(*this, n.grad);
    }
  }

 private:
  struct Node {
    MatrixT value;
    const MatrixT* external = nullptr;
    Parameter<Scalar>* param = nullptr;
    MatrixT grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  bool record_;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<Scalar>*, std::size_t> bound_;
};

/// Owns a model's parameters with stable addresses, in registration order.
template <typename Scalar>
class ParameterStore {
 public:
  Parameter<Scalar>& add(std::string name, Matrix<Scalar> value, int group) {
    for (const auto& p : params_)
      if (p->name == name) throw std::invalid_argument("duplicate parameter name: " + name);
    params_.push_back(std::make_unique<Parameter<Scalar>>(std::move(name), std::move(value), group));
    return *params_.back();
  }

  std::size_t size() const { return params_.size(); }
  Parameter<Scalar>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<Scalar>& operator[](std::size_t i) const { return *params_[i]; }

  Parameter<Scalar>* find(const std::string& name) {
    for (auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }

  Index total_size() const {
    Index n = 0;
    for (const auto& p : params_) n += p->size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  template <typename Fn>
  void for_each(Fn&& fn) {
    for (auto& p : params_) fn(*p);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& p : params_) fn(*p);
  }

 private:
  std::vector<std::unique_ptr<Parameter<Scalar>>> params_;
};

}  // namespace duonav::diffcore

#endif  // DUONAV_DIFFCORE_TENSOR_HPP
