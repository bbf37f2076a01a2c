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

#ifndef DUONAV_DIFFCORE_OPS_HPP
#define DUONAV_DIFFCORE_OPS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "duonav/diffcore/tensor.hpp"

namespace duonav::diffcore {

/// Attention/softmax mask; true = attendable.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Lower-triangular (inclusive) n x n mask.
inline Mask causal_mask(Index n) {
  Mask m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = j <= i;
  return m;
}

inline Mask full_mask(Index rows, Index cols) { return Mask::Constant(rows, cols, true); }

namespace detail {

template <typename Scalar>
void check_same_tape(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("tensors recorded on different tapes");
}

template <typename Scalar>
void check_same_shape(const char* op, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
                         shape_string(b.rows(), b.cols()));
}

// Row-wise softmax honouring a mask; masked entries get exactly zero mass.
template <typename Scalar>
Matrix<Scalar> masked_softmax_rows(const Matrix<Scalar>& x, const Mask* mask) {
  Matrix<Scalar> y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < x.cols(); ++j)
      if (!mask || (*mask)(i, j)) mx = std::max(mx, x(i, j));
    if (mx == -std::numeric_limits<Scalar>::infinity()) throw DegenerateInputError("softmax row fully masked");
    Scalar sum = 0;
    for (Index j = 0; j < x.cols(); ++j) {
      if (!mask || (*mask)(i, j)) {
        y(i, j) = std::exp(x(i, j) - mx);
        sum += y(i, j);
      } else {
        y(i, j) = 0;
      }
    }
    y.row(i) /= sum;
  }
  return y;
}

// dL/dx for y = softmax(x) given dL/dy, row-wise.
template <typename Scalar>
Matrix<Scalar> softmax_rows_backward(const Matrix<Scalar>& y, const Matrix<Scalar>& gy) {
  Matrix<Scalar> gx = y.cwiseProduct(gy);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dots = gx.rowwise().sum();
  gx -= y.cwiseProduct(dots.replicate(1, y.cols()));
  return gx;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_tape(a, b);
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dims differ " + shape_string(a.rows(), a.cols()) + " x " +
                         shape_string(b.rows(), b.cols()));
  auto ia = a.id(), ib = b.id();
  Matrix<Scalar> out = a.value() * b.value();
  return a.tape().push(std::move(out), a.requires_grad() || b.requires_grad(),
                       [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                         if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
                         if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
                       });
}

template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& a) {
  auto ia = a.id();
  return a.tape().push(a.value().transpose(), a.requires_grad(),
                       [ia](Tape<Scalar>& t, const Matrix<Scalar>& g) { t.accumulate(ia, g.transpose()); });
}

// ---------------------------------------------------------------------------
// Elementwise

/// a + b. `b` may also be a single row broadcast over the rows of `a`.
template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_tape(a, b);
  auto ia = a.id(), ib = b.id();
  if (b.rows() == 1 && a.rows() != 1 && a.cols() == b.cols()) {
    Matrix<Scalar> out = a.value().rowwise() + b.value().row(0);
    return a.tape().push(std::move(out), a.requires_grad() || b.requires_grad(),
                         [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                           t.accumulate(ia, g);
                           t.accumulate(ib, g.colwise().sum());
                         });
  }
  detail::check_same_shape("add", a, b);
  return a.tape().push(a.value() + b.value(), a.requires_grad() || b.requires_grad(),
                       [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                         t.accumulate(ia, g);
                         t.accumulate(ib, g);
                       });
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_tape(a, b);
  detail::check_same_shape("sub", a, b);
  auto ia = a.id(), ib = b.id();
  return a.tape().push(a.value() - b.value(), a.requires_grad() || b.requires_grad(),
                       [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                         t.accumulate(ia, g);
                         t.accumulate(ib, -g);
                       });
}

template <typename Scalar>
Tensor<Scalar> hadamard(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_tape(a, b);
  detail::check_same_shape("hadamard", a, b);
  auto ia = a.id(), ib = b.id();
  return a.tape().push(a.value().cwiseProduct(b.value()), a.requires_grad() || b.requires_grad(),
                       [ia, ib](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                         if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
                         if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
                       });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar s) {
  auto ia = a.id();
  return a.tape().push(a.value() * s, a.requires_grad(),
                       [ia, s](Tape<Scalar>& t, const Matrix<Scalar>& g) { t.accumulate(ia, g * s); });
}

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return add(a, b); }
template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return sub(a, b); }
template <typename Scalar>
Tensor<Scalar> operator*(const Tensor<Scalar>& a, Scalar s) { return scale(a, s); }
template <typename Scalar>
Tensor<Scalar> operator*(Scalar s, const Tensor<Scalar>& a) { return scale(a, s); }

/// Exact GELU, x * Phi(x).
template <typename Scalar>
Tensor<Scalar> gelu(const Tensor<Scalar>& x) {
  const Scalar inv_sqrt2 = Scalar(0.70710678118654752440);
  Matrix<Scalar> phi = x.value().unaryExpr(
      [inv_sqrt2](Scalar v) { return Scalar(0.5) * (Scalar(1) + std::erf(v * inv_sqrt2)); });
  Matrix<Scalar> out = x.value().cwiseProduct(phi);
  auto ix = x.id();
  return x.tape().push(std::move(out), x.requires_grad(), [ix, phi = std::move(phi)](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    const Scalar inv_sqrt2pi = Scalar(0.39894228040143267794);
    const Matrix<Scalar>& xv = t.value(ix);
    Matrix<Scalar> d = phi + xv.cwiseProduct(xv.unaryExpr([&](Scalar v) { return inv_sqrt2pi * std::exp(Scalar(-0.5) * v * v); }));
    t.accumulate(ix, g.cwiseProduct(d));
  });
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x) {
  Matrix<Scalar> y = x.value().unaryExpr([](Scalar v) {
    return v >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-v)) : std::exp(v) / (Scalar(1) + std::exp(v));
  });
  auto ix = x.id();
  Matrix<Scalar> yc = y;
  return x.tape().push(std::move(y), x.requires_grad(), [ix, yc = std::move(yc)](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ix, g.cwiseProduct(yc.cwiseProduct((Scalar(1) - yc.array()).matrix())));
  });
}

// ---------------------------------------------------------------------------
// Normalisation and probabilities

/// Row-wise layer normalisation with affine gain/bias (both 1 x n).
template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gain, const Tensor<Scalar>& bias,
                          Scalar eps = Scalar(1e-10)) {
  const Index n = x.cols();
  if (n < 2) throw DegenerateInputError("layer_norm over an axis of length 1");
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n)
    throw DimensionError("layer_norm: gain/bias must be [1," + std::to_string(n) + "]");
  const Matrix<Scalar>& xv = x.value();
  Matrix<Scalar> xhat(xv.rows(), n);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(xv.rows());
  for (Index i = 0; i < xv.rows(); ++i) {
    Scalar mean = xv.row(i).mean();
    auto centered = (xv.row(i).array() - mean);
    Scalar var = centered.square().mean();
    inv_std(i) = Scalar(1) / std::sqrt(var + eps);
    xhat.row(i) = (centered * inv_std(i)).matrix();
  }
  Matrix<Scalar> out = (xhat.array().rowwise() * gain.value().row(0).array()).rowwise() + bias.value().row(0).array();
  auto ix = x.id(), ig = gain.id(), ib = bias.id();
  return x.tape().push(std::move(out), x.requires_grad() || gain.requires_grad() || bias.requires_grad(),
                       [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std), n](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                         if (t.requires_grad(ig)) t.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
                         if (t.requires_grad(ib)) t.accumulate(ib, g.colwise().sum());
                         if (!t.requires_grad(ix)) return;
                         Matrix<Scalar> dxhat = g.array().rowwise() * t.value(ig).row(0).array();
                         Matrix<Scalar> dx(g.rows(), n);
                         for (Index i = 0; i < g.rows(); ++i) {
                           Scalar m1 = dxhat.row(i).mean();
                           Scalar m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
                           dx.row(i) = inv_std(i) * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2).matrix();
                         }
                         t.accumulate(ix, dx);
                       });
}

/// Numerically stabilised softmax along `axis` (1 = within each row, 0 =
/// within each column). Masked entries receive exactly zero probability.
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& x, int axis = 1, const Mask* mask = nullptr) {
  if (axis != 0 && axis != 1) throw DimensionError("softmax: axis must be 0 or 1");
  if (mask && (mask->rows() != x.rows() || mask->cols() != x.cols()))
    throw DimensionError("softmax: mask shape mismatch");
  auto ix = x.id();
  if (axis == 0) {
    Matrix<Scalar> xt = x.value().transpose();
    Mask mt;
    if (mask) mt = mask->transpose();
    Matrix<Scalar> yt = detail::masked_softmax_rows<Scalar>(xt, mask ? &mt : nullptr);
    Matrix<Scalar> y = yt.transpose();
    return x.tape().push(std::move(y), x.requires_grad(), [ix, yt = std::move(yt)](Tape<Scalar>& t, const Matrix<Scalar>& g) {
      Matrix<Scalar> gt = g.transpose();
      t.accumulate(ix, detail::softmax_rows_backward<Scalar>(yt, gt).transpose());
    });
  }
  Matrix<Scalar> y = detail::masked_softmax_rows<Scalar>(x.value(), mask);
  Matrix<Scalar> yc = y;
  return x.tape().push(std::move(y), x.requires_grad(), [ix, yc = std::move(yc)](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ix, detail::softmax_rows_backward<Scalar>(yc, g));
  });
}

/// Counters reported by nll_loss.
struct NllStats {
  long clamped = 0;
};

/// -sum_i log(probs(i, targets[i])) over rows of a probability matrix.
/// Zero probabilities are clamped at 1e-12 and counted in `stats`.
template <typename Scalar>
Tensor<Scalar> nll_loss(const Tensor<Scalar>& probs, std::span<const int> targets, NllStats* stats = nullptr) {
  if (static_cast<Index>(targets.size()) != probs.rows())
    throw DimensionError("nll_loss: one target per row required");
  const Scalar floor = Scalar(1e-12);
  Scalar total = 0;
  std::vector<int> tg(targets.begin(), targets.end());
  std::vector<bool> clamped(tg.size(), false);
  for (std::size_t i = 0; i < tg.size(); ++i) {
    if (tg[i] < 0 || tg[i] >= probs.cols()) throw IndexError("nll_loss: target out of range");
    Scalar p = probs.value()(static_cast<Index>(i), tg[i]);
    if (p < floor) {
      p = floor;
      clamped[i] = true;
      if (stats) ++stats->clamped;
    }
    total -= std::log(p);
  }
  Matrix<Scalar> out(1, 1);
  out(0, 0) = total;
  auto ip = probs.id();
  return probs.tape().push(std::move(out), probs.requires_grad(),
                           [ip, tg = std::move(tg), clamped = std::move(clamped)](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                             const Matrix<Scalar>& pv = t.value(ip);
                             Matrix<Scalar> d = Matrix<Scalar>::Zero(pv.rows(), pv.cols());
                             for (std::size_t i = 0; i < tg.size(); ++i)
                               if (!clamped[i]) d(static_cast<Index>(i), tg[i]) = -g(0, 0) / pv(static_cast<Index>(i), tg[i]);
                             t.accumulate(ip, d);
                           });
}

/// sum_i -log softmax(logits.row(i))[targets[i]], via log-sum-exp. Rows may
/// carry a mask; a masked target is an IndexError.
template <typename Scalar>
Tensor<Scalar> cross_entropy(const Tensor<Scalar>& logits, std::span<const int> targets, const Mask* mask = nullptr) {
  if (static_cast<Index>(targets.size()) != logits.rows())
    throw DimensionError("cross_entropy: one target per row required");
  const Matrix<Scalar>& z = logits.value();
  std::vector<int> tg(targets.begin(), targets.end());
  Scalar total = 0;
  for (Index i = 0; i < z.rows(); ++i) {
    int c = tg[static_cast<std::size_t>(i)];
    if (c < 0 || c >= z.cols()) throw IndexError("cross_entropy: target out of range");
    if (mask && !(*mask)(i, c)) throw IndexError("cross_entropy: target is masked");
    Scalar mx = -std::numeric_limits<Scalar>::infinity();
    for (Index j = 0; j < z.cols(); ++j)
      if (!mask || (*mask)(i, j)) mx = std::max(mx, z(i, j));
    Scalar s = 0;
    for (Index j = 0; j < z.cols(); ++j)
      if (!mask || (*mask)(i, j)) s += std::exp(z(i, j) - mx);
    total += mx + std::log(s) - z(i, c);
  }
  Matrix<Scalar> out(1, 1);
  out(0, 0) = total;
  auto il = logits.id();
  Mask mc;
  if (mask) mc = *mask;
  bool has_mask = mask != nullptr;
  return logits.tape().push(std::move(out), logits.requires_grad(),
                            [il, tg = std::move(tg), mc = std::move(mc), has_mask](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                              Matrix<Scalar> p = detail::masked_softmax_rows<Scalar>(t.value(il), has_mask ? &mc : nullptr);
                              for (Index i = 0; i < p.rows(); ++i) p(i, tg[static_cast<std::size_t>(i)]) -= Scalar(1);
                              t.accumulate(il, p * g(0, 0));
                            });
}

/// sum_i BCE(sigmoid(logits(i,0)), labels[i]) computed stably from logits.
template <typename Scalar>
Tensor<Scalar> bce_with_logits(const Tensor<Scalar>& logits, std::span<const Scalar> labels) {
  if (logits.cols() != 1 || static_cast<Index>(labels.size()) != logits.rows())
    throw DimensionError("bce_with_logits: expects [n,1] logits and n labels");
  std::vector<Scalar> y(labels.begin(), labels.end());
  Scalar total = 0;
  for (Index i = 0; i < logits.rows(); ++i) {
    Scalar z = logits.value()(i, 0);
    total += std::max(z, Scalar(0)) - z * y[static_cast<std::size_t>(i)] + std::log1p(std::exp(-std::abs(z)));
  }
  Matrix<Scalar> out(1, 1);
  out(0, 0) = total;
  auto il = logits.id();
  return logits.tape().push(std::move(out), logits.requires_grad(), [il, y = std::move(y)](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    const Matrix<Scalar>& z = t.value(il);
    Matrix<Scalar> d(z.rows(), 1);
    for (Index i = 0; i < z.rows(); ++i) {
      Scalar v = z(i, 0);
      Scalar s = v >= 0 ? Scalar(1) / (Scalar(1) + std::exp(-v)) : std::exp(v) / (Scalar(1) + std::exp(v));
      d(i, 0) = (s - y[static_cast<std::size_t>(i)]) * g(0, 0);
    }
    t.accumulate(il, d);
  });
}

// ---------------------------------------------------------------------------
// Gather, reshape-like and reductions

/// Row gather from a [V, d] table.
template <typename Scalar>
Tensor<Scalar> embedding_lookup(const Tensor<Scalar>& table, std::span<const int> ids) {
  std::vector<int> idx(ids.begin(), ids.end());
  Matrix<Scalar> out(static_cast<Index>(idx.size()), table.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= table.rows())
      throw IndexError("embedding_lookup: id " + std::to_string(idx[i]) + " outside table of " +
                       std::to_string(table.rows()) + " rows");
    out.row(static_cast<Index>(i)) = table.value().row(idx[i]);
  }
  auto it = table.id();
  return table.tape().push(std::move(out), table.requires_grad(),
                           [it, idx = std::move(idx)](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                             t.accumulate_rows(it, std::span<const int>(idx), g);
                           });
}

template <typename Scalar>
Tensor<Scalar> concat_rows(std::span<const Tensor<Scalar>> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: nothing to concatenate");
  Index cols = parts[0].cols(), rows = 0;
  bool rg = false;
  std::vector<std::size_t> ids;
  std::vector<Index> counts;
  ids.reserve(parts.size());
  counts.reserve(parts.size());
  for (const auto& p : parts) {
    detail::check_same_tape(parts[0], p);
    if (p.cols() != cols) throw DimensionError("concat_rows: column count mismatch");
    rows += p.rows();
    rg = rg || p.requires_grad();
    ids.push_back(p.id());
    counts.push_back(p.rows());
  }
  Matrix<Scalar> out(rows, cols);
  Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  return parts[0].tape().push(std::move(out), rg, [ids = std::move(ids), counts = std::move(counts)](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    Index r0 = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      t.accumulate(ids[k], g.middleRows(r0, counts[k]));
      r0 += counts[k];
    }
  });
}

template <typename Scalar>
Tensor<Scalar> concat_rows(std::initializer_list<Tensor<Scalar>> parts) {
  std::vector<Tensor<Scalar>> v(parts);
  return concat_rows<Scalar>(std::span<const Tensor<Scalar>>(v));
}

template <typename Scalar>
Tensor<Scalar> concat_cols(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::check_same_tape(a, b);
  if (a.rows() != b.rows()) throw DimensionError("concat_cols: row count mismatch");
  Matrix<Scalar> out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  auto ia = a.id(), ib = b.id();
  Index ca = a.cols(), cb = b.cols();
  return a.tape().push(std::move(out), a.requires_grad() || b.requires_grad(),
                       [ia, ib, ca, cb](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                         t.accumulate(ia, g.leftCols(ca));
                         t.accumulate(ib, g.rightCols(cb));
                       });
}

template <typename Scalar>
Tensor<Scalar> slice_rows(const Tensor<Scalar>& x, Index begin, Index count) {
  if (begin < 0 || count < 1 || begin + count > x.rows()) throw IndexError("slice_rows: range outside tensor");
  auto ix = x.id();
  return x.tape().push(x.value().middleRows(begin, count), x.requires_grad(),
                       [ix, begin](Tape<Scalar>& t, const Matrix<Scalar>& g) { t.accumulate_block(ix, begin, g); });
}

/// Mean over rows -> [1, cols].
template <typename Scalar>
Tensor<Scalar> mean_rows(const Tensor<Scalar>& x) {
  auto ix = x.id();
  Index rows = x.rows();
  return x.tape().push(x.value().colwise().mean(), x.requires_grad(),
                       [ix, rows](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                         t.accumulate(ix, g.replicate(rows, 1) / Scalar(rows));
                       });
}

/// Sum of all entries -> [1, 1].
template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& x) {
  Matrix<Scalar> out(1, 1);
  out(0, 0) = x.value().sum();
  auto ix = x.id();
  Index rows = x.rows(), cols = x.cols();
  return x.tape().push(std::move(out), x.requires_grad(), [ix, rows, cols](Tape<Scalar>& t, const Matrix<Scalar>& g) {
    t.accumulate(ix, Matrix<Scalar>::Constant(rows, cols, g(0, 0)));
  });
}

// ---------------------------------------------------------------------------
// Attention

/// Per-head weights recorded by attention() for inspection.
template <typename Scalar>
struct AttentionWeights {
  std::vector<Matrix<Scalar>> heads;
};

/// Multi-head scaled dot-product attention over already projected inputs:
/// for each head h, softmax(Q_h K_h^T / sqrt(d_h)) V_h, heads concatenated.
/// q is [n, d]; k and v are [m, d]; mask is n x m.
template <typename Scalar>
Tensor<Scalar> attention(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v, int heads,
                         const Mask* mask = nullptr, AttentionWeights<Scalar>* weights_out = nullptr) {
  detail::check_same_tape(q, k);
  detail::check_same_tape(q, v);
  const Index n = q.rows(), m = k.rows(), d = q.cols();
  if (n == 0) throw DimensionError("attention: empty query");
  if (m == 0) throw DimensionError("attention: empty context");
  if (k.cols() != d || v.cols() != d || v.rows() != m) throw DimensionError("attention: q/k/v shapes disagree");
  if (heads < 1 || d % heads != 0) throw DimensionError("attention: model width not divisible by head count");
  if (mask && (mask->rows() != n || mask->cols() != m)) throw DimensionError("attention: mask shape mismatch");
  const Index dh = d / heads;
  const Scalar inv_scale = Scalar(1) / std::sqrt(Scalar(dh));
  const Matrix<Scalar>& qv = q.value();
  const Matrix<Scalar>& kv = k.value();
  const Matrix<Scalar>& vv = v.value();
  std::vector<Matrix<Scalar>> probs(static_cast<std::size_t>(heads));
  Matrix<Scalar> out(n, d);
  for (int h = 0; h < heads; ++h) {
    Matrix<Scalar> scores = (qv.middleCols(h * dh, dh) * kv.middleCols(h * dh, dh).transpose()) * inv_scale;
    probs[static_cast<std::size_t>(h)] = detail::masked_softmax_rows<Scalar>(scores, mask);
    out.middleCols(h * dh, dh) = probs[static_cast<std::size_t>(h)] * vv.middleCols(h * dh, dh);
  }
  if (weights_out) weights_out->heads = probs;
  auto iq = q.id(), ik = k.id(), iv = v.id();
  return q.tape().push(std::move(out), q.requires_grad() || k.requires_grad() || v.requires_grad(),
                       [iq, ik, iv, probs = std::move(probs), heads, dh, inv_scale](Tape<Scalar>& t, const Matrix<Scalar>& g) {
                         const Matrix<Scalar>& qv = t.value(iq);
                         const Matrix<Scalar>& kv = t.value(ik);
                         const Matrix<Scalar>& vv = t.value(iv);
                         Matrix<Scalar> dq(qv.rows(), qv.cols());
                         Matrix<Scalar> dk(kv.rows(), kv.cols());
                         Matrix<Scalar> dv(vv.rows(), vv.cols());
                         for (int h = 0; h < heads; ++h) {
                           const Matrix<Scalar>& p = probs[static_cast<std::size_t>(h)];
                           Matrix<Scalar> go = g.middleCols(h * dh, dh);
                           dv.middleCols(h * dh, dh) = p.transpose() * go;
                           Matrix<Scalar> dp = go * vv.middleCols(h * dh, dh).transpose();
                           Matrix<Scalar> ds = detail::softmax_rows_backward<Scalar>(p, dp) * inv_scale;
                           dq.middleCols(h * dh, dh) = ds * kv.middleCols(h * dh, dh);
                           dk.middleCols(h * dh, dh) = ds.transpose() * qv.middleCols(h * dh, dh);
                         }
                         t.accumulate(iq, dq);
                         t.accumulate(ik, dk);
                         t.accumulate(iv, dv);
                       });
}

}  // namespace duonav::diffcore

#endif  // DUONAV_DIFFCORE_OPS_HPP
