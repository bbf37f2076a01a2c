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

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "duonav/diffcore/gradcheck.hpp"
#include "duonav/diffcore/ops.hpp"
#include "support.hpp"

namespace dc = duonav::diffcore;
using duonav::testing::compare_with_finite_differences;
using duonav::testing::DTape;
using duonav::testing::DTensor;
using duonav::testing::Mat;
using duonav::testing::random_matrix;

namespace {

constexpr int kSeeds = 20;
constexpr double kFdTolerance = 1e-5;

Mat mat(std::initializer_list<std::initializer_list<double>> rows) {
  Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST(Matmul, IdentityLeavesOperandUnchanged) {
  DTape tape;
  Mat a = mat({{1, 2}, {3, 4}});
  auto y = dc::matmul(tape.constant(Mat::Identity(2, 2)), tape.constant(a));
  EXPECT_EQ(y.value(), a);
}

TEST(Matmul, HandArithmetic) {
  DTape tape;
  auto y = dc::matmul(tape.constant(mat({{1, 2}, {3, 4}})), tape.constant(mat({{1}, {1}})));
  EXPECT_EQ(y.value(), mat({{3}, {7}}));
}

TEST(Matmul, InnerDimensionMismatchThrows) {
  DTape tape;
  EXPECT_THROW(dc::matmul(tape.constant(Mat::Ones(2, 3)), tape.constant(Mat::Ones(2, 3))), dc::DimensionError);
}

TEST(Matmul, ChainGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  auto chain = [](DTape&, const std::vector<DTensor>& x) { return dc::matmul(dc::matmul(x[0], x[1]), x[2]); };
  auto r = compare_with_finite_differences(chain, {random_matrix(3, 4, rng), random_matrix(4, 5, rng), random_matrix(5, 2, rng)}, rng);
  EXPECT_LT(r.max_rel_error, kFdTolerance);
  EXPECT_EQ(r.checked, 12 + 20 + 10);
}

TEST(Softmax, EqualLogitsAreUniform) {
  DTape tape;
  auto y = dc::softmax(tape.constant(Mat::Constant(1, 4, 2.5)));
  for (int j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(y.value()(0, j), 0.25);
}

TEST(Softmax, LogThree) {
  DTape tape;
  auto y = dc::softmax(tape.constant(mat({{0.0, std::log(3.0)}})));
  EXPECT_NEAR(y.value()(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(y.value()(0, 1), 0.75, 1e-15);
}

TEST(Softmax, MaskedEntriesAreExactlyZero) {
  DTape tape;
  dc::Mask m(1, 3);
  m << true, false, true;
  auto y = dc::softmax(tape.constant(mat({{1.0, 50.0, 1.0}})), 1, &m);
  EXPECT_EQ(y.value()(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(y.value()(0, 0), 0.5);
}

TEST(Softmax, FullyMaskedRowThrows) {
  DTape tape;
  dc::Mask m = dc::Mask::Constant(1, 2, false);
  EXPECT_THROW(dc::softmax(tape.constant(Mat::Zero(1, 2)), 1, &m), dc::DegenerateInputError);
}

TEST(Softmax, LargeLogitsStayFinite) {
  DTape tape;
  auto y = dc::softmax(tape.constant(mat({{1000.0, 999.0}})));
  EXPECT_NEAR(y.value().sum(), 1.0, 1e-15);
}

TEST(Softmax, SimplexAndShiftInvarianceOverSeeds) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(seed);
    Mat x = random_matrix(4, 7, rng, 5.0);
    DTape tape;
    auto y = dc::softmax(tape.constant(x));
    auto ys = dc::softmax(tape.constant((x.array() + 3.25).matrix()));
    for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(y.value().row(i).sum(), 1.0, 1e-9);
    EXPECT_GE(y.value().minCoeff(), 0.0);
    EXPECT_LE(y.value().maxCoeff(), 1.0);
    EXPECT_LT((y.value() - ys.value()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Softmax, GradientOnRandomTwoByFive) {
  std::mt19937_64 rng(5);
  auto f = [](DTape&, const std::vector<DTensor>& x) { return dc::softmax(x[0]); };
  EXPECT_LT(compare_with_finite_differences(f, {random_matrix(2, 5, rng)}, rng).max_rel_error, kFdTolerance);
}

TEST(LayerNorm, ConstantRowGivesBias) {
  DTape tape;
  Mat bias = mat({{0.5, -1.0, 2.0}});
  auto y = dc::layer_norm(tape.constant(Mat::Constant(2, 3, 7.0)), tape.constant(Mat::Ones(1, 3)), tape.constant(bias));
  EXPECT_EQ(y.value().row(0), bias);
  EXPECT_EQ(y.value().row(1), bias);
}

TEST(LayerNorm, TwoElementRow) {
  DTape tape;
  auto y = dc::layer_norm(tape.constant(mat({{1.0, 3.0}})), tape.constant(Mat::Ones(1, 2)), tape.constant(Mat::Zero(1, 2)));
  EXPECT_NEAR(y.value()(0, 0), -1.0, 1e-9);
  EXPECT_NEAR(y.value()(0, 1), 1.0, 1e-9);
}

TEST(LayerNorm, LengthOneAxisIsDegenerate) {
  DTape tape;
  EXPECT_THROW(dc::layer_norm(tape.constant(Mat::Ones(3, 1)), tape.constant(Mat::Ones(1, 1)), tape.constant(Mat::Zero(1, 1))),
               dc::DegenerateInputError);
}

TEST(LayerNorm, StandardisesRowsOverSeeds) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    std::mt19937_64 rng(100 + seed);
    DTape tape;
    auto y = dc::layer_norm(tape.constant(random_matrix(5, 9, rng, 3.0)), tape.constant(Mat::Ones(1, 9)),
                            tape.constant(Mat::Zero(1, 9)));
    for (Eigen::Index i = 0; i < 5; ++i) {
      EXPECT_NEAR(y.value().row(i).mean(), 0.0, 1e-7);
      EXPECT_NEAR(y.value().row(i).array().square().mean(), 1.0, 1e-7);
    }
  }
}

TEST(LayerNorm, GradientOnRandomThreeByEight) {
  std::mt19937_64 rng(8);
  auto f = [](DTape&, const std::vector<DTensor>& x) { return dc::layer_norm(x[0], x[1], x[2]); };
  auto r = compare_with_finite_differences(f, {random_matrix(3, 8, rng), random_matrix(1, 8, rng), random_matrix(1, 8, rng)}, rng);
  EXPECT_LT(r.max_rel_error, kFdTolerance);
}

TEST(Embedding, RepeatedIdGivesIdenticalRows) {
  DTape tape;
  std::mt19937_64 rng(1);
  std::vector<int> ids = {0, 0};
  auto y = dc::embedding_lookup(tape.constant(random_matrix(4, 3, rng)), std::span<const int>(ids));
  EXPECT_EQ(y.value().row(0), y.value().row(1));
}

TEST(Embedding, OutOfRangeIdThrows) {
  DTape tape;
  std::vector<int> ids = {4};
  EXPECT_THROW(dc::embedding_lookup(tape.constant(Mat::Zero(4, 3)), std::span<const int>(ids)), dc::IndexError);
  ids = {-1};
  EXPECT_THROW(dc::embedding_lookup(tape.constant(Mat::Zero(4, 3)), std::span<const int>(ids)), dc::IndexError);
}

TEST(Embedding, BackwardScatterAddsRepeatedRows) {
  DTape tape;
  auto table = tape.variable(Mat::Zero(3, 2));
  std::vector<int> ids = {2, 0, 2};
  tape.backward(dc::sum(dc::embedding_lookup(table, std::span<const int>(ids))));
  EXPECT_EQ(table.grad(), mat({{1, 1}, {0, 0}, {2, 2}}));
}

TEST(NllLoss, UniformOverVocabulary) {
  constexpr int kWords = 100, kLength = 4;
  DTape tape;
  auto probs = tape.constant(Mat::Constant(kLength + 1, kWords, 1.0 / kWords));
  std::vector<int> targets = {3, 17, 99, 0, 42};
  EXPECT_NEAR(dc::nll_loss(probs, std::span<const int>(targets)).item(), (kLength + 1) * std::log(100.0), 1e-9);
}

TEST(NllLoss, MatchesScalarRecomputation) {
  std::mt19937_64 rng(3);
  Mat logits = random_matrix(6, 9, rng);
  std::vector<int> targets = {0, 8, 4, 4, 1, 7};
  double expected = 0;
  for (int i = 0; i < 6; ++i) {
    double z = 0;
    for (int j = 0; j < 9; ++j) z += std::exp(logits(i, j));
    expected -= std::log(std::exp(logits(i, targets[static_cast<std::size_t>(i)])) / z);
  }
  DTape tape;
  auto x = tape.constant(logits);
  EXPECT_NEAR(dc::nll_loss(dc::softmax(x), std::span<const int>(targets)).item(), expected, 1e-12);
  EXPECT_NEAR(dc::cross_entropy(x, std::span<const int>(targets)).item(), expected, 1e-12);
}

TEST(NllLoss, ZeroProbabilityIsClampedAndCounted) {
  DTape tape;
  std::vector<int> targets = {1};
  dc::NllStats stats;
  auto loss = dc::nll_loss(tape.constant(mat({{1.0, 0.0}})), std::span<const int>(targets), &stats);
  EXPECT_EQ(stats.clamped, 1);
  EXPECT_NEAR(loss.item(), -std::log(1e-12), 1e-9);
}

TEST(CrossEntropy, MaskedTargetThrows) {
  DTape tape;
  dc::Mask m(1, 3);
  m << true, false, true;
  std::vector<int> targets = {1};
  EXPECT_THROW(dc::cross_entropy(tape.constant(Mat::Zero(1, 3)), std::span<const int>(targets), &m), dc::IndexError);
}

TEST(Tape, FanOutSumsPathGradients) {
  DTape tape;
  Mat x0 = mat({{0.5, -2.0, 3.0}});
  auto x = tape.variable(x0);
  tape.backward(dc::sum(dc::hadamard(x, x) + x));
  EXPECT_EQ(x.grad(), (2.0 * x0.array() + 1.0).matrix());
}

TEST(Tape, NonFiniteValueIsANumericError) {
  DTape tape;
  auto x = tape.constant(mat({{1.0, 0.0}}));
  EXPECT_THROW(dc::scale(x, std::numeric_limits<double>::infinity()), dc::NumericError);
  EXPECT_THROW(tape.constant(mat({{std::nan(""), 0.0}})), dc::NumericError);
}

TEST(Tape, BackwardNeedsScalar) {
  DTape tape;
  auto x = tape.variable(Mat::Ones(2, 2));
  EXPECT_THROW(tape.backward(x), dc::DimensionError);
}

TEST(Tape, IdenticalInputsGiveBitIdenticalOutputs) {
  auto run = [] {
    std::mt19937_64 rng(77);
    DTape tape;
    auto x = tape.variable(random_matrix(4, 8, rng));
    auto y = dc::attention(x, x, x, 2);
    auto loss = dc::sum(dc::gelu(dc::layer_norm(y, tape.constant(Mat::Ones(1, 8)), tape.constant(Mat::Zero(1, 8)))));
    tape.backward(loss);
    return std::make_pair(loss.item(), Mat(x.grad()));
  };
  auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Attention, ShapeErrors) {
  DTape tape;
  auto q = tape.constant(Mat::Ones(2, 6));
  EXPECT_THROW(dc::attention(q, tape.constant(Mat::Ones(0, 6)), tape.constant(Mat::Ones(0, 6)), 2), dc::DimensionError);
  EXPECT_THROW(dc::attention(q, q, q, 4), dc::DimensionError);
}

TEST(Attention, CausalMaskIsLowerTriangular) {
  dc::Mask m = dc::causal_mask(4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_EQ(m(i, j), j <= i);
}

// Every differentiable op against central differences on random instances.
struct OpCase {
  const char* name;
  duonav::testing::OpFn fn;
  std::vector<std::pair<int, int>> shapes;
};

class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  static const std::vector<int> ids = {1, 0, 3, 3};
  static const std::vector<int> targets = {2, 0, 4};
  static const std::vector<double> labels = {1.0, 0.0, 1.0};
  static dc::Mask mask = [] {
    dc::Mask m = dc::causal_mask(3);
    return m;
  }();
  static dc::Mask wide_mask = [] {
    dc::Mask m = dc::Mask::Constant(3, 5, true);
    m(0, 1) = m(2, 3) = m(1, 4) = false;
    return m;
  }();
  const std::vector<OpCase> cases = {
      {"matmul", [](DTape&, const std::vector<DTensor>& x) { return dc::matmul(x[0], x[1]); }, {{3, 4}, {4, 2}}},
      {"transpose", [](DTape&, const std::vector<DTensor>& x) { return dc::transpose(x[0]); }, {{3, 4}}},
      {"add", [](DTape&, const std::vector<DTensor>& x) { return dc::add(x[0], x[1]); }, {{3, 4}, {3, 4}}},
      {"add_broadcast", [](DTape&, const std::vector<DTensor>& x) { return dc::add(x[0], x[1]); }, {{3, 4}, {1, 4}}},
      {"sub", [](DTape&, const std::vector<DTensor>& x) { return dc::sub(x[0], x[1]); }, {{2, 5}, {2, 5}}},
      {"hadamard", [](DTape&, const std::vector<DTensor>& x) { return dc::hadamard(x[0], x[1]); }, {{3, 3}, {3, 3}}},
      {"scale", [](DTape&, const std::vector<DTensor>& x) { return dc::scale(x[0], 1.7); }, {{2, 3}}},
      {"gelu", [](DTape&, const std::vector<DTensor>& x) { return dc::gelu(x[0]); }, {{3, 5}}},
      {"sigmoid", [](DTape&, const std::vector<DTensor>& x) { return dc::sigmoid(x[0]); }, {{3, 5}}},
      {"layer_norm", [](DTape&, const std::vector<DTensor>& x) { return dc::layer_norm(x[0], x[1], x[2]); },
       {{3, 6}, {1, 6}, {1, 6}}},
      {"softmax_rows", [](DTape&, const std::vector<DTensor>& x) { return dc::softmax(x[0], 1, &wide_mask); }, {{3, 5}}},
      {"softmax_cols", [](DTape&, const std::vector<DTensor>& x) { return dc::softmax(x[0], 0); }, {{4, 3}}},
      {"embedding",
       [](DTape&, const std::vector<DTensor>& x) { return dc::embedding_lookup(x[0], std::span<const int>(ids)); },
       {{5, 3}}},
      {"concat_rows", [](DTape&, const std::vector<DTensor>& x) { return dc::concat_rows<double>({x[0], x[1], x[0]}); },
       {{2, 3}, {1, 3}}},
      {"concat_cols", [](DTape&, const std::vector<DTensor>& x) { return dc::concat_cols(x[0], x[1]); }, {{2, 3}, {2, 2}}},
      {"slice_rows", [](DTape&, const std::vector<DTensor>& x) { return dc::slice_rows(x[0], 1, 2); }, {{4, 3}}},
      {"mean_rows", [](DTape&, const std::vector<DTensor>& x) { return dc::mean_rows(x[0]); }, {{4, 3}}},
      {"attention", [](DTape&, const std::vector<DTensor>& x) { return dc::attention(x[0], x[1], x[2], 2, &mask); },
       {{3, 4}, {3, 4}, {3, 4}}},
      {"cross_attention", [](DTape&, const std::vector<DTensor>& x) { return dc::attention(x[0], x[1], x[2], 3); },
       {{2, 6}, {5, 6}, {5, 6}}},
      {"nll", [](DTape&, const std::vector<DTensor>& x) { return dc::nll_loss(dc::softmax(x[0]), std::span<const int>(targets)); },
       {{3, 5}}},
      {"cross_entropy",
       [](DTape&, const std::vector<DTensor>& x) { return dc::cross_entropy(x[0], std::span<const int>(targets), &wide_mask); },
       {{3, 5}}},
      {"bce",
       [](DTape&, const std::vector<DTensor>& x) { return dc::bce_with_logits(x[0], std::span<const double>(labels)); },
       {{3, 1}}},
  };
  const int seed = GetParam();
  for (const auto& c : cases) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(1000 * seed + 17));
    std::vector<Mat> inputs;
    for (auto [r, k] : c.shapes) inputs.push_back(random_matrix(r, k, rng));
    auto res = compare_with_finite_differences(c.fn, inputs, rng);
    EXPECT_LT(res.max_rel_error, kFdTolerance) << c.name << " seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpGradient, ::testing::Range(0, kSeeds));

TEST(Gradcheck, QuadraticIsExact) {
  dc::Parameter<double> w("w", Mat(mat({{0.3, -1.2, 2.5, 0.0}})), 0);
  std::vector<dc::Parameter<double>*> params = {&w};
  auto f = [&](DTape& tape) {
    auto x = tape.parameter(w);
    return dc::sum(dc::hadamard(x, x));
  };
  dc::GradcheckOptions opts;
  opts.tolerance = 1e-9;
  auto rep = dc::gradcheck<double>(f, params, opts);
  EXPECT_TRUE(rep.passed) << rep.max_rel_error;
  EXPECT_EQ(w.grad, (2.0 * w.value).eval());
}

TEST(Gradcheck, FivePointStencilIsExactOnCubic) {
  dc::Parameter<double> w("w", Mat(mat({{0.7, -1.1}})), 0);
  std::vector<dc::Parameter<double>*> params = {&w};
  auto f = [&](DTape& tape) {
    auto x = tape.parameter(w);
    return dc::sum(dc::hadamard(dc::hadamard(x, x), x));
  };
  dc::GradcheckOptions opts;
  opts.order = 4;
  opts.step = 1e-2;
  opts.tolerance = 1e-10;
  EXPECT_TRUE(dc::gradcheck<double>(f, params, opts).passed);
}

TEST(Gradcheck, CorruptedBackwardIsReported) {
  dc::Parameter<double> w("w", Mat(mat({{0.3, -1.2, 2.5}})), 0);
  std::vector<dc::Parameter<double>*> params = {&w};
  auto f = [&](DTape& tape) {
    auto x = tape.parameter(w);
    Mat y = x.value().array().square().matrix();
    auto ix = x.id();
    // Square with a backward that forgets the factor of two.
    auto sq = tape.push(std::move(y), true, [ix](DTape& t, const Mat& g) {
      t.accumulate(ix, g.cwiseProduct(t.value(ix)));
    });
    return dc::sum(sq);
  };
  auto rep = dc::gradcheck<double>(f, params);
  EXPECT_FALSE(rep.passed);
  EXPECT_EQ(rep.worst, "w");
  EXPECT_NEAR(rep.max_rel_error, 1.0 / 3.0, 1e-6);
}

TEST(Gradcheck, SubsamplesCoordinates) {
  dc::Parameter<double> w("w", Mat::Ones(10, 10), 0);
  std::vector<dc::Parameter<double>*> params = {&w};
  auto f = [&](DTape& tape) { return dc::sum(tape.parameter(w)); };
  dc::GradcheckOptions opts;
  opts.max_entries_per_param = 7;
  auto rep = dc::gradcheck<double>(f, params, opts);
  ASSERT_EQ(rep.entries.size(), 1u);
  EXPECT_EQ(rep.entries[0].checked, 7);
}

TEST(Gradcheck, RejectsBadOptions) {
  dc::Parameter<double> w("w", Mat::Ones(1, 1), 0);
  std::vector<dc::Parameter<double>*> params = {&w};
  auto f = [&](DTape& tape) { return dc::sum(tape.parameter(w)); };
  dc::GradcheckOptions opts;
  opts.order = 3;
  EXPECT_THROW(dc::gradcheck<double>(f, params, opts), std::invalid_argument);
}

TEST(FiniteDifferenceHarness, CatchesBrokenBackward) {
  std::mt19937_64 rng(4);
  auto broken = [](DTape& tape, const std::vector<DTensor>& x) {
    auto ix = x[0].id();
    Mat y = x[0].value().array().square().matrix();
    return tape.push(std::move(y), x[0].requires_grad(), [ix](DTape& t, const Mat& g) { t.accumulate(ix, g); });
  };
  EXPECT_GT(compare_with_finite_differences(broken, {random_matrix(2, 3, rng)}, rng).max_rel_error, 0.1);
}
