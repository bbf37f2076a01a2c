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
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "duonav/agent/navigator.hpp"
#include "fixtures.hpp"

namespace ag = duonav::agent;
namespace dc = duonav::diffcore;
using duonav::Real;
using duonav::testing::param;
using duonav::testing::set_all;
using duonav::testing::SmallCorpus;
using RMat = dc::Matrix<Real>;

namespace {

constexpr int kSeeds = 20;

// Hand-built model over K = 2 views and 3-dim visual features.
ag::ModelConfig hand_config(int width = 4, int heads = 2) {
  ag::ModelConfig mc;
  mc.attention.width = width;
  mc.attention.heads = heads;
  mc.attention.language_encoder_depth = mc.attention.route_encoder_depth = 1;
  mc.attention.language_decoder_depth = mc.attention.route_decoder_depth = 1;
  mc.views = 2;
  mc.visual_dim = 3;
  mc.vocab_size = 7;
  mc.horizon = 6;
  mc.max_text_length = 12;
  return mc;
}

ag::Panorama hand_panorama(std::mt19937_64& rng, std::vector<bool> navigable = {true, true}) {
  std::normal_distribution<double> n;
  ag::Panorama p;
  for (std::size_t k = 0; k < navigable.size(); ++k) {
    ag::ViewObservation v;
    v.visual = {n(rng), n(rng), n(rng)};
    v.orientation = ag::ViewObservation::orientation_from(n(rng), 0.0);
    p.views.push_back(v);
  }
  p.navigable = std::move(navigable);
  return p;
}

ag::Route hand_route(std::mt19937_64& rng, int steps) {
  ag::Route r;
  for (int t = 0; t < steps; ++t) r.steps.push_back({hand_panorama(rng), static_cast<int>(rng() % 2)});
  r.terminal = hand_panorama(rng);
  return r;
}

void randomize(ag::Navigator& nav, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  nav.parameters().for_each([&](ag::Param& p) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<Real>(n(rng));
  });
}

RMat features(const ag::Panorama& p, int view) {
  RMat v(1, 3), o(1, 4);
  for (int j = 0; j < 3; ++j) v(0, j) = static_cast<Real>(p.views[static_cast<std::size_t>(view)].visual[static_cast<std::size_t>(j)]);
  for (int j = 0; j < 4; ++j) o(0, j) = static_cast<Real>(p.views[static_cast<std::size_t>(view)].orientation[static_cast<std::size_t>(j)]);
  RMat out(1, 0);
  out.resize(1, v.cols() + o.cols());
  out << v, o;
  return out;
}

double max_abs(const RMat& a, const RMat& b) { return static_cast<double>((a - b).cwiseAbs().maxCoeff()); }

// Straight-line forward pass written against named parameters only.
class Reference {
 public:
  explicit Reference(ag::Navigator& nav) : nav_(nav), heads_(nav.config().attention.heads) {}

  RMat p(const std::string& name) const { return param(nav_, name).value; }

  RMat linear(const RMat& x, const std::string& name, bool bias = true) const {
    RMat y = x * p(name + ".weight");
    if (bias) y.rowwise() += p(name + ".bias").row(0);
    return y;
  }

  RMat layer_norm(const RMat& x, const std::string& name) const {
    RMat y(x.rows(), x.cols());
    const RMat g = p(name + ".gain"), b = p(name + ".bias");
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Real mean = x.row(i).mean();
      const Real var = (x.row(i).array() - mean).square().mean();
      y.row(i) = ((x.row(i).array() - mean) / std::sqrt(var + Real(1e-10)) * g.row(0).array() + b.row(0).array()).matrix();
    }
    return y;
  }

  RMat attention(const RMat& qin, const RMat& kv, const std::string& name, bool causal = false) const {
    const RMat q = linear(qin, name + ".query"), k = linear(kv, name + ".key", false), v = linear(kv, name + ".value");
    const Eigen::Index dh = q.cols() / heads_;
    RMat out(q.rows(), q.cols());
    for (int h = 0; h < heads_; ++h) {
      RMat s = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose() / std::sqrt(Real(dh));
      for (Eigen::Index i = 0; i < s.rows(); ++i) {
        Real z = 0;
        for (Eigen::Index j = 0; j < s.cols(); ++j) {
          s(i, j) = (causal && j > i) ? Real(0) : std::exp(s(i, j));
          z += s(i, j);
        }
        s.row(i) /= z;
      }
      out.middleCols(h * dh, dh) = s * v.middleCols(h * dh, dh);
    }
    return linear(out, name + ".output");
  }

  static RMat gelu(const RMat& x) {
    return x.unaryExpr([](Real v) { return Real(0.5) * v * (Real(1) + std::erf(v / std::sqrt(Real(2)))); });
  }

  RMat block(const RMat& x, const RMat* ctx, const std::string& prefix, bool causal) const {
    RMat h = x;
    if (ctx) h = h + attention(layer_norm(h, prefix + ".cross.norm"), *ctx, prefix + ".cross.attn");
    const RMat n = layer_norm(h, prefix + ".self.norm");
    h = h + attention(n, n, prefix + ".self.attn", causal);
    return h + linear(gelu(linear(layer_norm(h, prefix + ".ffn.norm"), prefix + ".ffn.expand")), prefix + ".ffn.contract");
  }

  RMat stack(const std::string& base, const RMat& x, const RMat* ctx, bool causal = false) const {
    return layer_norm(block(x, ctx, base + ".block0", causal), base + ".final_norm");
  }

  RMat head(const RMat& x, const std::string& name) const { return linear(gelu(linear(x, name + ".in")), name + ".out"); }

  RMat observation_tokens(const ag::Panorama& pano, int t) const {
    RMat out(pano.size(), nav_.width());
    for (int k = 0; k < pano.size(); ++k) {
      const RMat f = features(pano, k);
      out.row(k) = linear(f.leftCols(3), "token.visual").row(0) + linear(f.rightCols(4), "token.orientation").row(0) +
                   p("token.temporal").row(t) + p("token.type_observation").row(0);
    }
    return out;
  }

  RMat action_token(const ag::Panorama& pano, int a, int t) const {
    const RMat f = features(pano, a);
    return linear(f.leftCols(3), "token.visual") + linear(f.rightCols(4), "token.orientation") +
           p("token.temporal").row(t) + p("token.type_action");
  }

  RMat compress(const RMat& a, const RMat& obs) const {
    return a + attention(layer_norm(a, "route_encoder.compress.norm"), obs, "route_encoder.compress.attn");
  }

  RMat language(const std::vector<int>& ids, int first, bool causal) const {
    RMat x(static_cast<Eigen::Index>(ids.size()), nav_.width());
    for (std::size_t i = 0; i < ids.size(); ++i)
      x.row(static_cast<Eigen::Index>(i)) =
          p("language.word_embedding").row(ids[i]) + p("language.position_embedding").row(first + static_cast<int>(i));
    return stack("language_encoder", x, nullptr, causal);
  }

 private:
  ag::Navigator& nav_;
  int heads_;
};

}  // namespace

TEST(ViewObservation, OrientationOnUnitCircle) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 1000; ++i) {
    auto o = ag::ViewObservation::orientation_from(u(rng), u(rng));
    EXPECT_NEAR(o[0] * o[0] + o[1] * o[1], 1.0, 1e-9);
    EXPECT_NEAR(o[2] * o[2] + o[3] * o[3], 1.0, 1e-9);
  }
}

TEST(Vocabulary, EncodeDecodeAndUnknown) {
  ag::Vocabulary v({"walk", "left", "door"});
  EXPECT_EQ(v.size(), 7);
  EXPECT_EQ(v.word_count(), 3);
  auto ids = v.encode("walk left past door");
  ASSERT_EQ(ids.size(), 4u);
  EXPECT_EQ(ids[2], ag::Vocabulary::kUnk);
  EXPECT_EQ(v.decode(std::vector<int>{v.id("walk"), v.id("door")}), "walk door");
}

TEST(Instruction, FramingAndValidation) {
  auto ins = ag::Instruction::frame(std::vector<int>{5, 6});
  EXPECT_EQ(ins.tokens, (std::vector<int>{ag::Vocabulary::kBos, 5, 6, ag::Vocabulary::kEos}));
  EXPECT_EQ(ins.words(), (std::vector<int>{5, 6}));
  EXPECT_EQ(ins.length(), 2);
  EXPECT_NO_THROW(ins.validate(7));
  EXPECT_THROW(ins.validate(6), std::logic_error);
  ag::Instruction bad{{5, 6, ag::Vocabulary::kEos}};
  EXPECT_THROW(bad.validate(7), std::logic_error);
}

TEST(Distribution, Validation) {
  ag::Distribution d{{0.25, 0.75}};
  EXPECT_NO_THROW(d.validate());
  EXPECT_EQ(d.argmax(), 1);
  d.probs = {0.5, 0.6};
  EXPECT_THROW(d.validate(), std::logic_error);
}

TEST(Tokens, ZeroParametersGiveZeroTokens) {
  ag::Navigator nav(hand_config(), 1);
  set_all(nav.parameters(), 0.0);
  std::mt19937_64 rng(2);
  auto pano = hand_panorama(rng);
  ag::Tape tape(false);
  EXPECT_EQ(nav.observation_tokens(tape, pano, 1).value(), RMat::Zero(2, 4));
  EXPECT_EQ(nav.action_token(tape, pano, 0, 1).value(), RMat::Zero(1, 4));
}

TEST(Tokens, IdenticalViewsGiveIdenticalTokens) {
  ag::Navigator nav(hand_config(), 3);
  std::mt19937_64 rng(4);
  auto pano = hand_panorama(rng);
  pano.views[1] = pano.views[0];
  ag::Tape tape(false);
  auto o = nav.observation_tokens(tape, pano, 2).value();
  EXPECT_EQ(o.row(0), o.row(1));
}

TEST(Tokens, MatchFourTermSum) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    ag::Navigator nav(hand_config(), 5);
    randomize(nav, static_cast<std::uint64_t>(seed));
    Reference ref(nav);
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    auto pano = hand_panorama(rng);
    const int t = seed % 6;
    ag::Tape tape(false);
    const RMat o = nav.observation_tokens(tape, pano, t).value();
    const RMat a = nav.action_token(tape, pano, 1, t).value();
    EXPECT_LT(max_abs(o, ref.observation_tokens(pano, t)), 1e-12);
    EXPECT_LT(max_abs(a, ref.action_token(pano, 1, t)), 1e-12);
    // a_t and o_{t,a} differ by the type vectors only.
    const RMat diff = ref.p("token.type_action") - ref.p("token.type_observation");
    EXPECT_LT(max_abs(a - o.row(1), diff), 1e-12);
  }
}

TEST(Tokens, Errors) {
  ag::Navigator nav(hand_config(), 6);
  std::mt19937_64 rng(7);
  auto pano = hand_panorama(rng, {true, false});
  ag::Tape tape(false);
  EXPECT_THROW(nav.action_token(tape, pano, 1, 0), ag::ActionError);
  EXPECT_THROW(nav.observation_tokens(tape, pano, 6), ag::HorizonError);
}

TEST(RouteState, SingleViewTakesTheValueProjection) {
  auto mc = hand_config();
  mc.views = 1;
  ag::Navigator nav(mc, 8);
  randomize(nav, 9);
  Reference ref(nav);
  std::mt19937_64 rng(10);
  auto pano = hand_panorama(rng, {true});
  ag::Tape tape(false);
  auto obs = nav.observation_tokens(tape, pano, 0);
  auto act = nav.action_token(tape, pano, 0, 0);
  const RMat r = nav.compress_route_state(tape, act, obs).value();
  const RMat expected = act.value() + ref.linear(ref.linear(obs.value(), "route_encoder.compress.attn.value"),
                                                 "route_encoder.compress.attn.output");
  EXPECT_LT(max_abs(r, expected), 1e-12);
}

TEST(RouteState, DuplicatedObservationsLeaveStateUnchanged) {
  ag::Navigator nav(hand_config(), 11);
  randomize(nav, 12);
  std::mt19937_64 rng(13);
  auto pano = hand_panorama(rng);
  ag::Tape tape(false);
  auto obs = nav.observation_tokens(tape, pano, 0);
  auto act = nav.action_token(tape, pano, 0, 0);
  auto doubled = dc::concat_rows<Real>({obs, obs});
  EXPECT_LT(max_abs(nav.compress_route_state(tape, act, obs).value(), nav.compress_route_state(tape, act, doubled).value()),
            1e-12);
}

TEST(RouteState, MatchesExplicitFormulaOnThreeViews) {
  auto mc = hand_config();
  mc.views = 3;
  ag::Navigator nav(mc, 14);
  randomize(nav, 15);
  Reference ref(nav);
  std::mt19937_64 rng(16);
  auto pano = hand_panorama(rng, {true, false, true});
  ag::Tape tape(false);
  auto obs = nav.observation_tokens(tape, pano, 1);
  auto act = nav.action_token(tape, pano, 2, 1);
  EXPECT_LT(max_abs(nav.compress_route_state(tape, act, obs).value(), ref.compress(act.value(), obs.value())), 1e-12);
}

TEST(RouteEncoder, FollowingShapes) {
  ag::Navigator nav(hand_config(), 17);
  std::mt19937_64 rng(18);
  auto route = hand_route(rng, 4);
  for (int t = 0; t <= 4; ++t) {
    ag::Route history;
    history.steps.assign(route.steps.begin(), route.steps.begin() + t);
    ag::Tape tape(false);
    auto enc = nav.encode_route_following(tape, history, *route.terminal);
    EXPECT_EQ(enc.rows(), t + 2);
    EXPECT_EQ(enc.cols(), 4);
  }
}

TEST(RouteEncoder, HistoryOrderMatters) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    ag::Navigator nav(hand_config(), 19);
    randomize(nav, static_cast<std::uint64_t>(100 + seed));
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    auto route = hand_route(rng, 3);
    ag::Route swapped = route;
    std::swap(swapped.steps[0], swapped.steps[2]);
    ag::Tape tape(false);
    const RMat a = nav.encode_route_following(tape, route, *route.terminal).value();
    const RMat b = nav.encode_route_following(tape, swapped, *route.terminal).value();
    EXPECT_GT(max_abs(a.bottomRows(2), b.bottomRows(2)), 1e-9) << "seed " << seed;
  }
}

TEST(RouteEncoder, GenerationShapesAndContext) {
  ag::Navigator nav(hand_config(), 20);
  randomize(nav, 21);
  std::mt19937_64 rng(22);
  auto route = hand_route(rng, 4);
  ag::Route prefix = route;
  prefix.steps.resize(2);
  ag::Tape tape(false);
  const RMat full = nav.encode_route_generation(tape, route).value();
  const RMat part = nav.encode_route_generation(tape, prefix).value();
  EXPECT_EQ(full.rows(), 4);
  EXPECT_EQ(part.rows(), 2);
  EXPECT_GT(max_abs(full.topRows(2), part), 1e-9);
  prefix.steps.resize(1);
  EXPECT_EQ(nav.encode_route_generation(tape, prefix).rows(), 1);
  prefix.steps.clear();
  EXPECT_THROW(nav.encode_route_generation(tape, prefix), std::invalid_argument);
}

TEST(RouteEncoder, FollowingModeIgnoresFuturePanoramas) {
  ag::Navigator nav(hand_config(), 23);
  randomize(nav, 24);
  std::mt19937_64 rng(25);
  auto route = hand_route(rng, 4);
  ag::Route history;
  history.steps.assign(route.steps.begin(), route.steps.begin() + 2);
  ag::Tape tape(false);
  const RMat before = nav.encode_route_following(tape, history, route.steps[2].observation).value();
  route.steps[3].observation = hand_panorama(rng);
  *route.terminal = hand_panorama(rng);
  const RMat after = nav.encode_route_following(tape, history, route.steps[2].observation).value();
  EXPECT_EQ(before, after);
}

TEST(LanguageEncoder, CausalAndBidirectionalModes) {
  ag::Navigator nav(hand_config(), 26);
  randomize(nav, 27);
  std::vector<int> ids = {2, 4, 5, 6, 4};
  ag::Tape tape(false);
  const RMat causal = nav.encode_language(tape, ids, 0, ag::LanguageMode::Causal).value();
  const RMat bidir = nav.encode_language(tape, ids, 0, ag::LanguageMode::Bidirectional).value();
  ids.back() = 5;
  const RMat causal2 = nav.encode_language(tape, ids, 0, ag::LanguageMode::Causal).value();
  const RMat bidir2 = nav.encode_language(tape, ids, 0, ag::LanguageMode::Bidirectional).value();
  EXPECT_EQ(causal.topRows(4), causal2.topRows(4));
  EXPECT_NE(bidir.row(0), bidir2.row(0));

  std::vector<int> one = {4};
  EXPECT_EQ(nav.encode_language(tape, one, 1, ag::LanguageMode::Causal).value(),
            nav.encode_language(tape, one, 1, ag::LanguageMode::Bidirectional).value());
  EXPECT_THROW(nav.encode_language(tape, std::vector<int>{}, 0, ag::LanguageMode::Causal), std::invalid_argument);
  EXPECT_THROW(nav.encode_language(tape, ids, 10, ag::LanguageMode::Causal), ag::HorizonError);
}

TEST(LanguageEncoder, MatchesStraightLineForward) {
  ag::Navigator nav(hand_config(), 28);
  randomize(nav, 29);
  Reference ref(nav);
  const std::vector<int> ids = {2, 6, 4, 5};
  ag::Tape tape(false);
  EXPECT_LT(max_abs(nav.encode_language(tape, ids, 0, ag::LanguageMode::Causal).value(), ref.language(ids, 0, true)), 1e-12);
  EXPECT_LT(max_abs(nav.encode_language(tape, ids, 1, ag::LanguageMode::Bidirectional).value(), ref.language(ids, 1, false)),
            1e-12);
}

TEST(DecodeAction, ZeroHeadIsUniformOverLegalChoices) {
  auto mc = hand_config();
  mc.views = 4;
  ag::Navigator nav(mc, 30);
  randomize(nav, 31);
  auto& head = nav.action_head();
  head.output_layer().weight().value.setZero();
  head.output_layer().bias().value.setZero();
  std::mt19937_64 rng(32);
  auto pano = hand_panorama(rng, {true, false, true, false});
  ag::Tape tape(false);
  auto route = nav.encode_route_following(tape, nullptr, pano, 0);
  auto lang = nav.encode_language(tape, std::vector<int>{4, 5}, 1, ag::LanguageMode::Bidirectional);
  auto d = nav.decode_action(tape, route, lang, pano, 0);
  ASSERT_EQ(d.size(), 5);
  const std::vector<double> expected = {1.0 / 3, 0.0, 1.0 / 3, 0.0, 1.0 / 3};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(d.probs[static_cast<std::size_t>(i)], expected[static_cast<std::size_t>(i)], 1e-15);
  EXPECT_EQ(d.probs[1], 0.0);
  EXPECT_EQ(d.probs[3], 0.0);
}

TEST(DecodeAction, SimplexAndSupportOverSeeds) {
  auto mc = hand_config();
  mc.views = 5;
  mc.min_steps = 1;
  ag::Navigator nav(mc, 33);
  for (int seed = 0; seed < kSeeds; ++seed) {
    randomize(nav, static_cast<std::uint64_t>(200 + seed), 1.0);
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    std::vector<bool> nav_mask(5);
    for (auto&& b : nav_mask) b = rng() % 2;
    nav_mask[rng() % 5] = true;
    auto pano = hand_panorama(rng, nav_mask);
    const int t = seed % 3;
    ag::Tape tape(false);
    auto route = nav.encode_route_following(tape, nullptr, pano, t);
    auto lang = nav.encode_language(tape, std::vector<int>{4, 6, 5}, 1, ag::LanguageMode::Bidirectional);
    auto d = nav.decode_action(tape, route, lang, pano, t);
    EXPECT_NEAR(d.sum(), 1.0, 1e-9);
    int support = 0;
    for (int k = 0; k < 5; ++k) {
      if (!nav_mask[static_cast<std::size_t>(k)]) {
        EXPECT_EQ(d.probs[static_cast<std::size_t>(k)], 0.0);
      }
      support += d.probs[static_cast<std::size_t>(k)] > 0;
    }
    EXPECT_EQ(support, pano.navigable_count());
    if (t < 1) {
      EXPECT_EQ(d.probs[5], 0.0);
    } else {
      EXPECT_GT(d.probs[5], 0.0);
    }
  }
}

TEST(DecodeAction, NoLegalChoiceIsAPolicyError) {
  auto mc = hand_config();
  mc.min_steps = 2;
  ag::Navigator nav(mc, 34);
  std::mt19937_64 rng(35);
  auto pano = hand_panorama(rng, {false, false});
  ag::Tape tape(false);
  auto route = nav.encode_route_following(tape, nullptr, pano, 0);
  auto lang = nav.encode_language(tape, std::vector<int>{4}, 1, ag::LanguageMode::Bidirectional);
  EXPECT_THROW(nav.decode_action(tape, route, lang, pano, 0), ag::PolicyError);
  EXPECT_NO_THROW(nav.decode_action(tape, route, lang, pano, 2));
}

TEST(DecodeAction, MatchesStraightLineForwardOnTinyModel) {
  ag::Navigator nav(hand_config(2, 1), 36);
  randomize(nav, 37);
  Reference ref(nav);
  std::mt19937_64 rng(38);
  auto pano = hand_panorama(rng);
  const std::vector<int> words = {4, 6, 5};
  ag::Tape tape(false);
  auto route = nav.encode_route_following(tape, nullptr, pano, 0);
  auto lang = nav.encode_instruction(tape, ag::Instruction::frame(words));
  auto d = nav.decode_action(tape, route, lang, pano, 0);

  const RMat r = ref.stack("route_encoder", ref.observation_tokens(pano, 0), nullptr);
  const RMat x = ref.language(words, 1, false);
  RMat query(3, 2);
  query << r, ref.p("action.stop_embedding");
  const RMat logits = ref.head(ref.stack("route_decoder", query, &x), "action.head");
  const RMat probs = logits.array().exp() / logits.array().exp().sum();
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(d.probs[static_cast<std::size_t>(i)], probs(i, 0), 1e-12);
}

TEST(DecodeWord, SimplexZeroHeadAndIncrementalEquivalence) {
  ag::Navigator nav(hand_config(), 39);
  randomize(nav, 40);
  std::mt19937_64 rng(41);
  auto route = hand_route(rng, 3);
  const std::vector<int> tokens = {2, 4, 6, 5, 4, 3};
  ag::Tape tape(false);
  auto renc = nav.encode_route_generation(tape, route);
  const RMat full = nav.word_logits(tape, nav.encode_language(tape, tokens, 0, ag::LanguageMode::Causal), renc).value();
  for (std::size_t l = 1; l <= tokens.size(); ++l) {
    std::vector<int> prefix(tokens.begin(), tokens.begin() + static_cast<long>(l));
    auto lang = nav.encode_language(tape, prefix, 0, ag::LanguageMode::Causal);
    const RMat inc = nav.word_logits(tape, lang, renc).value();
    EXPECT_LT(max_abs(inc.bottomRows(1), full.row(static_cast<Eigen::Index>(l - 1))), 1e-9);
    auto q = nav.decode_word(tape, lang, renc);
    EXPECT_NEAR(q.sum(), 1.0, 1e-9);
  }
  nav.word_head().output_layer().weight().value.setZero();
  nav.word_head().output_layer().bias().value.setZero();
  auto q = nav.decode_word(tape, nav.encode_language(tape, tokens, 0, ag::LanguageMode::Causal), renc);
  for (double v : q.probs) EXPECT_NEAR(v, 1.0 / 7, 1e-15);
}

TEST(GenerateInstruction, EosBiasGivesEmptyInstructionAndCapHolds) {
  ag::Navigator nav(hand_config(), 42);
  std::mt19937_64 rng(43);
  auto route = hand_route(rng, 2);
  auto& out = nav.word_head().output_layer();
  out.weight().value.setZero();
  out.bias().value.setZero();
  out.bias().value(0, ag::Vocabulary::kEos) = 10;
  EXPECT_EQ(nav.generate_instruction(route, 10).length(), 0);
  out.bias().value(0, ag::Vocabulary::kEos) = 0;
  out.bias().value(0, 5) = 10;
  ag::GenerationTrace trace;
  auto ins = nav.generate_instruction(route, 6, &trace);
  EXPECT_EQ(ins.words(), std::vector<int>(6, 5));
  EXPECT_EQ(trace.steps.size(), 6u);
  EXPECT_THROW(nav.generate_instruction(route, 12), ag::HorizonError);
}

namespace {

// Line of nodes 0 - 1 - 2 - ...; view 0 moves forward, view 1 moves back.
class LineWorld : public ag::PanoramaSource {
 public:
  explicit LineWorld(int n) : n_(n) {}
  ag::Panorama panorama(int node) const override {
    std::mt19937_64 rng(static_cast<std::uint64_t>(node));
    return hand_panorama(rng, {node + 1 < n_, node > 0});
  }
  int step(int node, int view) const override {
    if (!panorama(node).is_navigable(view)) throw ag::ActionError("blocked");
    return view == 0 ? node + 1 : node - 1;
  }

 private:
  int n_;
};

}  // namespace

TEST(FollowInstruction, ForcedStopGivesEmptyRoute) {
  ag::Navigator nav(hand_config(), 44);
  set_all(nav.parameters(), 0.0);
  // Only the STOP row carries a signal through the zeroed stacks.
  param(nav, "route_decoder.final_norm.gain").value.setOnes();
  param(nav, "action.stop_embedding").value << 1, -1, 1, -1;
  param(nav, "action.head.in.weight").value.setIdentity();
  param(nav, "action.head.out.weight").value.setOnes();
  LineWorld world(5);
  auto res = nav.follow_instruction(ag::Instruction::frame(std::vector<int>{4}), world, 0, 4);
  EXPECT_TRUE(res.stopped);
  EXPECT_EQ(res.route.length(), 0);
  EXPECT_EQ(res.nodes, std::vector<int>{0});
  ASSERT_EQ(res.decisions.size(), 1u);
  EXPECT_EQ(res.decisions[0].argmax(), nav.stop_index());
}

TEST(FollowInstruction, RouteLengthNeverExceedsMaxSteps) {
  auto mc = hand_config();
  mc.horizon = 12;
  ag::Navigator nav(mc, 45);
  LineWorld world(30);
  for (int seed = 0; seed < kSeeds; ++seed) {
    randomize(nav, static_cast<std::uint64_t>(300 + seed), 1.0);
    const int max_steps = seed % 6;
    auto res = nav.follow_instruction(ag::Instruction::frame(std::vector<int>{4, 5}), world, 10, max_steps);
    EXPECT_LE(res.route.length(), max_steps);
    EXPECT_EQ(res.nodes.size(), static_cast<std::size_t>(res.route.length() + 1));
    EXPECT_NE(res.stopped, res.truncated);
    if (res.truncated) {
      EXPECT_EQ(res.route.length(), max_steps);
    }
    auto again = nav.follow_instruction(ag::Instruction::frame(std::vector<int>{4, 5}), world, 10, max_steps);
    EXPECT_EQ(res.nodes, again.nodes);
  }
  EXPECT_THROW(nav.follow_instruction(ag::Instruction::frame(std::vector<int>{4}), world, 0, 12), ag::HorizonError);
}

TEST(ItmScore, RangeAndZeroHead) {
  ag::Navigator nav(hand_config(), 46);
  randomize(nav, 47);
  std::mt19937_64 rng(48);
  auto route = hand_route(rng, 3);
  auto ins = ag::Instruction::frame(std::vector<int>{4, 5, 6});
  const double s = nav.itm_score(ins, route);
  EXPECT_GT(s, 0.0);
  EXPECT_LT(s, 1.0);
  nav.matching_head().output_layer().weight().value.setZero();
  nav.matching_head().output_layer().bias().value.setZero();
  EXPECT_EQ(nav.itm_score(ins, route), 0.5);
}

TEST(Navigator, SingleParameterSetWithUniqueNames) {
  SmallCorpus corpus(2, 49);
  ag::Navigator nav(duonav::testing::small_model(corpus.world), 50);
  std::set<std::string> names;
  std::set<const void*> storage;
  nav.parameters().for_each([&](const ag::Param& p) {
    EXPECT_TRUE(names.insert(p.name).second) << p.name;
    EXPECT_TRUE(storage.insert(p.value.data()).second) << p.name;
  });
  EXPECT_EQ(nav.parameters().find("language.word_embedding")->group, ag::kLanguageEncoderGroup);
  EXPECT_EQ(nav.parameters().find("route_encoder.compress.attn.query.weight")->group, ag::kRouteEncoderGroup);
  EXPECT_EQ(nav.parameters().find("action.stop_embedding")->group, ag::kRouteDecoderGroup);
  EXPECT_EQ(nav.parameters().find("word.head.out.weight")->group, ag::kLanguageDecoderGroup);
  EXPECT_EQ(nav.parameters().find("route_encoder.block0.self.attn.key.bias"), nullptr);
}

TEST(Navigator, SameSeedSameParameters) {
  SmallCorpus corpus(2, 51);
  ag::Navigator a(duonav::testing::small_model(corpus.world), 52), b(duonav::testing::small_model(corpus.world), 52);
  for (std::size_t i = 0; i < a.parameters().size(); ++i) EXPECT_EQ(a.parameters()[i].value, b.parameters()[i].value);
}
