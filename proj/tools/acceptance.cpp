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

// Acceptance gate: one PASS/FAIL line per criterion.
//
//   duonav_acceptance               all criteria
//   duonav_acceptance --only 4      a single criterion
//   duonav_acceptance --quick-benchmark
//                                   criterion 5 on a reduced schedule

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "benchmark.hpp"
#include "duonav/agent/navigator.hpp"
#include "duonav/env/dataset.hpp"
#include "duonav/eval/path_metrics.hpp"
#include "duonav/eval/text_metrics.hpp"
#include "duonav/train/gradient_check.hpp"
#include "duonav/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace duonav;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

/// Routes and instructions drawn from one seeded world.
struct Pairs {
  env::World world;
  std::vector<env::PairRecord> records;
  std::vector<env::Sample> samples;
  std::vector<train::Example> examples;

  Pairs(const env::DatasetConfig& dc, std::uint64_t world_seed, int count, std::uint64_t data_seed)
      : world(dc, world_seed), records(env::make_split(world, env::Split::Train, count, data_seed)) {
    samples = env::resolve(world, records);
    for (const auto& s : samples) examples.push_back({&s.route, &s.record->instruction});
  }
};

agent::ModelConfig model_config(const env::World& w, int width, int heads) {
  agent::ModelConfig mc;
  mc.attention.width = width;
  mc.attention.heads = heads;
  mc.views = w.config().world.views;
  mc.visual_dim = w.config().world.visual_dim;
  mc.vocab_size = w.vocabulary().size();
  return mc;
}

// 1 ------------------------------------------------------------------------

Outcome gradient_integrity() {
  constexpr double kTolerance = 1e-4;
  constexpr double kBudget = 60.0;
  if (sizeof(Real) != sizeof(double)) return {false, "needs a double-precision build"};
  const auto t0 = Clock::now();
  env::DatasetConfig dc;
  dc.train_graphs = 1;
  dc.unseen_graphs = 1;
  dc.world.nodes = 12;
  dc.min_route_steps = 2;
  dc.max_route_steps = 3;
  Pairs pairs(dc, 101, 2, 102);
  agent::Navigator nav(model_config(pairs.world, 8, 2), 103);
  diffcore::GradcheckOptions opts;
  opts.tolerance = kTolerance;
  opts.step = 1e-3;
  opts.order = 4;
  opts.max_entries_per_param = 8;
  opts.seed = 104;
  const auto rep = train::check_joint_gradients(nav, pairs.examples, opts);
  long checked = 0;
  for (const auto& e : rep.entries) checked += e.checked;
  const std::size_t tensors = rep.entries.size();
  const double secs = seconds_since(t0);
  return {rep.passed && secs < kBudget,
          "max_rel_error=" + fmt(rep.max_rel_error) + " (< " + fmt(kTolerance) + ", worst " + rep.worst + ") over " +
              std::to_string(checked) + " coordinates of " + std::to_string(tensors) + " tensors, " + fmt(secs, 3) + " s (< " + fmt(kBudget) + " s)"};
}

// 2 ------------------------------------------------------------------------

Outcome decode_equivalence() {
  constexpr double kTolerance = 1e-9;
  constexpr int kRoutes = 50;
  env::DatasetConfig dc;
  dc.train_graphs = 4;
  dc.unseen_graphs = 1;
  Pairs pairs(dc, 201, kRoutes, 202);
  agent::Navigator nav(model_config(pairs.world, 16, 4), 203);
  std::mt19937_64 rng(204);
  std::uniform_int_distribution<int> word(agent::Vocabulary::kSpecials, pairs.world.vocabulary().size() - 1);
  double worst = 0;
  long positions = 0;
  for (const auto& ex : pairs.examples) {
    // Random continuation so positions beyond the reference are exercised too.
    std::vector<int> tokens = {agent::Vocabulary::kBos};
    const int len = 1 + static_cast<int>(rng() % 24);
    for (int i = 0; i < len; ++i) tokens.push_back(word(rng));
    agent::Tape tape(false);
    const auto route = nav.encode_route_generation(tape, *ex.route);
    const auto full = nav.word_logits(tape, nav.encode_language(tape, tokens, 0, agent::LanguageMode::Causal), route);
    for (int l = 1; l <= static_cast<int>(tokens.size()); ++l) {
      agent::Tape step(false);
      const auto r = nav.encode_route_generation(step, *ex.route);
      const auto part = nav.word_logits(
          step, nav.encode_language(step, std::span<const int>(tokens.data(), static_cast<std::size_t>(l)), 0,
                                    agent::LanguageMode::Causal),
          r);
      const double d = (full.value().row(l - 1) - part.value().row(l - 1)).cwiseAbs().maxCoeff();
      worst = std::max(worst, d);
      ++positions;
    }
  }
  return {worst < kTolerance, "max |parallel - incremental| = " + fmt(worst) + " (< " + fmt(kTolerance) + ") over " +
                                  std::to_string(kRoutes) + " routes, " + std::to_string(positions) + " positions"};
}

// 3 ------------------------------------------------------------------------

Outcome simplex_and_masking() {
  constexpr double kTolerance = 1e-9;
  constexpr int kCalls = 1000;
  env::DatasetConfig dc;
  dc.train_graphs = 3;
  dc.unseen_graphs = 1;
  Pairs pairs(dc, 301, 40, 302);
  auto mc = model_config(pairs.world, 16, 4);
  agent::Navigator nav(mc, 303);
  mc.min_steps = 2;
  agent::Navigator late_stop(mc, 304);
  std::mt19937_64 rng(305);
  double worst_sum = 0;
  long leaked = 0, masked_views = 0;
  for (int call = 0; call < kCalls; ++call) {
    const auto& ex = pairs.examples[rng() % pairs.examples.size()];
    const auto& rec = pairs.records[static_cast<std::size_t>(&ex - pairs.examples.data())];
    const auto& g = pairs.world.graph(rec.graph);
    const int t = static_cast<int>(rng() % static_cast<std::uint64_t>(ex.route->length() + 1));
    const int node = static_cast<int>(rng() % static_cast<std::uint64_t>(g.size()));
    const agent::Panorama pano = g.panorama(node);
    const agent::Navigator& model = call % 2 ? late_stop : nav;
    agent::Route history;
    history.steps.assign(ex.route->steps.begin(), ex.route->steps.begin() + t);
    agent::Tape tape(false);
    const auto route = model.encode_route_following(tape, history, pano);
    const auto lang = model.encode_instruction(tape, *ex.instruction);
    const auto p = model.decode_action(tape, route, lang, pano, t);
    worst_sum = std::max(worst_sum, std::abs(p.sum() - 1.0));
    for (int k = 0; k < pano.size(); ++k) {
      if (pano.is_navigable(k)) continue;
      ++masked_views;
      if (p.probs[static_cast<std::size_t>(k)] != 0.0) ++leaked;
    }
    if (t < model.config().min_steps) {
      ++masked_views;
      if (p.probs[static_cast<std::size_t>(model.stop_index())] != 0.0) ++leaked;
    }
  }
  return {worst_sum <= kTolerance && leaked == 0 && masked_views > 0,
          "max |sum - 1| = " + fmt(worst_sum) + " (<= " + fmt(kTolerance) + "), nonzero mass on " +
              std::to_string(leaked) + " of " + std::to_string(masked_views) + " masked entries over " +
              std::to_string(kCalls) + " calls"};
}

// 4 ------------------------------------------------------------------------

struct FitScore {
  double action_acc = 0;
  double word_acc = 0;
  int followed = 0;
  int generated = 0;
};

FitScore score_fit(const agent::Navigator& nav, const Pairs& pairs) {
  train::LossStats act, words;
  FitScore s;
  for (std::size_t i = 0; i < pairs.examples.size(); ++i) {
    const auto& ex = pairs.examples[i];
    const auto& rec = pairs.records[i];
    agent::Tape tape(false);
    train::following_loss(tape, nav, ex, &act);
    train::generation_loss(tape, nav, ex, &words);
    const auto f = nav.follow_instruction(*ex.instruction, pairs.world.graph(rec.graph), rec.path.front(), 15);
    s.followed += f.stopped && f.nodes == rec.path;
    s.generated += nav.generate_instruction(*ex.route, 64).tokens == ex.instruction->tokens;
  }
  s.action_acc = act.accuracy();
  s.word_acc = words.accuracy();
  return s;
}

Outcome overfit_oracle() {
  constexpr int kPairs = 32;
  constexpr int kMaxIterations = 3000;
  constexpr double kBudget = 600.0;
  constexpr double kAccuracy = 0.99;
  constexpr int kGenerated = 30;
  const auto t0 = Clock::now();
  env::DatasetConfig dc;
  Pairs pairs(dc, 7, kPairs, 11);
  agent::Navigator nav(model_config(pairs.world, 64, 4), 3);
  train::TrainConfig tc;
  tc.lr = 1e-3;
  tc.batch_size = 8;
  tc.iterations = kMaxIterations;
  tc.ratio = {3, 1, 0};
  tc.seed = 5;
  train::Trainer trainer(nav, pairs.examples, tc);
  FitScore s;
  auto done = [&] {
    return s.action_acc >= kAccuracy && s.word_acc >= kAccuracy && s.followed == kPairs && s.generated >= kGenerated;
  };
  while (trainer.iteration() < kMaxIterations && seconds_since(t0) < kBudget) {
    trainer.step();
    if (trainer.iteration() % 100 == 0 && trainer.iteration() >= 300) {
      s = score_fit(nav, pairs);
      if (done()) break;
    }
  }
  const double secs = seconds_since(t0);
  return {done() && secs < kBudget,
          "after " + std::to_string(trainer.iteration()) + " iterations: action acc " + fmt(s.action_acc) +
              ", word acc " + fmt(s.word_acc) + " (>= " + fmt(kAccuracy) + "), followed " +
              std::to_string(s.followed) + "/32, generated " + std::to_string(s.generated) + "/32 (>= " +
              std::to_string(kGenerated) + "), " + fmt(secs, 4) + " s (< " + fmt(kBudget) + " s)"};
}

// 5 ------------------------------------------------------------------------

Outcome generalization(bool quick, const fs::path& report_dir) {
  const auto cfg = quick ? bench::BenchmarkConfig::quick() : bench::BenchmarkConfig::reference();
  const auto result = bench::run_benchmark(cfg, report_dir, std::cout);
  std::string detail = "mt SR " + fmt(100 * result.mean_mt.sr, 4) + " / CIDEr " + fmt(100 * result.mean_mt.cider, 4) +
                       ", st SR " + fmt(100 * result.mean_st_if.sr, 4) + " / CIDEr " +
                       fmt(100 * result.mean_st_ig.cider, 4) + ", random SR " + fmt(100 * result.mean_random_sr, 4) +
                       "; random clause " + (result.beats_random ? "met" : "VIOLATED") + ", mt-vs-st clause " +
                       (result.mt_within_margin ? "met" : "flagged");
  return {result.beats_random, detail};
}

// 6 ------------------------------------------------------------------------

/// Minimum over every monotone alignment, enumerated explicitly.
double exhaustive_dtw(const env::NavGraph& g, const std::vector<int>& a, const std::vector<int>& b) {
  double best = std::numeric_limits<double>::infinity();
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
    acc += g.distance(a[i], b[j]);
    if (i + 1 == a.size() && j + 1 == b.size()) {
      best = std::min(best, acc);
      return;
    }
    if (i + 1 < a.size()) walk(i + 1, j, acc);
    if (j + 1 < b.size()) walk(i, j + 1, acc);
    if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, acc);
  };
  walk(0, 0, 0.0);
  return best;
}

void simple_paths(const env::NavGraph& g, std::vector<int>& cur, std::size_t max_nodes,
                  std::vector<std::vector<int>>& out) {
  out.push_back(cur);
  if (cur.size() == max_nodes) return;
  for (int n : g.neighbors(cur.back())) {
    if (std::find(cur.begin(), cur.end(), n) != cur.end()) continue;
    cur.push_back(n);
    simple_paths(g, cur, max_nodes, out);
    cur.pop_back();
  }
}

Outcome metric_oracles() {
  constexpr double kTextTolerance = 1e-9;
  std::vector<std::string> failures;

  // nDTW against the alignment oracle, every pair of simple paths of <= 6 nodes.
  env::WorldConfig wc;
  wc.nodes = 6;
  const auto g = env::gen_world(0, 601, wc);
  std::vector<std::vector<int>> paths;
  for (int s = 0; s < g.size(); ++s) {
    std::vector<int> cur = {s};
    simple_paths(g, cur, 6, paths);
  }
  long pairs = 0, mismatched = 0;
  for (const auto& a : paths)
    for (const auto& b : paths) {
      ++pairs;
      const double oracle = std::exp(-exhaustive_dtw(g, a, b) / static_cast<double>(b.size()));
      if (eval::ndtw(g, a, b, 1.0) != oracle) ++mismatched;
    }
  if (mismatched) failures.push_back(std::to_string(mismatched) + " nDTW mismatches");

  // Text metrics against hand-computed values.
  using eval::Sentence;
  auto S = [](const std::string& s) { return eval::tokenize(s); };
  const std::vector<Sentence> refs = {S("the cat is on the mat"), S("there is a cat on the mat")};
  const Sentence cand = S("the cat sat on the mat");
  const std::vector<Sentence> refs3 = {S("go straight past the red lamp and turn left at the door"),
                                       S("walk past the lamp then turn left")};
  const Sentence cand3 = S("go straight past the lamp and turn left at the door");
  const std::vector<Sentence> refs2 = {S("walk straight past the red lamp then stop near the door")};
  const Sentence cand2 = S("walk past the lamp and stop");
  struct Fixture {
    const char* name;
    double got, want;
  };
  std::vector<eval::TextEvalRecord> corpus = {
      {S("turn left at the sofa and stop"), {S("turn left at the sofa then stop"), S("go left at the sofa and wait")}},
      {S("walk past the table"), {S("walk straight past the table"), S("pass the table")}},
      {S("go right to the door and stop"), {S("turn right to the door and stop here")}}};
  const auto cider = eval::cider(corpus);
  const std::vector<Fixture> fixtures = {
      {"bleu1", eval::bleu(cand, refs, 1), 5.0 / 6.0},
      {"bleu2", eval::bleu(cand, refs, 2), std::sqrt(0.5)},
      {"bleu4 zero", eval::bleu(cand, refs, 4), 0.0},
      {"bleu2 brevity", eval::bleu(cand2, refs2, 2), 0.17742397566167217},
      {"bleu4", eval::bleu(cand3, refs3, 4), 0.78831639190850211},
      {"rouge_l", eval::rouge_l(cand, refs), 0.83333333333333337},
      {"rouge_l single", eval::rouge_l(cand2, refs2), 0.55860805860805862},
      {"rouge_l multi", eval::rouge_l(cand3, refs3), 0.94908062234794899},
      {"cider 0", cider.per_record[0], 0.64254835092955587},
      {"cider 1", cider.per_record[1], 0.33351506804570674},
      {"cider 2", cider.per_record[2], 0.73166235300097815},
  };
  double worst_text = 0;
  for (const auto& f : fixtures) {
    const double d = std::abs(f.got - f.want);
    worst_text = std::max(worst_text, d);
    if (!(d <= kTextTolerance)) failures.push_back(std::string(f.name) + " off by " + fmt(d));
  }

  // Ordering chain on random episode batches.
  constexpr int kBatches = 10000;
  env::DatasetConfig dc;
  dc.train_graphs = 3;
  dc.unseen_graphs = 1;
  const env::World world(dc, 602);
  std::mt19937_64 rng(603);
  const eval::Thresholds th;
  long violations = 0;
  for (int b = 0; b < kBatches; ++b) {
    std::vector<eval::Episode> eps;
    for (int e = 0; e < 8; ++e) {
      const auto& gr = world.graph(static_cast<int>(rng() % 3));
      eval::Episode ep;
      ep.graph = &gr;
      ep.reference = env::sample_route(gr, 1, 5, rng);
      ep.predicted = {ep.reference.front()};
      const int steps = static_cast<int>(rng() % 8);
      for (int s = 0; s < steps; ++s) {
        const auto nb = gr.neighbors(ep.predicted.back());
        ep.predicted.push_back(nb[rng() % nb.size()]);
      }
      if (eval::sdtw(ep, th) > eval::ndtw(gr, ep.predicted, ep.reference, th.distance)) ++violations;
      eps.push_back(std::move(ep));
    }
    const double spl = eval::mean_spl(eps, th), sr = eval::success_rate(eps, th), orr = eval::oracle_rate(eps, th);
    if (!(spl <= sr && sr <= orr)) ++violations;
  }
  if (violations) failures.push_back(std::to_string(violations) + " ordering violations");

  std::string detail = "nDTW " + std::to_string(pairs - mismatched) + "/" + std::to_string(pairs) +
                       " path pairs exact; text fixtures max error " + fmt(worst_text) + " (<= " +
                       fmt(kTextTolerance) + "); ordering chain held on " + std::to_string(kBatches) + " batches";
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

// 7 ------------------------------------------------------------------------

Outcome task_sampling() {
  constexpr int kDraws = 70000;
  constexpr double kTolerance = 0.01;
  std::mt19937_64 rng(701);
  std::array<int, 3> counts{};
  const auto ratio = train::TaskRatio::pretrain();
  for (int i = 0; i < kDraws; ++i) ++counts[static_cast<std::size_t>(train::sample_task(ratio, rng))];
  const std::array<double, 3> want = {4.0 / 7.0, 1.0 / 7.0, 2.0 / 7.0};
  double worst = 0;
  std::string detail = "IG:IF:ITM =";
  for (std::size_t k = 0; k < 3; ++k) {
    const double f = static_cast<double>(counts[k]) / kDraws;
    worst = std::max(worst, std::abs(f - want[k]));
    detail += " " + fmt(f, 5);
  }
  return {worst <= kTolerance, detail + " over " + std::to_string(kDraws) + " draws, max deviation " + fmt(worst, 3) +
                                   " (<= " + fmt(kTolerance) + ")"};
}

// 8 ------------------------------------------------------------------------

Outcome checkpoint_round_trip() {
  const fs::path dir = fs::temp_directory_path() / "duonav_acceptance_ckpt";
  fs::create_directories(dir);
  const fs::path ckpt = dir / "state.ckpt";
  env::DatasetConfig dc;
  dc.train_graphs = 2;
  dc.unseen_graphs = 1;
  Pairs pairs(dc, 801, 24, 802);
  const auto mc = model_config(pairs.world, 16, 4);
  train::TrainConfig tc;
  tc.batch_size = 4;
  tc.iterations = 100;
  tc.seed = 803;
  tc.lr = 1e-3;

  agent::Navigator nav(mc, 804);
  train::Trainer trainer(nav, pairs.examples, tc);
  for (int i = 0; i < 7; ++i) trainer.step();
  train::save_training_checkpoint(ckpt, nav, trainer, {});
  std::vector<double> uninterrupted;
  std::vector<train::Task> tasks;
  for (int i = 0; i < 3; ++i) {
    const auto row = trainer.step();
    uninterrupted.push_back(row.loss);
    tasks.push_back(row.task);
  }

  agent::Navigator restored(mc, 999);
  train::Trainer resumed(restored, pairs.examples, tc);
  train::load_training_checkpoint(ckpt, restored, resumed);
  int identical = 0;
  std::string detail = "losses";
  for (int i = 0; i < 3; ++i) {
    const auto row = resumed.step();
    const bool same = row.loss == uninterrupted[static_cast<std::size_t>(i)] && row.task == tasks[static_cast<std::size_t>(i)];
    identical += same;
    std::ostringstream s;
    s << std::setprecision(17) << " " << train::task_name(row.task) << "=" << row.loss << (same ? "" : "(differs)");
    detail += s.str();
  }
  fs::remove_all(dir);
  return {identical == 3, detail + "; " + std::to_string(identical) + "/3 post-resume steps bit-identical"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"duonav acceptance criteria"};
  std::vector<int> only;
  bool quick = false;
  std::string report_dir = "acceptance_reports";
  app.add_option("--only", only, "Criteria to run (default: all)");
  app.add_flag("--quick-benchmark", quick, "Criterion 5 on a reduced schedule");
  app.add_option("--report-dir", report_dir, "Where criterion 5 writes its per-seed tables");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient integrity", gradient_integrity},
      {"causality and decode equivalence", decode_equivalence},
      {"simplex and masking", simplex_and_masking},
      {"overfit oracle", overfit_oracle},
      {"generalization direction", [&] { return generalization(quick, report_dir); }},
      {"metric oracles", metric_oracles},
      {"task-sampling ratio", task_sampling},
      {"checkpoint round-trip", checkpoint_round_trip},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.passed;
    std::cout << (o.passed ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failed ? 1 : 0;
}
