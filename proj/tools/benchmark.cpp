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


#include "benchmark.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>

#include <nlohmann/json.hpp>

#include "duonav/eval/evaluate.hpp"
#include "duonav/io/config.hpp"

namespace duonav::bench {

namespace {

using Clock = std::chrono::steady_clock;

train::TrainConfig phase_config(train::Phase phase, double lr, int batch, int iterations, train::TaskRatio ratio) {
  train::TrainConfig t = phase == train::Phase::Pretrain ? train::TrainConfig::pretrain_defaults()
                                                         : train::TrainConfig::finetune_defaults();
  t.lr = lr;
  t.batch_size = batch;
  t.iterations = iterations;
  t.ratio = ratio;
  return t;
}

void copy_parameters(const agent::Navigator& from, agent::Navigator& to) {
  const auto& src = from.parameters();
  auto& dst = to.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i].value = src[i].value;
}

RegimeScore score(const agent::Navigator& nav, const env::World& world, const std::vector<env::PairRecord>& records,
                  bool follow, bool generate) {
  RegimeScore s;
  const eval::EvalConfig ec;
  if (follow) {
    const auto f = eval::evaluate_following(nav, world, records, ec);
    s.sr = f.sr;
    s.spl = f.spl;
    s.ndtw = f.ndtw;
  }
  if (generate) {
    const auto g = eval::evaluate_generation(nav, world, records, ec);
    s.cider = g.cider;
    s.bleu4 = g.bleu4;
  }
  return s;
}

nlohmann::json to_json(const RegimeScore& s) {
  return {{"sr", s.sr}, {"spl", s.spl}, {"ndtw", s.ndtw}, {"cider", s.cider}, {"bleu4", s.bleu4}};
}

void accumulate(RegimeScore& into, const RegimeScore& s, double w) {
  into.sr += w * s.sr;
  into.spl += w * s.spl;
  into.ndtw += w * s.ndtw;
  into.cider += w * s.cider;
  into.bleu4 += w * s.bleu4;
}

void print_row(std::ostream& log, const std::string& seed, const std::string& model, const RegimeScore& s) {
  log << std::left << std::setw(6) << seed << std::setw(12) << model << std::right << std::fixed
      << std::setprecision(2) << std::setw(8) << 100 * s.sr << std::setw(8) << 100 * s.spl << std::setw(8)
      << 100 * s.ndtw << std::setw(8) << 100 * s.cider << std::setw(8) << 100 * s.bleu4 << "\n"
      << std::defaultfloat;
}

SeedResult run_seed(const BenchmarkConfig& cfg, std::uint64_t seed, std::ostream& log) {
  using io::Subsystem;
  const auto t0 = Clock::now();
  SeedResult r;
  r.seed = seed;
  const env::World world(cfg.data, io::subsystem_seed(seed, Subsystem::World));
  const std::uint64_t data_seed = io::subsystem_seed(seed, Subsystem::Data);
  const auto train_records = env::make_split(world, env::Split::Train, cfg.data.train_routes, data_seed);
  auto unseen = env::make_split(world, env::Split::ValUnseen, cfg.data.val_unseen_routes, data_seed);
  if (cfg.eval_routes > 0 && static_cast<int>(unseen.size()) > cfg.eval_routes * cfg.data.references)
    unseen.resize(static_cast<std::size_t>(cfg.eval_routes * cfg.data.references));
  const auto samples = env::resolve(world, train_records);
  std::vector<train::Example> examples;
  examples.reserve(samples.size());
  for (const auto& s : samples) examples.push_back({&s.route, &s.record->instruction});

  agent::ModelConfig mc;
  mc.attention.width = cfg.width;
  mc.attention.heads = cfg.heads;
  mc.attention.language_encoder_depth = cfg.depth;
  mc.attention.route_encoder_depth = cfg.depth;
  mc.attention.language_decoder_depth = cfg.depth;
  mc.attention.route_decoder_depth = cfg.depth;
  mc.views = cfg.data.world.views;
  mc.visual_dim = cfg.data.world.visual_dim;
  mc.vocab_size = world.vocabulary().size();
  const std::uint64_t model_seed = io::subsystem_seed(seed, Subsystem::Model);

  agent::Navigator base(mc, model_seed);
  {
    train::TrainConfig tc = cfg.pretrain;
    tc.phase = train::Phase::Pretrain;
    tc.seed = io::subsystem_seed(seed, Subsystem::Pretrain);
    train::Trainer trainer(base, examples, tc);
    trainer.run();
  }
  r.pretrained = score(base, world, unseen, true, true);

  auto finetune = [&](train::Regime regime) {
    agent::Navigator nav(mc, model_seed);
    copy_parameters(base, nav);
    train::TrainConfig tc = cfg.finetune;
    tc.phase = train::Phase::Finetune;
    tc.regime = regime;
    tc.seed = io::subsystem_seed(seed, Subsystem::Finetune);
    train::Trainer trainer(nav, examples, tc);
    trainer.run();
    return score(nav, world, unseen, regime != train::Regime::SingleGeneration,
                 regime != train::Regime::SingleFollowing);
  };
  r.mt = finetune(train::Regime::MultiTask);
  r.st_if = finetune(train::Regime::SingleFollowing);
  r.st_ig = finetune(train::Regime::SingleGeneration);
  r.random_sr =
      eval::evaluate_random_policy(world, unseen, eval::EvalConfig{}, io::subsystem_seed(seed, Subsystem::Baseline)).sr;
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();

  const std::string sd = std::to_string(seed);
  print_row(log, sd, "pretrained", r.pretrained);
  print_row(log, sd, "mt", r.mt);
  print_row(log, sd, "st-if", r.st_if);
  print_row(log, sd, "st-ig", r.st_ig);
  RegimeScore rnd;
  rnd.sr = r.random_sr;
  print_row(log, sd, "random", rnd);
  log << std::flush;
  return r;
}

}  // namespace

BenchmarkConfig BenchmarkConfig::reference() {
  BenchmarkConfig c;
  c.pretrain = phase_config(train::Phase::Pretrain, 1e-3, 8, 4000, train::TaskRatio::pretrain());
  c.finetune = phase_config(train::Phase::Finetune, 1e-3, 8, 6000, train::TaskRatio::finetune());
  return c;
}

BenchmarkConfig BenchmarkConfig::quick() {
  BenchmarkConfig c = reference();
  c.seeds = {0};
  c.data.train_routes = 500;
  c.data.val_unseen_routes = 100;
  c.pretrain.iterations = 1000;
  c.finetune.iterations = 1500;
  return c;
}

BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, const std::filesystem::path& report_dir, std::ostream& log) {
  BenchmarkResult out;
  log << "unseen-split scores x100\n"
      << std::left << std::setw(6) << "seed" << std::setw(12) << "model" << std::right << std::setw(8) << "SR"
      << std::setw(8) << "SPL" << std::setw(8) << "nDTW" << std::setw(8) << "CIDEr" << std::setw(8) << "BLEU4"
      << "\n";
  for (auto seed : cfg.seeds) out.seeds.push_back(run_seed(cfg, seed, log));
  const double w = 1.0 / static_cast<double>(out.seeds.size());
  for (const auto& s : out.seeds) {
    accumulate(out.mean_mt, s.mt, w);
    accumulate(out.mean_st_if, s.st_if, w);
    accumulate(out.mean_st_ig, s.st_ig, w);
    out.mean_random_sr += w * s.random_sr;
  }
  print_row(log, "mean", "mt", out.mean_mt);
  print_row(log, "mean", "st-if", out.mean_st_if);
  print_row(log, "mean", "st-ig", out.mean_st_ig);
  RegimeScore rnd;
  rnd.sr = out.mean_random_sr;
  print_row(log, "mean", "random", rnd);

  const double floor = cfg.random_factor * out.mean_random_sr;
  out.beats_random = out.mean_mt.sr >= floor && out.mean_st_if.sr >= floor && out.mean_random_sr > 0;
  out.mt_within_margin =
      out.mean_mt.sr >= out.mean_st_if.sr - cfg.margin && out.mean_mt.cider >= out.mean_st_ig.cider - cfg.margin;
  if (!out.mt_within_margin) log << "flag: mt falls more than " << 100 * cfg.margin << " points behind st\n";

  std::filesystem::create_directories(report_dir);
  std::ofstream csv(report_dir / "benchmark.csv");
  csv << "seed,model,sr,spl,ndtw,cider,bleu4\n";
  csv.precision(10);
  nlohmann::json j;
  j["seeds"] = nlohmann::json::array();
  for (const auto& s : out.seeds) {
    for (const auto& [name, sc] : {std::pair<const char*, const RegimeScore*>{"pretrained", &s.pretrained},
                                   {"mt", &s.mt},
                                   {"st-if", &s.st_if},
                                   {"st-ig", &s.st_ig}})
      csv << s.seed << ',' << name << ',' << sc->sr << ',' << sc->spl << ',' << sc->ndtw << ',' << sc->cider << ','
          << sc->bleu4 << '\n';
    csv << s.seed << ",random," << s.random_sr << ",,,,\n";
    j["seeds"].push_back({{"seed", s.seed},
                          {"pretrained", to_json(s.pretrained)},
                          {"mt", to_json(s.mt)},
                          {"st_if", to_json(s.st_if)},
                          {"st_ig", to_json(s.st_ig)},
                          {"random_sr", s.random_sr},
                          {"seconds", s.seconds}});
  }
  j["mean"] = {{"mt", to_json(out.mean_mt)},
               {"st_if", to_json(out.mean_st_if)},
               {"st_ig", to_json(out.mean_st_ig)},
               {"random_sr", out.mean_random_sr}};
  j["beats_random"] = out.beats_random;
  j["mt_within_margin"] = out.mt_within_margin;
  j["config"] = {{"width", cfg.width},
                 {"heads", cfg.heads},
                 {"depth", cfg.depth},
                 {"pretrain_iterations", cfg.pretrain.iterations},
                 {"pretrain_lr", cfg.pretrain.lr},
                 {"finetune_iterations", cfg.finetune.iterations},
                 {"finetune_lr", cfg.finetune.lr},
                 {"batch_size", cfg.pretrain.batch_size},
                 {"train_routes", cfg.data.train_routes},
                 {"val_unseen_routes", cfg.data.val_unseen_routes}};
  std::ofstream(report_dir / "benchmark.json") << j.dump(2) << '\n';
  return out;
}

}  // namespace duonav::bench
