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


// Seeded generalization benchmark (mt vs st fine-tuning vs random policy).

#include <iostream>

#include <CLI11.hpp>

#include "benchmark.hpp"

int main(int argc, char** argv) {
  CLI::App app{"duonav generalization benchmark"};
  bool quick = false;
  std::string out = "benchmark_reports";
  std::vector<std::uint64_t> seeds;
  app.add_flag("--quick", quick, "Reduced schedule");
  app.add_option("--out", out, "Report directory");
  app.add_option("--seeds", seeds, "Override the seed list");
  auto cfg = duonav::bench::BenchmarkConfig::reference();
  int width = 0, depth = 0, pretrain_iters = 0, finetune_iters = 0;
  double pretrain_lr = 0, finetune_lr = 0;
  app.add_option("--width", width, "Model width");
  app.add_option("--depth", depth, "Depth of every stack");
  app.add_option("--pretrain-iterations", pretrain_iters, "Pretraining iterations");
  app.add_option("--finetune-iterations", finetune_iters, "Fine-tuning iterations per regime");
  app.add_option("--pretrain-lr", pretrain_lr, "Pretraining learning rate");
  app.add_option("--finetune-lr", finetune_lr, "Fine-tuning learning rate");
  CLI11_PARSE(app, argc, argv);
  if (quick) cfg = duonav::bench::BenchmarkConfig::quick();
  if (!seeds.empty()) cfg.seeds = seeds;
  if (width > 0) cfg.width = width;
  if (depth > 0) cfg.depth = depth;
  if (pretrain_iters > 0) cfg.pretrain.iterations = pretrain_iters;
  if (finetune_iters > 0) cfg.finetune.iterations = finetune_iters;
  if (pretrain_lr > 0) cfg.pretrain.lr = pretrain_lr;
  if (finetune_lr > 0) cfg.finetune.lr = finetune_lr;
  const auto r = duonav::bench::run_benchmark(cfg, out, std::cout);
  std::cout << "random clause " << (r.beats_random ? "met" : "VIOLATED") << ", mt-vs-st clause "
            << (r.mt_within_margin ? "met" : "flagged") << "\n";
  return r.beats_random ? 0 : 1;
}
