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


#ifndef DUONAV_TOOLS_BENCHMARK_HPP
#define DUONAV_TOOLS_BENCHMARK_HPP

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <vector>

#include "duonav/agent/navigator.hpp"
#include "duonav/env/dataset.hpp"
#include "duonav/train/trainer.hpp"

namespace duonav::bench {

/// Seeded synthetic benchmark: pretrain once per seed, fine-tune the same
/// weights under mt, st-if and st-ig, and score every model on val_unseen.
struct BenchmarkConfig {
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  env::DatasetConfig data;
  int width = 32;
  int heads = 4;
  /// Depth of every encoder and decoder stack.
  int depth = 1;
  train::TrainConfig pretrain;
  train::TrainConfig finetune;
  /// val_unseen routes scored per seed (0 = all).
  int eval_routes = 0;
  /// Allowed shortfall of mt against st, as a fraction (0.02 = 2 points).
  double margin = 0.02;
  double random_factor = 3.0;

  static BenchmarkConfig reference();
  /// Same protocol on a shorter schedule for smoke runs.
  static BenchmarkConfig quick();
};

struct RegimeScore {
  double sr = 0;
  double spl = 0;
  double ndtw = 0;
  double cider = 0;
  double bleu4 = 0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  RegimeScore pretrained;
  RegimeScore mt;
  RegimeScore st_if;
  RegimeScore st_ig;
  double random_sr = 0;
  double seconds = 0;
};

struct BenchmarkResult {
  std::vector<SeedResult> seeds;
  RegimeScore mean_mt;
  RegimeScore mean_st_if;
  RegimeScore mean_st_ig;
  double mean_random_sr = 0;
  /// mt and st-if unseen SR both at least random_factor x random SR.
  bool beats_random = false;
  /// mt SR >= st-if SR - margin and mt CIDEr >= st-ig CIDEr - margin.
  bool mt_within_margin = false;
};

/// Runs every seed, prints per-seed tables to `log` and writes
/// benchmark.csv / benchmark.json under `report_dir`.
BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, const std::filesystem::path& report_dir, std::ostream& log);

}  // namespace duonav::bench

#endif  // DUONAV_TOOLS_BENCHMARK_HPP
