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

#ifndef DUONAV_EVAL_EVALUATE_HPP
#define DUONAV_EVAL_EVALUATE_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "duonav/agent/navigator.hpp"
#include "duonav/env/dataset.hpp"
#include "duonav/eval/path_metrics.hpp"
#include "duonav/eval/text_metrics.hpp"

namespace duonav::eval {

constexpr int kReportSchemaVersion = 1;

struct EvalConfig {
  Thresholds thresholds;
  /// Action budget per episode; must stay below the model horizon.
  int max_steps = 15;
  int max_words = 64;
};

struct FollowRow {
  int record = 0;
  int route_id = 0;
  int graph = 0;
  std::vector<int> predicted;
  std::vector<int> reference;
  bool stopped = false;
  bool truncated = false;
  bool success = false;
  bool oracle_success = false;
  double tl = 0;
  double spl = 0;
  double ndtw = 0;
  double sdtw = 0;
  double cls = 0;
};

struct FollowingReport {
  std::vector<FollowRow> rows;
  double sr = 0;
  double oracle_rate = 0;
  double tl = 0;
  double spl = 0;
  double ndtw = 0;
  double sdtw = 0;
  double cls = 0;

  nlohmann::json aggregate_json() const;
  nlohmann::json to_json() const;
};

struct GenerationRow {
  int route_id = 0;
  int graph = 0;
  std::string candidate;
  std::vector<std::string> references;
  double bleu1 = 0;
  double bleu4 = 0;
  double rouge_l = 0;
  double cider = 0;
};

struct GenerationReport {
  std::vector<GenerationRow> rows;
  double bleu1 = 0;
  double bleu4 = 0;
  double rouge_l = 0;
  double cider = 0;

  nlohmann::json aggregate_json() const;
  nlohmann::json to_json() const;
};

/// Scores each predicted episode and fills the aggregates.
FollowingReport summarize_following(const env::World& world, std::vector<FollowRow> rows, const Thresholds& th);

/// Greedy instruction following, one episode per record.
FollowingReport evaluate_following(const agent::Navigator& nav, const env::World& world,
                                   const std::vector<env::PairRecord>& records, const EvalConfig& cfg);

/// Policy drawing uniformly from the navigable views and STOP at every step.
FollowingReport evaluate_random_policy(const env::World& world, const std::vector<env::PairRecord>& records,
                                       const EvalConfig& cfg, std::uint64_t seed);

/// One generated instruction per route; BLEU and ROUGE-L are averaged over
/// the route's references taken one at a time, CIDEr uses all of them.
GenerationReport evaluate_generation(const agent::Navigator& nav, const env::World& world,
                                     const std::vector<env::PairRecord>& records, const EvalConfig& cfg);

/// Scores already generated candidates, one per route group of `records`.
GenerationReport score_generation(const env::World& world, const std::vector<env::PairRecord>& records,
                                  const std::vector<std::string>& candidates);

/// Writes `<prefix>.json` (aggregate + rows + config) and `<prefix>.csv` (rows
/// then a `mean` row).
void write_report(const std::filesystem::path& prefix, const FollowingReport& report, const nlohmann::json& meta);
void write_report(const std::filesystem::path& prefix, const GenerationReport& report, const nlohmann::json& meta);

}  // namespace duonav::eval

#endif  // DUONAV_EVAL_EVALUATE_HPP
