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

#include "duonav/eval/evaluate.hpp"

#include <fstream>
#include <map>
#include <random>

namespace duonav::eval {

namespace {

std::string join(const std::vector<int>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

std::string csv_quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

/// Consecutive-or-not grouping of records by route id, in first-seen order.
std::vector<std::vector<const env::PairRecord*>> route_groups(const std::vector<env::PairRecord>& records) {
  std::vector<std::vector<const env::PairRecord*>> groups;
  std::map<std::pair<int, int>, std::size_t> index;
  for (const auto& r : records) {
    const auto key = std::make_pair(r.graph, r.route_id);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, groups.size());
      groups.push_back({&r});
    } else {
      groups[it->second].push_back(&r);
    }
  }
  return groups;
}

}  // namespace

nlohmann::json FollowingReport::aggregate_json() const {
  return {{"episodes", rows.size()}, {"sr", sr},     {"or", oracle_rate}, {"tl", tl},
          {"spl", spl},              {"ndtw", ndtw}, {"sdtw", sdtw},      {"cls", cls}};
}

nlohmann::json FollowingReport::to_json() const {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "following";
  j["aggregate"] = aggregate_json();
  auto& eps = j["episodes"] = nlohmann::json::array();
  for (const auto& r : rows)
    eps.push_back({{"record", r.record},
                   {"route_id", r.route_id},
                   {"graph", r.graph},
                   {"predicted", r.predicted},
                   {"reference", r.reference},
                   {"stopped", r.stopped},
                   {"truncated", r.truncated},
                   {"success", r.success},
                   {"oracle_success", r.oracle_success},
                   {"tl", r.tl},
                   {"spl", r.spl},
                   {"ndtw", r.ndtw},
                   {"sdtw", r.sdtw},
                   {"cls", r.cls}});
  return j;
}

nlohmann::json GenerationReport::aggregate_json() const {
  return {{"routes", rows.size()}, {"bleu1", bleu1}, {"bleu4", bleu4}, {"rouge_l", rouge_l}, {"cider", cider}};
}

nlohmann::json GenerationReport::to_json() const {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "generation";
  j["aggregate"] = aggregate_json();
  auto& rs = j["routes"] = nlohmann::json::array();
  for (const auto& r : rows)
    rs.push_back({{"route_id", r.route_id},
                  {"graph", r.graph},
                  {"candidate", r.candidate},
                  {"references", r.references},
                  {"bleu1", r.bleu1},
                  {"bleu4", r.bleu4},
                  {"rouge_l", r.rouge_l},
                  {"cider", r.cider}});
  return j;
}

FollowingReport summarize_following(const env::World& world, std::vector<FollowRow> rows, const Thresholds& th) {
  FollowingReport rep;
  for (auto& r : rows) {
    Episode ep{&world.graph(r.graph), r.predicted, r.reference, r.stopped};
    r.success = success(ep, th);
    r.oracle_success = oracle_success(ep, th);
    r.tl = trajectory_length(ep);
    r.spl = spl(ep, th);
    r.ndtw = ndtw(*ep.graph, ep.predicted, ep.reference, th.distance);
    r.sdtw = r.success ? r.ndtw : 0.0;
    r.cls = cls(*ep.graph, ep.predicted, ep.reference, th.distance);
    rep.sr += r.success;
    rep.oracle_rate += r.oracle_success;
    rep.tl += r.tl;
    rep.spl += r.spl;
    rep.ndtw += r.ndtw;
    rep.sdtw += r.sdtw;
    rep.cls += r.cls;
  }
  if (!rows.empty()) {
    const double n = static_cast<double>(rows.size());
    for (double* v : {&rep.sr, &rep.oracle_rate, &rep.tl, &rep.spl, &rep.ndtw, &rep.sdtw, &rep.cls}) *v /= n;
  }
  rep.rows = std::move(rows);
  return rep;
}

FollowingReport evaluate_following(const agent::Navigator& nav, const env::World& world,
                                   const std::vector<env::PairRecord>& records, const EvalConfig& cfg) {
  std::vector<FollowRow> rows;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    env::validate_record(world, rec);
    const auto result = nav.follow_instruction(rec.instruction, world.graph(rec.graph), rec.path.front(), cfg.max_steps);
    FollowRow row;
    row.record = static_cast<int>(i);
    row.route_id = rec.route_id;
    row.graph = rec.graph;
    row.predicted = result.nodes;
    row.reference = rec.path;
    row.stopped = result.stopped;
    row.truncated = result.truncated;
    rows.push_back(std::move(row));
  }
  return summarize_following(world, std::move(rows), cfg.thresholds);
}

FollowingReport evaluate_random_policy(const env::World& world, const std::vector<env::PairRecord>& records,
                                       const EvalConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<FollowRow> rows;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    const env::NavGraph& g = world.graph(rec.graph);
    FollowRow row;
    row.record = static_cast<int>(i);
    row.route_id = rec.route_id;
    row.graph = rec.graph;
    row.reference = rec.path;
    int node = rec.path.front();
    row.predicted.push_back(node);
    for (int t = 0;; ++t) {
      if (t == cfg.max_steps) {
        row.truncated = true;
        break;
      }
      std::vector<int> choices;
      for (int k = 0; k < g.views(); ++k)
        if (g.neighbor(node, k) >= 0) choices.push_back(k);
      choices.push_back(-1);
      std::uniform_int_distribution<std::size_t> d(0, choices.size() - 1);
      const int pick = choices[d(rng)];
      if (pick < 0) {
        row.stopped = true;
        break;
      }
      node = g.step(node, pick);
      row.predicted.push_back(node);
    }
    rows.push_back(std::move(row));
  }
  return summarize_following(world, std::move(rows), cfg.thresholds);
}

GenerationReport score_generation(const env::World& world, const std::vector<env::PairRecord>& records,
                                  const std::vector<std::string>& candidates) {
  const auto groups = route_groups(records);
  if (groups.size() != candidates.size()) throw std::invalid_argument("one candidate per route is required");
  std::vector<TextEvalRecord> corpus;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    TextEvalRecord t;
    t.candidate = tokenize(candidates[i]);
    for (const auto* r : groups[i]) t.references.push_back(tokenize(world.vocabulary().decode(r->instruction.tokens)));
    corpus.push_back(std::move(t));
  }
  GenerationReport rep;
  if (corpus.empty()) return rep;
  const Cider model(corpus);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& t = corpus[i];
    GenerationRow row;
    row.route_id = groups[i].front()->route_id;
    row.graph = groups[i].front()->graph;
    row.candidate = candidates[i];
    for (const auto* r : groups[i]) row.references.push_back(world.vocabulary().decode(r->instruction.tokens));
    for (const auto& ref : t.references) {
      const std::span<const Sentence> one(&ref, 1);
      row.bleu1 += bleu(t.candidate, one, 1);
      row.bleu4 += bleu(t.candidate, one, 4);
      row.rouge_l += rouge_l(t.candidate, one);
    }
    const double k = static_cast<double>(t.references.size());
    row.bleu1 /= k;
    row.bleu4 /= k;
    row.rouge_l /= k;
    row.cider = model.score(t.candidate, t.references);
    rep.bleu1 += row.bleu1;
    rep.bleu4 += row.bleu4;
    rep.rouge_l += row.rouge_l;
    rep.cider += row.cider;
    rep.rows.push_back(std::move(row));
  }
  const double n = static_cast<double>(rep.rows.size());
  rep.bleu1 /= n;
  rep.bleu4 /= n;
  rep.rouge_l /= n;
  rep.cider /= n;
  return rep;
}

GenerationReport evaluate_generation(const agent::Navigator& nav, const env::World& world,
                                     const std::vector<env::PairRecord>& records, const EvalConfig& cfg) {
  std::vector<std::string> candidates;
  for (const auto& group : route_groups(records)) {
    const auto& rec = *group.front();
    env::validate_record(world, rec);
    const auto route = env::build_route(world.graph(rec.graph), rec.path);
    const auto ins = nav.generate_instruction(route, cfg.max_words);
    candidates.push_back(world.vocabulary().decode(ins.tokens));
  }
  return score_generation(world, records, candidates);
}

namespace {

void write_json(const std::filesystem::path& path, nlohmann::json j, const nlohmann::json& meta) {
  j["meta"] = meta;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const char* suffix) {
  return std::filesystem::path(prefix.string() + suffix);
}

}  // namespace

void write_report(const std::filesystem::path& prefix, const FollowingReport& report, const nlohmann::json& meta) {
  write_json(with_suffix(prefix, ".json"), report.to_json(), meta);
  std::ofstream out(with_suffix(prefix, ".csv"));
  if (!out) throw std::runtime_error("cannot write " + prefix.string() + ".csv");
  out.precision(10);
  out << "record,route_id,graph,predicted,reference,stopped,truncated,success,oracle_success,tl,spl,ndtw,sdtw,cls\n";
  for (const auto& r : report.rows)
    out << r.record << ',' << r.route_id << ',' << r.graph << ',' << join(r.predicted, ' ') << ','
        << join(r.reference, ' ') << ',' << r.stopped << ',' << r.truncated << ',' << r.success << ','
        << r.oracle_success << ',' << r.tl << ',' << r.spl << ',' << r.ndtw << ',' << r.sdtw << ',' << r.cls << '\n';
  out << "mean,,,,,,," << report.sr << ',' << report.oracle_rate << ',' << report.tl << ',' << report.spl << ','
      << report.ndtw << ',' << report.sdtw << ',' << report.cls << '\n';
}

void write_report(const std::filesystem::path& prefix, const GenerationReport& report, const nlohmann::json& meta) {
  write_json(with_suffix(prefix, ".json"), report.to_json(), meta);
  std::ofstream out(with_suffix(prefix, ".csv"));
  if (!out) throw std::runtime_error("cannot write " + prefix.string() + ".csv");
  out.precision(10);
  out << "route_id,graph,candidate,bleu1,bleu4,rouge_l,cider\n";
  for (const auto& r : report.rows)
    out << r.route_id << ',' << r.graph << ',' << csv_quote(r.candidate) << ',' << r.bleu1 << ',' << r.bleu4 << ','
        << r.rouge_l << ',' << r.cider << '\n';
  out << "mean,,," << report.bleu1 << ',' << report.bleu4 << ',' << report.rouge_l << ',' << report.cider << '\n';
}

}  // namespace duonav::eval
