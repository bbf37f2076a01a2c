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

// duonav command line: world and data generation, training, inference,
// evaluation and gradient verification.
//
// Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
// 3 data error, 4 numeric failure.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "duonav/agent/navigator.hpp"
#include "duonav/env/dataset.hpp"
#include "duonav/eval/evaluate.hpp"
#include "duonav/io/checkpoint.hpp"
#include "duonav/io/config.hpp"
#include "duonav/train/gradient_check.hpp"
#include "duonav/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace duonav;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

constexpr const char* kDataRootEnv = "DUONAV_DATA_ROOT";

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "TOML-style run configuration");
  cmd->add_option("--set", c.overrides, "Override a config key, section.key=value (repeatable)");
  cmd->add_option("--seed", c.seed, "Root seed (overrides run.seed)");
  cmd->add_option("--out", c.out, "Output directory");
}

struct Context {
  io::RunConfig run;
  fs::path data_root;
  fs::path out;
};

Context make_context(const Common& c, const fs::path& default_out) {
  io::Config cfg = c.config.empty() ? io::Config{} : io::Config::load(c.config);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  if (c.seed) cfg.set("run.seed", std::to_string(*c.seed));
  Context ctx;
  ctx.run = io::RunConfig::from_config(cfg);
  const char* env = std::getenv(kDataRootEnv);
  ctx.data_root = env && *env ? fs::path(env) : fs::path(ctx.run.data_dir);
  ctx.out = c.out.empty() ? (default_out.empty() ? ctx.data_root : default_out) : fs::path(c.out);
  fs::create_directories(ctx.out);
  return ctx;
}

fs::path world_path(const Context& ctx) { return ctx.data_root / "world.json"; }
fs::path split_path(const fs::path& dir, env::Split s) { return dir / (std::string(env::split_name(s)) + ".jsonl"); }

env::World load_world(const Context& ctx) {
  const fs::path p = world_path(ctx);
  if (!fs::exists(p)) throw env::DataError("no world at " + p.string() + " (run gen-world first)");
  return env::World::load(p);
}

std::vector<env::PairRecord> load_split(const Context& ctx, env::Split s) {
  const fs::path p = split_path(ctx.data_root, s);
  if (!fs::exists(p)) throw env::DataError("no records at " + p.string() + " (run gen-data first)");
  return env::read_jsonl(p);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_run_config(const Context& ctx, const std::string& command) {
  std::ofstream out(ctx.out / (command + ".toml"));
  out << ctx.run.to_config().to_text();
}

std::vector<double> probs_of(const agent::Distribution& d) { return d.probs; }

// ---------------------------------------------------------------------------

int cmd_gen_world(const Common& c) {
  const Context ctx = make_context(c, {});
  const env::World world(ctx.run.data, io::subsystem_seed(ctx.run.seed, io::Subsystem::World));
  const fs::path p = ctx.out / "world.json";
  world.save(p);
  int nodes = 0, edges = 0;
  for (int g = 0; g < world.graph_count(); ++g) {
    nodes += world.graph(g).size();
    edges += world.graph(g).edge_count();
  }
  std::cout << "graphs " << world.graph_count() << " nodes " << nodes << " edges " << edges << " vocab "
            << world.vocabulary().size() << " -> " << p.string() << "\n";
  return kExitOk;
}

int cmd_gen_data(const Common& c) {
  const Context ctx = make_context(c, {});
  const env::World world = load_world(ctx);
  const std::uint64_t seed = io::subsystem_seed(ctx.run.seed, io::Subsystem::Data);
  for (env::Split s : {env::Split::Train, env::Split::ValSeen, env::Split::ValUnseen}) {
    const auto records = env::make_split(world, s, ctx.run.data.routes(s), seed);
    const auto ids = world.graph_ids(s);
    for (const auto& r : records)
      if (std::find(ids.begin(), ids.end(), r.graph) == ids.end())
        throw env::DataError(std::string("split ") + env::split_name(s) + " uses graph " + std::to_string(r.graph));
    const fs::path p = split_path(ctx.out, s);
    env::write_jsonl(p, records);
    std::cout << env::split_name(s) << " " << records.size() << " records -> " << p.string() << "\n";
  }
  return kExitOk;
}

struct TrainOptions {
  std::string resume;
  std::string init;
  std::string regime;
};

int run_training(const Common& c, const TrainOptions& opt, train::Phase phase) {
  const bool pre = phase == train::Phase::Pretrain;
  Context ctx = make_context(c, pre ? "runs/pretrain" : "runs/finetune");
  if (!opt.regime.empty()) {
    try {
      ctx.run.finetune.regime = train::parse_regime(opt.regime);
    } catch (const std::invalid_argument& e) {
      throw io::ConfigError(e.what());
    }
  }
  const env::World world = load_world(ctx);
  const auto records = load_split(ctx, env::Split::Train);
  const auto samples = env::resolve(world, records);
  std::vector<train::Example> examples;
  examples.reserve(samples.size());
  for (const auto& s : samples) examples.push_back({&s.route, &s.record->instruction});

  std::unique_ptr<agent::Navigator> nav;
  if (pre) {
    nav = std::make_unique<agent::Navigator>(ctx.run.model_for(world.vocabulary().size()),
                                             io::subsystem_seed(ctx.run.seed, io::Subsystem::Model));
  } else {
    if (opt.init.empty()) throw io::ConfigError("finetune needs --init <pretrained checkpoint>");
    nav = io::load_model(opt.init);
    if (nav->config().vocab_size != world.vocabulary().size())
      throw env::DataError("checkpoint vocabulary does not match the world");
  }

  train::TrainConfig tc = pre ? ctx.run.pretrain : ctx.run.finetune;
  tc.phase = phase;
  tc.seed = io::subsystem_seed(ctx.run.seed, pre ? io::Subsystem::Pretrain : io::Subsystem::Finetune);
  train::Trainer trainer(*nav, examples, tc);
  if (!opt.resume.empty()) train::load_training_checkpoint(opt.resume, *nav, trainer);

  write_run_config(ctx, pre ? "pretrain" : "finetune");
  nlohmann::json extra;
  extra["run_config"] = ctx.run.to_json();
  if (!opt.init.empty()) extra["init"] = opt.init;

  train::LossLog log(ctx.out / "loss.csv", !opt.resume.empty());
  const int every = tc.checkpoint_every;
  const int report = std::max(1, tc.iterations / 20);
  trainer.run([&](const train::IterationLog& row) {
    log.write(row);
    const std::int64_t done = row.iteration + 1;
    if (every > 0 && done % every == 0 && done < tc.iterations)
      train::save_training_checkpoint(ctx.out / ("step-" + std::to_string(done) + ".ckpt"), *nav, trainer, extra);
    if (done % report == 0)
      std::cout << "iter " << done << " task " << train::task_name(row.task) << " loss " << row.loss << "\n";
  });
  const fs::path final_path = ctx.out / "model.ckpt";
  train::save_training_checkpoint(final_path, *nav, trainer, extra);
  std::cout << "checkpoint -> " << final_path.string() << "\n";
  return kExitOk;
}

struct FollowOptions {
  std::string checkpoint;
  std::string split = "val_unseen";
  int record = -1;
  std::string text;
  int graph = 0;
  int start = 0;
};

int cmd_follow(const Common& c, const FollowOptions& o) {
  const Context ctx = make_context(c, "reports");
  if (o.checkpoint.empty()) throw io::ConfigError("follow needs --checkpoint");
  const env::World world = load_world(ctx);
  const auto nav = io::load_model(o.checkpoint);

  nlohmann::json j;
  agent::Instruction ins;
  int graph = o.graph, start = o.start;
  if (o.record >= 0) {
    const auto records = load_split(ctx, env::parse_split(o.split));
    if (o.record >= static_cast<int>(records.size())) throw env::DataError("record index out of range");
    const auto& rec = records[static_cast<std::size_t>(o.record)];
    env::validate_record(world, rec);
    ins = rec.instruction;
    graph = rec.graph;
    start = rec.path.front();
    j["record"] = o.record;
    j["split"] = o.split;
    j["reference"] = rec.path;
  } else {
    if (o.text.empty()) throw io::ConfigError("follow needs --record or --text");
    if (graph < 0 || graph >= world.graph_count()) throw env::DataError("graph id out of range");
    if (start < 0 || start >= world.graph(graph).size()) throw env::DataError("start node out of range");
    const auto words = world.vocabulary().encode(o.text);
    if (std::find(words.begin(), words.end(), agent::Vocabulary::kUnk) != words.end())
      throw env::DataError("instruction has words outside the vocabulary");
    ins = agent::Instruction::frame(words);
  }
  const auto result = nav->follow_instruction(ins, world.graph(graph), start, ctx.run.eval.max_steps);
  j["graph"] = graph;
  j["instruction"] = world.vocabulary().decode(ins.tokens);
  j["nodes"] = result.nodes;
  j["stopped"] = result.stopped;
  j["truncated"] = result.truncated;
  auto& steps = j["steps"] = nlohmann::json::array();
  for (std::size_t t = 0; t < result.decisions.size(); ++t) {
    const int choice = result.decisions[t].argmax();
    steps.push_back({{"step", t}, {"node", result.nodes[t]}, {"choice", choice}, {"probs", probs_of(result.decisions[t])}});
  }
  j["config"] = ctx.run.to_json();
  write_json(ctx.out / "follow.json", j);
  std::cout << "path";
  for (int n : result.nodes) std::cout << ' ' << n;
  std::cout << (result.stopped ? " (stopped)" : " (truncated)") << "\n";
  return kExitOk;
}

struct DescribeOptions {
  std::string checkpoint;
  std::string split = "val_unseen";
  int record = 0;
  bool prefix = false;
  int top_k = 5;
};

nlohmann::json describe_route(const agent::Navigator& nav, const env::World& world, const agent::Route& route,
                              int max_words, int top_k) {
  agent::GenerationTrace trace;
  const auto ins = nav.generate_instruction(route, max_words, &trace);
  nlohmann::json j;
  j["text"] = world.vocabulary().decode(ins.tokens);
  auto& steps = j["steps"] = nlohmann::json::array();
  for (const auto& d : trace.steps) {
    std::vector<int> order(d.probs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::max(top_k, 1)), order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<long>(k), order.end(),
                      [&](int a, int b) { return d.probs[static_cast<std::size_t>(a)] > d.probs[static_cast<std::size_t>(b)]; });
    auto& top = steps.emplace_back(nlohmann::json::array());
    for (std::size_t i = 0; i < k; ++i)
      top.push_back({{"word", world.vocabulary().token(order[i])}, {"p", d.probs[static_cast<std::size_t>(order[i])]}});
  }
  return j;
}

int cmd_describe(const Common& c, const DescribeOptions& o) {
  const Context ctx = make_context(c, "reports");
  if (o.checkpoint.empty()) throw io::ConfigError("describe needs --checkpoint");
  const env::World world = load_world(ctx);
  const auto nav = io::load_model(o.checkpoint);
  const auto records = load_split(ctx, env::parse_split(o.split));
  if (o.record < 0 || o.record >= static_cast<int>(records.size())) throw env::DataError("record index out of range");
  const auto& rec = records[static_cast<std::size_t>(o.record)];
  env::validate_record(world, rec);
  const auto route = env::build_route(world.graph(rec.graph), rec.path);

  nlohmann::json j;
  j["record"] = o.record;
  j["split"] = o.split;
  j["graph"] = rec.graph;
  j["path"] = rec.path;
  j["reference"] = world.vocabulary().decode(rec.instruction.tokens);
  auto& out = j["descriptions"] = nlohmann::json::array();
  const int first = o.prefix ? 1 : route.length();
  for (int t = first; t <= route.length(); ++t) {
    agent::Route part;
    part.steps.assign(route.steps.begin(), route.steps.begin() + t);
    part.terminal = t < route.length() ? route.steps[static_cast<std::size_t>(t)].observation : *route.terminal;
    auto d = describe_route(*nav, world, part, ctx.run.eval.max_words, o.top_k);
    d["prefix_steps"] = t;
    std::cout << "r[1:" << t << "] " << d["text"].get<std::string>() << "\n";
    out.push_back(std::move(d));
  }
  j["config"] = ctx.run.to_json();
  write_json(ctx.out / "describe.json", j);
  return kExitOk;
}

struct EvaluateOptions {
  std::string checkpoint;
  std::string split = "val_unseen";
  std::string task = "both";
  bool baseline = false;
};

int cmd_evaluate(const Common& c, const EvaluateOptions& o) {
  const Context ctx = make_context(c, "reports");
  if (o.task != "follow" && o.task != "generate" && o.task != "both")
    throw io::ConfigError("--task must be follow, generate or both");
  if (o.checkpoint.empty() && !(o.baseline && o.task == "follow"))
    throw io::ConfigError("evaluate needs --checkpoint");
  const env::World world = load_world(ctx);
  const env::Split split = env::parse_split(o.split);
  const auto records = load_split(ctx, split);
  nlohmann::json meta;
  meta["config"] = ctx.run.to_json();
  meta["split"] = o.split;
  meta["checkpoint"] = o.checkpoint;
  const std::string base = std::string(env::split_name(split));

  if (o.baseline) {
    const auto rep = eval::evaluate_random_policy(world, records, ctx.run.eval,
                                                  io::subsystem_seed(ctx.run.seed, io::Subsystem::Baseline));
    eval::write_report(ctx.out / (base + "_random"), rep, meta);
    std::cout << "random " << rep.aggregate_json().dump() << "\n";
  }
  if (o.checkpoint.empty()) return kExitOk;
  const auto nav = io::load_model(o.checkpoint);
  if (o.task != "generate") {
    const auto rep = eval::evaluate_following(*nav, world, records, ctx.run.eval);
    eval::write_report(ctx.out / (base + "_follow"), rep, meta);
    std::cout << "follow " << rep.aggregate_json().dump() << "\n";
  }
  if (o.task != "follow") {
    const auto rep = eval::evaluate_generation(*nav, world, records, ctx.run.eval);
    eval::write_report(ctx.out / (base + "_generate"), rep, meta);
    std::cout << "generate " << rep.aggregate_json().dump() << "\n";
  }
  return kExitOk;
}

struct GradcheckCliOptions {
  int width = 8;
  int heads = 2;
  int batch = 2;
  double tolerance = 1e-4;
  double step = 1e-3;
  int order = 4;
  int max_entries = 8;
};

int cmd_gradcheck(const Common& c, const GradcheckCliOptions& o) {
  Context ctx = make_context(c, "reports");
  if (sizeof(Real) != sizeof(double)) throw io::ConfigError("gradcheck needs a double-precision build");
  env::DatasetConfig dc = ctx.run.data;
  dc.train_graphs = 1;
  dc.unseen_graphs = 1;
  dc.world.nodes = 12;
  dc.min_route_steps = 2;
  dc.max_route_steps = 3;
  const env::World world(dc, io::subsystem_seed(ctx.run.seed, io::Subsystem::World));
  const auto records = env::make_split(world, env::Split::Train, o.batch, io::subsystem_seed(ctx.run.seed, io::Subsystem::Data));
  const auto samples = env::resolve(world, records);
  std::vector<train::Example> batch;
  for (const auto& s : samples) batch.push_back({&s.route, &s.record->instruction});

  ctx.run.model.attention.width = o.width;
  ctx.run.model.attention.heads = o.heads;
  agent::Navigator nav(ctx.run.model_for(world.vocabulary().size()), io::subsystem_seed(ctx.run.seed, io::Subsystem::Model));
  diffcore::GradcheckOptions opts;
  opts.tolerance = o.tolerance;
  opts.step = o.step;
  opts.order = o.order;
  opts.max_entries_per_param = o.max_entries;
  opts.seed = ctx.run.seed;
  const auto rep = train::check_joint_gradients(nav, batch, opts);

  nlohmann::json j;
  j["passed"] = rep.passed;
  j["max_rel_error"] = rep.max_rel_error;
  j["tolerance"] = rep.tolerance;
  j["worst"] = rep.worst;
  auto& entries = j["parameters"] = nlohmann::json::array();
  for (const auto& e : rep.entries)
    entries.push_back({{"name", e.name}, {"max_rel_error", e.max_rel_error}, {"max_abs_error", e.max_abs_error},
                       {"checked", e.checked}});
  j["config"] = ctx.run.to_json();
  write_json(ctx.out / "gradcheck.json", j);
  std::cout << (rep.passed ? "PASS" : "FAIL") << " max_rel_error " << rep.max_rel_error << " (" << rep.worst
            << ", tolerance " << rep.tolerance << ")\n";
  return rep.passed ? kExitOk : kExitNumeric;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const io::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const env::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const io::CheckpointError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const diffcore::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"duonav: one model for instruction following and instruction generation"};
  app.require_subcommand(1);
  Common common;
  std::function<int()> action;

  auto* gen_world = app.add_subcommand("gen-world", "Generate the graph world");
  add_common(gen_world, common);
  gen_world->callback([&] { action = [&] { return cmd_gen_world(common); }; });

  auto* gen_data = app.add_subcommand("gen-data", "Sample routes and instructions for every split");
  add_common(gen_data, common);
  gen_data->callback([&] { action = [&] { return cmd_gen_data(common); }; });

  TrainOptions train_opts;
  auto* pretrain = app.add_subcommand("pretrain", "Multi-task pretraining");
  add_common(pretrain, common);
  pretrain->add_option("--resume", train_opts.resume, "Resume from a training checkpoint");
  pretrain->callback([&] { action = [&] { return run_training(common, train_opts, train::Phase::Pretrain); }; });

  auto* finetune = app.add_subcommand("finetune", "Fine-tune a pretrained model");
  add_common(finetune, common);
  finetune->add_option("--init", train_opts.init, "Pretrained checkpoint");
  finetune->add_option("--regime", train_opts.regime, "mt, st-if or st-ig");
  finetune->add_option("--resume", train_opts.resume, "Resume from a training checkpoint");
  finetune->callback([&] { action = [&] { return run_training(common, train_opts, train::Phase::Finetune); }; });

  FollowOptions follow_opts;
  auto* follow = app.add_subcommand("follow", "Follow one instruction");
  add_common(follow, common);
  follow->add_option("--checkpoint", follow_opts.checkpoint, "Model checkpoint")->required();
  follow->add_option("--split", follow_opts.split, "Split of --record");
  follow->add_option("--record", follow_opts.record, "Record index in the split");
  follow->add_option("--text", follow_opts.text, "Instruction text");
  follow->add_option("--graph", follow_opts.graph, "Graph of --text");
  follow->add_option("--start", follow_opts.start, "Start node of --text");
  follow->callback([&] { action = [&] { return cmd_follow(common, follow_opts); }; });

  DescribeOptions describe_opts;
  auto* describe = app.add_subcommand("describe", "Generate an instruction for a route");
  add_common(describe, common);
  describe->add_option("--checkpoint", describe_opts.checkpoint, "Model checkpoint")->required();
  describe->add_option("--split", describe_opts.split, "Split of --record");
  describe->add_option("--record", describe_opts.record, "Record index in the split");
  describe->add_flag("--prefix", describe_opts.prefix, "Describe every route prefix r[1:t]");
  describe->add_option("--top-k", describe_opts.top_k, "Words listed per decoding step");
  describe->callback([&] { action = [&] { return cmd_describe(common, describe_opts); }; });

  EvaluateOptions eval_opts;
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a split");
  add_common(evaluate, common);
  evaluate->add_option("--checkpoint", eval_opts.checkpoint, "Model checkpoint");
  evaluate->add_option("--split", eval_opts.split, "train, val_seen or val_unseen");
  evaluate->add_option("--task", eval_opts.task, "follow, generate or both");
  evaluate->add_flag("--baseline", eval_opts.baseline, "Also score the uniform random policy");
  evaluate->callback([&] { action = [&] { return cmd_evaluate(common, eval_opts); }; });

  GradcheckCliOptions gc_opts;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the joint loss");
  add_common(gradcheck, common);
  gradcheck->add_option("--width", gc_opts.width, "Model width");
  gradcheck->add_option("--heads", gc_opts.heads, "Attention heads");
  gradcheck->add_option("--batch", gc_opts.batch, "Pairs in the checked batch (>= 2)");
  gradcheck->add_option("--tolerance", gc_opts.tolerance, "Maximum relative error");
  gradcheck->add_option("--step", gc_opts.step, "Finite-difference step");
  gradcheck->add_option("--order", gc_opts.order, "Stencil order")->check(CLI::IsMember({2, 4}));
  gradcheck->add_option("--max-entries", gc_opts.max_entries, "Coordinates per parameter (0 = all)");
  gradcheck->callback([&] { action = [&] { return cmd_gradcheck(common, gc_opts); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  return guarded(action);
}
