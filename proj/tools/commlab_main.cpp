// commlab: communication-topology laboratory CLI.
//
// Subcommands generate topology exports, exact reachability/gossip metrics,
// dissemination sweeps, loss-kernel self-checks and the majority-bit
// training/evaluation/transfer experiments. Artifacts are byte-stable: fixed
// row order, 12-significant-digit floats and a config digest in the header.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "commlab/analysis.hpp"
#include "commlab/config.hpp"
#include "commlab/csv.hpp"
#include "commlab/dissemination.hpp"
#include "commlab/envlab.hpp"
#include "commlab/export.hpp"
#include "commlab/losses.hpp"
#include "commlab/parallel.hpp"
#include "commlab/rng.hpp"
#include "commlab/runtime.hpp"
#include "commlab/topology.hpp"

namespace fs = std::filesystem;
using namespace commlab;
using nlohmann::json;

namespace {

struct CliContext {
  ExperimentConfig cfg;
  fs::path out_dir;
  int jobs = 1;

  std::vector<std::string> artifact_comments() const {
    return {"config_digest=" + cfg.digest()};
  }

  fs::path artifact(const std::string& name) const { return out_dir / name; }
};

void announce(const fs::path& path, std::size_t rows) {
  std::cout << "wrote " << path.string() << " (" << rows << " rows)\n";
}

// --------------------------------------------------------------------------
// topology: DOT and adjacency-list exports of the configured schedule.

int cmd_topology(const CliContext& ctx) {
  const TopologySchedule sched = ctx.cfg.make_topology_schedule();
  const int steps = sched.period() > 0
                        ? sched.period()
                        : ctx.cfg.resolved_horizon(ctx.cfg.topology.n);

  const fs::path dot_path = ctx.artifact("topology.dot");
  {
    std::ofstream out(dot_path, std::ios::binary);
    out << "// config_digest=" << ctx.cfg.digest() << "\n";
    write_dot(out, sched, steps);
  }
  announce(dot_path, steps);

  const fs::path txt_path = ctx.artifact("topology.txt");
  {
    std::ofstream out(txt_path, std::ios::binary);
    out << "# config_digest=" << ctx.cfg.digest() << "\n";
    write_adjacency_list(out, sched, steps);
  }
  announce(txt_path, steps);
  return 0;
}

// --------------------------------------------------------------------------
// analyze: diameter / time-to-full-reach / size metrics.

int cmd_analyze(const CliContext& ctx) {
  const TopologySchedule sched = ctx.cfg.make_topology_schedule();
  const int n = sched.n();

  std::vector<std::string> comments = ctx.artifact_comments();
  comments.push_back("diameter_or_ttfr: static kinds report the BFS diameter at t0=0;");
  comments.push_back("time-varying kinds report time_to_full_reach per phase; -1 = unreachable");
  if (sched.kind() == TopologyKind::StaticExponential) {
    const int per_node = floor_log2(n > 1 ? n - 1 : 1) + 1;
    comments.push_back(
        "static exponential size is n*(floor(log2(n-1))+1) = " +
        std::to_string(static_cast<long long>(n) * per_node) +
        "; the floor-only form n*floor(log2(n-1)) = " +
        std::to_string(static_cast<long long>(n) * (per_node - 1)) +
        " undercounts the generated out-edges by n");
  }

  CsvWriter csv(ctx.artifact("metrics.csv").string(), comments,
                {"topology", "n", "k", "t0", "diameter_or_ttfr", "size"});
  std::size_t rows = 0;
  const bool time_varying =
      sched.kind() == TopologyKind::OnePeerExponential || sched.period() == 0;
  if (!time_varying) {
    const AdjacencyMatrix adj = sched.at(0);
    const auto d = diameter(adj);
    csv.row({ctx.cfg.topology.kind, std::int64_t{n}, std::int64_t{ctx.cfg.topology.k},
             std::int64_t{0}, std::int64_t{d ? *d : -1}, graph_size(adj)});
    ++rows;
    std::cout << ctx.cfg.topology.kind << " n=" << n << ": diameter="
              << (d ? std::to_string(*d) : std::string("unreachable"))
              << " size=" << graph_size(adj) << "\n";
  } else {
    const int phases = std::max(sched.period(), 1);
    std::cout << ctx.cfg.topology.kind << " n=" << n
              << ": time_to_full_reach per phase:";
    for (int t0 = 0; t0 < phases; ++t0) {
      const auto w = time_to_full_reach(sched, t0);
      csv.row({ctx.cfg.topology.kind, std::int64_t{n}, std::int64_t{ctx.cfg.topology.k},
               std::int64_t{t0}, std::int64_t{w ? *w : -1},
               graph_size(sched.at(t0))});
      ++rows;
      std::cout << " " << (w ? std::to_string(*w) : std::string("none"));
    }
    std::cout << "\n";
  }
  if (sched.kind() == TopologyKind::StaticExponential) {
    const int per_node = floor_log2(n > 1 ? n - 1 : 1) + 1;
    std::cout << "size note: n*(floor(log2(n-1))+1) = "
              << static_cast<long long>(n) * per_node
              << "; floor-only form n*floor(log2(n-1)) = "
              << static_cast<long long>(n) * (per_node - 1) << "\n";
  }
  csv.close();
  announce(ctx.artifact("metrics.csv"), rows);
  return 0;
}

// --------------------------------------------------------------------------
// disseminate: the budget-sweep spread experiment.

int cmd_disseminate(const CliContext& ctx) {
  DisseminationConfig dcfg;
  dcfg.n = ctx.cfg.dissemination.n;
  dcfg.budgets = ctx.cfg.dissemination.budgets;
  dcfg.seeds = ctx.cfg.dissemination.seeds;
  dcfg.base_seed = ctx.cfg.seed;
  dcfg.sources = ctx.cfg.dissemination.sources;
  dcfg.max_t = ctx.cfg.dissemination.max_t;
  dcfg.families = ctx.cfg.dissemination.families;

  const std::vector<DisseminationRow> rows =
      run_dissemination_experiment(dcfg, ctx.jobs);
  CsvWriter csv(ctx.artifact("dissemination.csv").string(), ctx.artifact_comments(),
                {"topology", "n", "k", "seed", "source", "t", "coverage"});
  for (const DisseminationRow& r : rows)
    csv.row({r.topology, std::int64_t{r.n}, std::int64_t{r.k},
             static_cast<std::int64_t>(r.seed), std::int64_t{r.source},
             std::int64_t{r.t}, std::int64_t{r.coverage}});
  csv.close();
  announce(ctx.artifact("dissemination.csv"), rows.size());
  return 0;
}

// --------------------------------------------------------------------------
// gossip: consensus-error curves for the configured topology.

int cmd_gossip(const CliContext& ctx) {
  const int n = ctx.cfg.topology.n;
  const int steps =
      ctx.cfg.gossip.steps > 0 ? ctx.cfg.gossip.steps : 2 * ceil_log2(std::max(n, 2));

  std::vector<std::vector<double>> errors(ctx.cfg.gossip.seeds);
  parallel_for(ctx.cfg.gossip.seeds, ctx.jobs, [&](int s) {
    const TopologySchedule sched = ctx.cfg.make_topology_schedule();
    Rng rng(derive_seed(ctx.cfg.seed, "gossip-x0", s));
    std::vector<double> x0(n);
    for (double& v : x0) v = rng.unit();
    errors[s] = gossip_consensus(sched, x0, steps).consensus_error;
  });

  CsvWriter csv(ctx.artifact("gossip.csv").string(), ctx.artifact_comments(),
                {"topology", "n", "seed", "t", "consensus_error"});
  std::size_t rows = 0;
  for (int s = 0; s < ctx.cfg.gossip.seeds; ++s)
    for (int t = 0; t < static_cast<int>(errors[s].size()); ++t) {
      csv.row({ctx.cfg.topology.kind, std::int64_t{n}, std::int64_t{s},
               std::int64_t{t}, errors[s][t]});
      ++rows;
    }
  csv.close();
  announce(ctx.artifact("gossip.csv"), rows);
  std::cout << ctx.cfg.topology.kind << " n=" << n << ": consensus error after "
            << steps << " steps = " << format_double(errors[0].back()) << "\n";
  return 0;
}

// --------------------------------------------------------------------------
// losses-selfcheck: the invariant and gradient suite.

struct CheckReport {
  std::vector<std::string> lines;
  bool ok = true;

  void check(bool passed, const std::string& label) {
    lines.push_back(std::string(passed ? "ok: " : "FAIL: ") + label);
    ok &= passed;
  }
};

int cmd_losses_selfcheck(const CliContext& ctx) {
  const LossConfig& lc = ctx.cfg.losses;
  CheckReport report;

  {  // uniform batch pins the loss at ln(M+1)
    std::vector<double> u = {0.4, -0.3, 0.8, 0.1};
    ContrastiveBatch batch;
    batch.anchor = batch.positive = u;
    batch.negatives.assign(lc.m_negatives, u);
    const double loss = infonce_loss(batch, lc.tau);
    const double expected = std::log(lc.m_negatives + 1.0);
    report.check(std::abs(loss - expected) <= 1e-9,
                 "uniform batch loss = ln(M+1) = " + format_double(expected));
  }
  {  // scale invariance of the normalization
    bool ok = true;
    for (std::uint64_t seed = 0; seed < 16 && ok; ++seed) {
      Rng rng(derive_seed(ctx.cfg.seed, "selfcheck-scale", seed));
      ContrastiveBatch batch;
      auto vec = [&] {
        std::vector<double> v(6);
        for (double& x : v) x = rng.uniform(-1.0, 1.0);
        return v;
      };
      batch.anchor = vec();
      batch.positive = vec();
      for (int m = 0; m < lc.m_negatives; ++m) batch.negatives.push_back(vec());
      const double base = infonce_loss(batch, lc.tau);
      for (double& v : batch.anchor) v *= 37.5;
      for (double& v : batch.negatives[0]) v *= 1e-3;
      ok = std::abs(infonce_loss(batch, lc.tau) - base) <= 1e-9;
    }
    report.check(ok, "loss invariant under positive input rescaling");
  }
  {  // negative-window audit over an episode-generated message log
    MajorityBitEnv env(6, 24);
    RandomBitPolicy policy;
    struct Encoder {
      MessageVector operator()(const MajorityBitEnv& env, int i, int t) const {
        return {env.agent_bit(i) ? 1.0 : 0.0, static_cast<double>(t)};
      }
    };
    RecurrentAggregatorDriver<MajorityBitEnv, Encoder> driver{
        RecurrentParams::random(4, 2, derive_seed(ctx.cfg.seed, "selfcheck-agg")),
        Encoder{}};
    const TopologySchedule sched = make_schedule(TopologyKind::OnePeerExponential, 6);
    auto [buffer, budget] = run_episode(env, policy, sched, driver, 24,
                                        derive_seed(ctx.cfg.seed, "selfcheck-episode"));
    MessageLog log;
    for (const EpisodeStep& step : buffer.steps) log.push_back(step.messages);

    const int diameter = ceil_log2(6);
    bool ok = true;
    for (int i = 0; i < 10000 && ok; ++i) {
      const ContrastiveSample s = sample_contrastive_pairs(
          log, diameter, lc, derive_seed(ctx.cfg.seed, "selfcheck-sample", i));
      for (const auto& [agent, t] : s.negative_indices)
        ok &= std::abs(t - s.anchor_t) > diameter;
      ok &= s.positive_agent != s.anchor_agent;
    }
    report.check(ok, "10000 sampled batches keep negatives outside the window");
  }
  {  // gradient checks at 100 random points, 25 per kernel family
    double worst = 0.0;
    for (int rep = 0; rep < 25; ++rep) {
      Rng rng(derive_seed(ctx.cfg.seed, "selfcheck-grad", rep));
      auto vec = [&](int d) {
        std::vector<double> v(d);
        for (double& x : v) x = rng.uniform(-1.0, 1.0);
        return v;
      };

      ContrastiveBatch batch;
      batch.anchor = vec(5);
      batch.positive = vec(5);
      for (int m = 0; m < 4; ++m) batch.negatives.push_back(vec(5));
      const InfoNceGradients g = infonce_loss_with_grad(batch, lc.tau);
      worst = std::max(worst, finite_diff_check(
                                  [&](const std::vector<double>& x) {
                                    ContrastiveBatch b = batch;
                                    b.anchor = x;
                                    return infonce_loss(b, lc.tau);
                                  },
                                  batch.anchor, g.anchor, 1e-6));

      std::vector<std::vector<double>> states = {vec(3), vec(3)};
      std::vector<std::vector<double>> preds = {vec(3), vec(3)};
      const auto pg = aux_pred_loss_grad_predictions(states, preds);
      worst = std::max(worst, finite_diff_check(
                                  [&](const std::vector<double>& x) {
                                    auto p = preds;
                                    p[0] = x;
                                    return aux_pred_loss(states, p);
                                  },
                                  preds[0], pg[0], 1e-5));

      const RecurrentParams rp = RecurrentParams::random(4, 2, rng.next_u64());
      const MessageVector prev = vec(4), obs = vec(2), upstream = vec(4);
      const std::vector<MessageVector> rec = {vec(4), vec(4)};
      std::vector<const MessageVector*> rec_ptrs = {&rec[0], &rec[1]};
      const AggregatorGradients rg =
          recurrent_aggregator_backward(prev, rec_ptrs, obs, rp, upstream);
      worst = std::max(
          worst, finite_diff_check(
                     [&](const std::vector<double>& x) {
                       const MessageVector out =
                           recurrent_aggregator_update(x, rec_ptrs, obs, rp);
                       double s = 0.0;
                       for (int i = 0; i < 4; ++i) s += upstream[i] * out[i];
                       return s;
                     },
                     prev, rg.prev, 1e-6));

      const AttentionParams ap = AttentionParams::random(4, 2, rng.next_u64());
      const AggregatorGradients ag =
          attention_aggregator_backward(prev, rec_ptrs, obs, ap, upstream);
      worst = std::max(
          worst, finite_diff_check(
                     [&](const std::vector<double>& x) {
                       const MessageVector out =
                           attention_aggregator_update(x, rec_ptrs, obs, ap);
                       double s = 0.0;
                       for (int i = 0; i < 4; ++i) s += upstream[i] * out[i];
                       return s;
                     },
                     prev, ag.prev, 1e-6));
    }
    report.check(worst <= 1e-5, "analytic gradients match central differences at 100 "
                                "points, max rel err = " +
                                    format_double(worst));
  }
  {  // td/aux/total arithmetic spot checks
    report.check(td_loss({{1.0, 0.0}, {0.0, 2.0}}) == 2.5, "td_loss arithmetic");
    report.check(total_loss(1.0, 2.0, lc.alpha) ==
                     1.0 + lc.alpha * 2.0,
                 "total loss = td + alpha*aux with alpha = " + format_double(lc.alpha));
  }

  const fs::path path = ctx.artifact("selfcheck.txt");
  std::ofstream out(path, std::ios::binary);
  out << "# config_digest=" << ctx.cfg.digest() << "\n";
  for (const std::string& line : report.lines) {
    out << line << "\n";
    std::cout << line << "\n";
  }
  out.close();
  announce(path, report.lines.size());
  return report.ok ? 0 : 1;
}

// --------------------------------------------------------------------------
// train / evaluate / transfer.

json policy_to_json(const TabularPolicy& policy) {
  json j;
  j["buckets"] = policy.buckets();
  j["feature_mode"] =
      policy.mode() == FeatureMode::NormalizedFractions ? "normalized" : "raw";
  j["q"] = policy.table();
  return j;
}

TabularPolicy policy_from_json(const json& j) {
  TabularPolicy policy(j.at("buckets").get<int>(),
                       j.at("feature_mode").get<std::string>() == "raw"
                           ? FeatureMode::RawCounts
                           : FeatureMode::NormalizedFractions);
  const auto q = j.at("q").get<std::vector<double>>();
  if (q.size() != policy.table().size())
    throw ConfigError("policy file: table size mismatch");
  policy.table() = q;
  return policy;
}

void require_union_aggregator(const CliContext& ctx) {
  if (ctx.cfg.runtime.aggregator != "union")
    throw ConfigError(
        "config: invalid value at 'runtime.aggregator': the majority-bit "
        "policies consume union-aggregator statistics");
}

int cmd_train(const CliContext& ctx) {
  require_union_aggregator(ctx);
  const int n = ctx.cfg.topology.n;
  const int horizon = ctx.cfg.resolved_horizon(n);
  const TopologySchedule sched = ctx.cfg.make_topology_schedule();
  const TrainResult result =
      train_iql(n, horizon, sched, ctx.cfg.training_config(), ctx.cfg.seed);

  const std::string run_id =
      ctx.cfg.experiment + "-seed" + std::to_string(ctx.cfg.seed);
  CsvWriter csv(ctx.artifact("training.csv").string(), ctx.artifact_comments(),
                {"run_id", "episode", "eval_reward", "td_loss", "aux_loss", "epsilon"});
  for (const LearningCurvePoint& p : result.curve)
    csv.row({run_id, std::int64_t{p.episode}, p.eval_reward, p.td_loss, p.aux_loss,
             p.epsilon});
  csv.close();
  announce(ctx.artifact("training.csv"), result.curve.size());

  const fs::path policy_path = ctx.artifact("policy.json");
  {
    std::ofstream out(policy_path, std::ios::binary);
    json j = policy_to_json(result.policy);
    j["config_digest"] = ctx.cfg.digest();
    out << j.dump(2) << "\n";
  }
  announce(policy_path, 1);
  std::cout << "final greedy eval reward = "
            << format_double(result.curve.back().eval_reward) << "\n";
  return 0;
}

int cmd_evaluate(const CliContext& ctx) {
  require_union_aggregator(ctx);
  const int n = ctx.cfg.topology.n;
  const int horizon = ctx.cfg.resolved_horizon(n);
  const TopologySchedule sched = ctx.cfg.make_topology_schedule();
  const int episodes = ctx.cfg.evaluation.episodes;

  EvalResult result;
  if (ctx.cfg.evaluation.policy == "scripted") {
    ScriptedCountPolicy policy(horizon - 1);
    result = evaluate(policy, n, horizon, sched, episodes, ctx.cfg.seed);
  } else if (ctx.cfg.evaluation.policy == "random") {
    RandomBitPolicy policy;
    result = evaluate(policy, n, horizon, sched, episodes, ctx.cfg.seed);
  } else {  // own_bit: vote the private bit at the final step
    struct OwnBitPolicy {
      int horizon;
      void begin_episode(std::uint64_t) {}
      int act(int, const std::vector<double>& obs, const std::vector<double>&,
              int t) const {
        if (t < horizon - 1) return kActNoop;
        return obs[0] >= 0.5 ? kActOne : kActZero;
      }
    } policy{horizon};
    result = evaluate(policy, n, horizon, sched, episodes, ctx.cfg.seed);
  }

  CsvWriter csv(ctx.artifact("evaluation.csv").string(), ctx.artifact_comments(),
                {"policy", "topology", "n", "horizon", "episodes", "mean_reward",
                 "stderr"});
  csv.row({ctx.cfg.evaluation.policy, ctx.cfg.topology.kind, std::int64_t{n},
           std::int64_t{horizon}, std::int64_t{episodes}, result.mean,
           result.stderr_});
  csv.close();
  announce(ctx.artifact("evaluation.csv"), 1);

  // Step-by-step trace of the first few evaluation episodes.
  if (ctx.cfg.runtime.trace_episodes > 0) {
    const fs::path trace_path = ctx.artifact("episodes.jsonl");
    std::ofstream out(trace_path, std::ios::binary);
    out << json{{"config_digest", ctx.cfg.digest()}}.dump() << "\n";
    std::size_t records = 1;
    for (int e = 0; e < ctx.cfg.runtime.trace_episodes; ++e) {
      MajorityBitEnv env(n, horizon);
      ScriptedCountPolicy policy(horizon - 1);
      UnionAggregatorDriver<MajorityBitEnv> aggregator;
      auto [buffer, budget] = run_episode(env, policy, sched, aggregator, horizon,
                                          derive_seed(ctx.cfg.seed, "eval-episode", e));
      for (std::size_t t = 0; t < buffer.steps.size(); ++t) {
        const EpisodeStep& step = buffer.steps[t];
        double cov_mean = 0.0, cov_min = 1.0;
        for (const auto& view : step.messages) {
          cov_mean += view[1];
          cov_min = std::min(cov_min, view[1]);
        }
        cov_mean /= n;
        json record = {{"episode", e},
                       {"t", t},
                       {"actions", step.actions},
                       {"reward", step.reward},
                       {"coverage_mean", cov_mean},
                       {"coverage_min", cov_min},
                       {"budget", budget.per_step[t]}};
        out << record.dump() << "\n";
        ++records;
      }
    }
    out.close();
    announce(trace_path, records);
  }

  std::cout << ctx.cfg.evaluation.policy << " on " << ctx.cfg.topology.kind
            << " n=" << n << ": mean reward = " << format_double(result.mean)
            << " +- " << format_double(result.stderr_) << "\n";
  return 0;
}

int cmd_transfer(const CliContext& ctx) {
  require_union_aggregator(ctx);
  const TopologyKind kind = ctx.cfg.topology_kind();
  const ScheduleParams params = ctx.cfg.schedule_params();

  CsvWriter csv(ctx.artifact("transfer.csv").string(), ctx.artifact_comments(),
                {"from_n", "to_n", "topology", "reward"});
  std::size_t rows = 0;
  for (int from_n : ctx.cfg.transfer.from_n) {
    TabularPolicy trained(ctx.cfg.training.buckets, FeatureMode::NormalizedFractions);
    if (ctx.cfg.transfer.policy == "tabular") {
      ScheduleParams from_params = params;
      if (from_params.k > from_n - 1) from_params.k = from_n - 1;
      const TopologySchedule sched = make_schedule(kind, from_n, from_params);
      trained = train_iql(from_n, ctx.cfg.resolved_horizon(from_n), sched,
                          ctx.cfg.training_config(),
                          derive_seed(ctx.cfg.seed, "transfer-train", from_n))
                    .policy;
    }
    for (int to_n : ctx.cfg.transfer.to_n) {
      ScheduleParams to_params = params;
      if (to_params.k > to_n - 1) to_params.k = to_n - 1;
      const std::uint64_t eval_seed = derive_seed(ctx.cfg.seed, "transfer-eval", to_n);
      EvalResult result;
      if (ctx.cfg.transfer.policy == "tabular")
        result = zero_shot_transfer(trained, to_n, kind, to_params,
                                    ctx.cfg.evaluation.episodes, eval_seed);
      else
        result = zero_shot_transfer_scripted(to_n, kind, to_params,
                                             ctx.cfg.evaluation.episodes, eval_seed);
      csv.row({std::int64_t{from_n}, std::int64_t{to_n}, ctx.cfg.topology.kind,
               result.mean});
      ++rows;
      std::cout << ctx.cfg.transfer.policy << " " << from_n << " -> " << to_n
                << ": reward = " << format_double(result.mean) << "\n";
    }
  }
  csv.close();
  announce(ctx.artifact("transfer.csv"), rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"communication-topology laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir_flag;
  std::int64_t seed_flag = -1;
  int jobs = 1;
  app.add_option("--config", config_path, "experiment config (JSON)");
  app.add_option("--set", overrides, "override, e.g. --set losses.alpha=0.2");
  app.add_option("--seed", seed_flag, "base seed override");
  app.add_option("--out", out_dir_flag, "output directory override");
  app.add_option("--jobs", jobs, "worker threads for independent runs")
      ->check(CLI::Range(1, 256));

  auto* topology = app.add_subcommand("topology", "export the schedule as DOT and text");
  auto* analyze = app.add_subcommand("analyze", "diameter / reach / size metrics");
  auto* disseminate = app.add_subcommand("disseminate", "spread experiment sweep");
  auto* gossip = app.add_subcommand("gossip", "consensus-averaging error curves");
  auto* selfcheck =
      app.add_subcommand("losses-selfcheck", "loss kernel invariant report");
  auto* train = app.add_subcommand("train", "tabular IQL on the majority-bit task");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "evaluate a policy");
  auto* transfer = app.add_subcommand("transfer", "zero-shot agent-count transfer");
  for (CLI::App* sub : {topology, analyze, disseminate, gossip, selfcheck, train,
                        evaluate_cmd, transfer})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << "\n";
    return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
  }

  try {
    CliContext ctx;
    ctx.cfg = parse_config(config_path, overrides);
    if (seed_flag >= 0) ctx.cfg.seed = static_cast<std::uint64_t>(seed_flag);
    ctx.jobs = jobs;

    std::string out_dir = ctx.cfg.output.directory;
    if (const char* env = std::getenv("COMMLAB_OUT"); env && *env) out_dir = env;
    if (!out_dir_flag.empty()) out_dir = out_dir_flag;
    ctx.out_dir = out_dir;
    fs::create_directories(ctx.out_dir);

    std::cout << "resolved config (digest " << ctx.cfg.digest() << "):\n"
              << ctx.cfg.to_json().dump(2) << "\n";

    if (*topology) return cmd_topology(ctx);
    if (*analyze) return cmd_analyze(ctx);
    if (*disseminate) return cmd_disseminate(ctx);
    if (*gossip) return cmd_gossip(ctx);
    if (*selfcheck) return cmd_losses_selfcheck(ctx);
    if (*train) return cmd_train(ctx);
    if (*evaluate_cmd) return cmd_evaluate(ctx);
    if (*transfer) return cmd_transfer(ctx);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
}
