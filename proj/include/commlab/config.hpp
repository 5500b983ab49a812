#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "commlab/envlab.hpp"
#include "commlab/losses.hpp"
#include "commlab/rng.hpp"
#include "commlab/topology.hpp"

namespace commlab {

using nlohmann::json;

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct TopologyConfig {
  std::string kind = "one_peer_exponential";
  int n = 8;
  int k = 1;
  std::uint64_t seed = 0;
  std::string er_mode = "per_step";
  std::uint64_t position_seed = 0;
};

struct RuntimeConfig {
  int horizon = 0;  // 0 = derive ceil(log2 n) + 1
  std::string aggregator = "union";
  int message_dim = 8;
  int trace_episodes = 1;
};

struct TrainingSection {
  int episodes = 20000;
  double lr = 0.1;
  double lr_aux = 0.05;
  double eps_start = 1.0;
  double eps_end = 0.05;
  int eps_anneal = 10000;
  int target_interval = 200;
  int eval_episodes = 500;
  int checkpoint_interval = 1000;
  int buckets = 8;
  std::string feature_mode = "normalized";
};

struct DisseminationSection {
  int n = 256;
  std::vector<int> budgets = {0, 1};  // 0 = ceil(log2 n)
  int seeds = 20;
  int sources = 8;
  int max_t = 24;
  std::vector<std::string> families = {"distance_top_k", "er_k_in_regular",
                                       "exponential"};
};

struct GossipSection {
  int steps = 0;  // 0 = 2 * ceil(log2 n)
  int seeds = 5;
};

struct EvaluationSection {
  std::string policy = "scripted";
  int episodes = 500;
};

struct TransferSection {
  std::string policy = "scripted";
  std::vector<int> from_n = {8, 16};
  std::vector<int> to_n = {32, 64};
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats = {"csv"};
};

struct ExperimentConfig {
  std::string experiment = "default";
  std::uint64_t seed = 0;
  TopologyConfig topology;
  RuntimeConfig runtime;
  LossConfig losses;
  TrainingSection training;
  DisseminationSection dissemination;
  GossipSection gossip;
  EvaluationSection evaluation;
  TransferSection transfer;
  OutputConfig output;

  json to_json() const;
  std::string digest() const;
  TopologyKind topology_kind() const;
  ScheduleParams schedule_params() const;
  TopologySchedule make_topology_schedule() const { return make_topology_schedule(topology.n); }
  TopologySchedule make_topology_schedule(int n) const;
  int resolved_horizon(int n) const {
    return runtime.horizon > 0 ? runtime.horizon : default_horizon(n);
  }
  TrainingConfig training_config() const;
};

namespace cfgdetail {

inline void require_keys(const json& j, const std::string& scope,
                         const std::vector<std::string>& allowed) {
  if (!j.is_object())
    throw ConfigError("config: " + (scope.empty() ? std::string("top level") : scope) +
                      " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& key : allowed)
      if (it.key() == key) {
        ok = true;
        break;
      }
    if (!ok)
      throw ConfigError("config: unknown key '" +
                        (scope.empty() ? it.key() : scope + "." + it.key()) + "'");
  }
}

template <typename T>
void read(const json& j, const std::string& scope, const std::string& key, T& out) {
  if (!j.contains(key)) return;
  const std::string path = scope.empty() ? key : scope + "." + key;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: type mismatch at '" + path + "'");
  }
}

inline void fail(const std::string& path, const std::string& why) {
  throw ConfigError("config: invalid value at '" + path + "': " + why);
}

}  // namespace cfgdetail

inline ExperimentConfig parse_config_json(const json& root) {
  using cfgdetail::fail;
  using cfgdetail::read;
  using cfgdetail::require_keys;

  ExperimentConfig cfg;
  require_keys(root, "",
               {"experiment", "seed", "topology", "runtime", "losses", "training",
                "dissemination", "gossip", "evaluation", "transfer", "output"});
  read(root, "", "experiment", cfg.experiment);
  read(root, "", "seed", cfg.seed);

  if (root.contains("topology")) {
    const json& j = root.at("topology");
    require_keys(j, "topology", {"kind", "n", "k", "seed", "er_mode", "position_seed"});
    read(j, "topology", "kind", cfg.topology.kind);
    read(j, "topology", "n", cfg.topology.n);
    read(j, "topology", "k", cfg.topology.k);
    read(j, "topology", "seed", cfg.topology.seed);
    read(j, "topology", "er_mode", cfg.topology.er_mode);
    read(j, "topology", "position_seed", cfg.topology.position_seed);
  }
  if (!parse_topology_kind(cfg.topology.kind))
    fail("topology.kind", "unknown kind '" + cfg.topology.kind + "'");
  if (cfg.topology.n < 1) fail("topology.n", "must be >= 1");
  if (cfg.topology.k < 0 || cfg.topology.k > cfg.topology.n - 1)
    fail("topology.k", "must be in [0, n-1]");
  if (cfg.topology.er_mode != "fixed" && cfg.topology.er_mode != "per_step")
    fail("topology.er_mode", "must be 'fixed' or 'per_step'");

  if (root.contains("runtime")) {
    const json& j = root.at("runtime");
    require_keys(j, "runtime", {"horizon", "aggregator", "message_dim", "trace_episodes"});
    read(j, "runtime", "horizon", cfg.runtime.horizon);
    read(j, "runtime", "aggregator", cfg.runtime.aggregator);
    read(j, "runtime", "message_dim", cfg.runtime.message_dim);
    read(j, "runtime", "trace_episodes", cfg.runtime.trace_episodes);
  }
  if (cfg.runtime.horizon < 0) fail("runtime.horizon", "must be >= 0");
  if (cfg.runtime.aggregator != "union" && cfg.runtime.aggregator != "recurrent" &&
      cfg.runtime.aggregator != "attention")
    fail("runtime.aggregator", "must be 'union', 'recurrent' or 'attention'");
  if (cfg.runtime.message_dim < 1) fail("runtime.message_dim", "must be >= 1");
  if (cfg.runtime.trace_episodes < 0) fail("runtime.trace_episodes", "must be >= 0");

  if (root.contains("losses")) {
    const json& j = root.at("losses");
    require_keys(j, "losses", {"alpha", "tau", "m_negatives", "gamma"});
    read(j, "losses", "alpha", cfg.losses.alpha);
    read(j, "losses", "tau", cfg.losses.tau);
    read(j, "losses", "m_negatives", cfg.losses.m_negatives);
    read(j, "losses", "gamma", cfg.losses.gamma);
  }
  try {
    cfg.losses.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  if (root.contains("training")) {
    const json& j = root.at("training");
    require_keys(j, "training",
                 {"episodes", "lr", "lr_aux", "eps_start", "eps_end", "eps_anneal",
                  "target_interval", "eval_episodes", "checkpoint_interval",
                  "buckets", "feature_mode"});
    read(j, "training", "episodes", cfg.training.episodes);
    read(j, "training", "lr", cfg.training.lr);
    read(j, "training", "lr_aux", cfg.training.lr_aux);
    read(j, "training", "eps_start", cfg.training.eps_start);
    read(j, "training", "eps_end", cfg.training.eps_end);
    read(j, "training", "eps_anneal", cfg.training.eps_anneal);
    read(j, "training", "target_interval", cfg.training.target_interval);
    read(j, "training", "eval_episodes", cfg.training.eval_episodes);
    read(j, "training", "checkpoint_interval", cfg.training.checkpoint_interval);
    read(j, "training", "buckets", cfg.training.buckets);
    read(j, "training", "feature_mode", cfg.training.feature_mode);
  }
  if (cfg.training.feature_mode != "normalized" && cfg.training.feature_mode != "raw")
    fail("training.feature_mode", "must be 'normalized' or 'raw'");

  if (root.contains("dissemination")) {
    const json& j = root.at("dissemination");
    require_keys(j, "dissemination",
                 {"n", "budgets", "seeds", "sources", "max_t", "families"});
    read(j, "dissemination", "n", cfg.dissemination.n);
    read(j, "dissemination", "budgets", cfg.dissemination.budgets);
    read(j, "dissemination", "seeds", cfg.dissemination.seeds);
    read(j, "dissemination", "sources", cfg.dissemination.sources);
    read(j, "dissemination", "max_t", cfg.dissemination.max_t);
    read(j, "dissemination", "families", cfg.dissemination.families);
  }
  if (cfg.dissemination.n < 2) fail("dissemination.n", "must be >= 2");
  if (cfg.dissemination.seeds < 1) fail("dissemination.seeds", "must be >= 1");
  if (cfg.dissemination.sources < 1) fail("dissemination.sources", "must be >= 1");
  if (cfg.dissemination.max_t < 0) fail("dissemination.max_t", "must be >= 0");
  for (int b : cfg.dissemination.budgets)
    if (b < 0 || b > cfg.dissemination.n - 1)
      fail("dissemination.budgets", "entries must be in [0, n-1]");
  for (const std::string& f : cfg.dissemination.families)
    if (f != "exponential" && f != "er_k_in_regular" && f != "distance_top_k" &&
        f != "ring")
      fail("dissemination.families", "unknown family '" + f + "'");

  if (root.contains("gossip")) {
    const json& j = root.at("gossip");
    require_keys(j, "gossip", {"steps", "seeds"});
    read(j, "gossip", "steps", cfg.gossip.steps);
    read(j, "gossip", "seeds", cfg.gossip.seeds);
  }
  if (cfg.gossip.steps < 0) fail("gossip.steps", "must be >= 0");
  if (cfg.gossip.seeds < 1) fail("gossip.seeds", "must be >= 1");

  if (root.contains("evaluation")) {
    const json& j = root.at("evaluation");
    require_keys(j, "evaluation", {"policy", "episodes"});
    read(j, "evaluation", "policy", cfg.evaluation.policy);
    read(j, "evaluation", "episodes", cfg.evaluation.episodes);
  }
  if (cfg.evaluation.policy != "scripted" && cfg.evaluation.policy != "random" &&
      cfg.evaluation.policy != "own_bit")
    fail("evaluation.policy", "must be 'scripted', 'random' or 'own_bit'");
  if (cfg.evaluation.episodes < 1) fail("evaluation.episodes", "must be >= 1");

  if (root.contains("transfer")) {
    const json& j = root.at("transfer");
    require_keys(j, "transfer", {"policy", "from_n", "to_n"});
    read(j, "transfer", "policy", cfg.transfer.policy);
    read(j, "transfer", "from_n", cfg.transfer.from_n);
    read(j, "transfer", "to_n", cfg.transfer.to_n);
  }
  if (cfg.transfer.policy != "scripted" && cfg.transfer.policy != "tabular")
    fail("transfer.policy", "must be 'scripted' or 'tabular'");
  if (cfg.transfer.from_n.empty()) fail("transfer.from_n", "must be non-empty");
  if (cfg.transfer.to_n.empty()) fail("transfer.to_n", "must be non-empty");
  for (int v : cfg.transfer.from_n)
    if (v < 2) fail("transfer.from_n", "entries must be >= 2");
  for (int v : cfg.transfer.to_n)
    if (v < 2) fail("transfer.to_n", "entries must be >= 2");

  if (root.contains("output")) {
    const json& j = root.at("output");
    require_keys(j, "output", {"directory", "formats"});
    read(j, "output", "directory", cfg.output.directory);
    read(j, "output", "formats", cfg.output.formats);
  }
  for (const std::string& f : cfg.output.formats)
    if (f != "csv" && f != "dot" && f != "txt" && f != "jsonl")
      fail("output.formats", "unknown format '" + f + "'");

  return cfg;
}

/// Parses a config file (missing or empty file means all defaults), then
/// applies dotted-path overrides like "losses.alpha=0.2".
inline ExperimentConfig parse_config(const std::string& path,
                                     const std::vector<std::string>& overrides = {}) {
  json root = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    bool blank = true;
    for (char c : text)
      if (!std::isspace(static_cast<unsigned char>(c))) {
        blank = false;
        break;
      }
    if (!blank) {
      try {
        root = json::parse(text);
      } catch (const json::exception& e) {
        throw ConfigError("config: parse failure in '" + path + "': " + e.what());
      }
    }
  }
  for (const std::string& ov : overrides) {
    const std::size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: override must look like key=value: '" + ov + "'");
    const std::string key = ov.substr(0, eq);
    const std::string value = ov.substr(eq + 1);
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;  // bare strings allowed without quotes
    }
    json* node = &root;
    std::size_t start = 0;
    for (;;) {
      const std::size_t dot = key.find('.', start);
      const std::string part = key.substr(start, dot - start);
      if (part.empty()) throw ConfigError("config: bad override key '" + key + "'");
      if (dot == std::string::npos) {
        (*node)[part] = parsed;
        break;
      }
      node = &(*node)[part];
      start = dot + 1;
    }
  }
  return parse_config_json(root);
}

inline json ExperimentConfig::to_json() const {
  json j;
  j["experiment"] = experiment;
  j["seed"] = seed;
  j["topology"] = {{"kind", topology.kind},       {"n", topology.n},
                   {"k", topology.k},             {"seed", topology.seed},
                   {"er_mode", topology.er_mode}, {"position_seed", topology.position_seed}};
  j["runtime"] = {{"horizon", runtime.horizon},
                  {"aggregator", runtime.aggregator},
                  {"message_dim", runtime.message_dim},
                  {"trace_episodes", runtime.trace_episodes}};
  j["losses"] = {{"alpha", losses.alpha},
                 {"tau", losses.tau},
                 {"m_negatives", losses.m_negatives},
                 {"gamma", losses.gamma}};
  j["training"] = {{"episodes", training.episodes},
                   {"lr", training.lr},
                   {"lr_aux", training.lr_aux},
                   {"eps_start", training.eps_start},
                   {"eps_end", training.eps_end},
                   {"eps_anneal", training.eps_anneal},
                   {"target_interval", training.target_interval},
                   {"eval_episodes", training.eval_episodes},
                   {"checkpoint_interval", training.checkpoint_interval},
                   {"buckets", training.buckets},
                   {"feature_mode", training.feature_mode}};
  j["dissemination"] = {{"n", dissemination.n},         {"budgets", dissemination.budgets},
                        {"seeds", dissemination.seeds}, {"sources", dissemination.sources},
                        {"max_t", dissemination.max_t}, {"families", dissemination.families}};
  j["gossip"] = {{"steps", gossip.steps}, {"seeds", gossip.seeds}};
  j["evaluation"] = {{"policy", evaluation.policy}, {"episodes", evaluation.episodes}};
  j["transfer"] = {{"policy", transfer.policy},
                   {"from_n", transfer.from_n},
                   {"to_n", transfer.to_n}};
  j["output"] = {{"directory", output.directory}, {"formats", output.formats}};
  return j;
}

inline std::string ExperimentConfig::digest() const {
  const std::uint64_t h = fnv1a64(to_json().dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline TopologyKind ExperimentConfig::topology_kind() const {
  const auto kind = parse_topology_kind(topology.kind);
  if (!kind) throw ConfigError("config: unknown topology kind '" + topology.kind + "'");
  return *kind;
}

inline ScheduleParams ExperimentConfig::schedule_params() const {
  ScheduleParams params;
  params.k = topology.k;
  params.seed = topology.seed;
  params.er_mode = topology.er_mode == "fixed" ? ErMode::Fixed : ErMode::PerStep;
  params.position_seed = topology.position_seed;
  return params;
}

inline TopologySchedule ExperimentConfig::make_topology_schedule(int n) const {
  ScheduleParams params = schedule_params();
  if (params.k > n - 1) params.k = n - 1;
  return make_schedule(topology_kind(), n, params);
}

inline TrainingConfig ExperimentConfig::training_config() const {
  TrainingConfig tc;
  tc.losses = losses;
  tc.episodes = training.episodes;
  tc.lr = training.lr;
  tc.lr_aux = training.lr_aux;
  tc.eps_start = training.eps_start;
  tc.eps_end = training.eps_end;
  tc.eps_anneal_episodes = training.eps_anneal;
  tc.target_interval = training.target_interval;
  tc.eval_episodes = training.eval_episodes;
  tc.checkpoint_interval = training.checkpoint_interval;
  tc.buckets = training.buckets;
  tc.feature_mode = training.feature_mode == "raw" ? FeatureMode::RawCounts
                                                   : FeatureMode::NormalizedFractions;
  tc.validate();
  return tc;
}

}  // namespace commlab
