#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "commlab/analysis.hpp"
#include "commlab/parallel.hpp"
#include "commlab/rng.hpp"
#include "commlab/topology.hpp"

namespace commlab {

/// Per-agent sets of origin agent ids. Agent j's set at round t holds every
/// agent whose information has reached j, under the one-step delay rule:
/// the update at round t uses edges from step t-1.
struct KnowledgeState {
  std::vector<DynamicBitset> known;

  static KnowledgeState identity(int n) {
    KnowledgeState ks;
    ks.known.assign(n, DynamicBitset(n));
    for (int i = 0; i < n; ++i) ks.known[i].set(i);
    return ks;
  }

  int n() const { return static_cast<int>(known.size()); }

  /// One message round over the given step graph: K_j += union of K_i over
  /// in-edges (i, j). Sets only ever grow.
  void round(const AdjacencyMatrix& adj) {
    const int n_agents = n();
    if (adj.n() != n_agents)
      throw std::invalid_argument("KnowledgeState::round: size mismatch");
    std::vector<DynamicBitset> next = known;
    for (int i = 0; i < n_agents; ++i) {
      const DynamicBitset& row = adj.row(i);
      for (int j = 0; j < n_agents; ++j)
        if (j != i && row.test(j)) next[j] |= known[i];
    }
    known.swap(next);
  }

  int coverage_of(int origin) const {
    int c = 0;
    for (const auto& set : known)
      if (set.test(origin)) ++c;
    return c;
  }
};

struct DisseminationTrace {
  int source = 0;
  std::vector<int> coverage;  // coverage[t] for t = 0..max_t
};

/// Spreads one agent's information over the schedule; coverage[t] counts the
/// agents holding it after t rounds (round t consumes the step-(t-1) graph).
inline DisseminationTrace simulate_spread(const TopologySchedule& schedule,
                                          int source, int max_t) {
  const int n = schedule.n();
  if (source < 0 || source >= n)
    throw std::out_of_range("simulate_spread: source out of range");
  if (max_t < 0) throw std::invalid_argument("simulate_spread: max_t must be >= 0");

  DisseminationTrace trace;
  trace.source = source;
  KnowledgeState ks = KnowledgeState::identity(n);
  trace.coverage.push_back(ks.coverage_of(source));
  for (int t = 1; t <= max_t; ++t) {
    ks.round(schedule.at(t - 1));
    trace.coverage.push_back(ks.coverage_of(source));
  }
  return trace;
}

struct CoverageCurve {
  std::vector<double> mean;
  std::vector<int> min;
  std::vector<int> max;
  int samples = 0;
};

/// Averages simulate_spread over `sources` uniform origins for each seed.
/// The factory maps a seed to a fresh schedule (ER graphs and positions
/// re-drawn per seed); deterministic for a fixed seed list.
template <typename ScheduleFactory>
CoverageCurve coverage_curve(ScheduleFactory&& factory, int sources,
                             const std::vector<std::uint64_t>& seeds, int max_t) {
  if (sources < 1) throw std::invalid_argument("coverage_curve: sources must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("coverage_curve: no seeds");

  CoverageCurve curve;
  curve.mean.assign(max_t + 1, 0.0);
  curve.min.assign(max_t + 1, 0);
  curve.max.assign(max_t + 1, 0);
  bool first = true;
  for (std::uint64_t seed : seeds) {
    const TopologySchedule schedule = factory(seed);
    Rng source_rng(derive_seed(seed, "spread-sources"));
    for (int s = 0; s < sources; ++s) {
      const int source = static_cast<int>(source_rng.below(schedule.n()));
      const DisseminationTrace trace = simulate_spread(schedule, source, max_t);
      for (int t = 0; t <= max_t; ++t) {
        const int c = trace.coverage[t];
        curve.mean[t] += c;
        if (first) {
          curve.min[t] = curve.max[t] = c;
        } else {
          curve.min[t] = std::min(curve.min[t], c);
          curve.max[t] = std::max(curve.max[t], c);
        }
      }
      first = false;
      ++curve.samples;
    }
  }
  for (double& m : curve.mean) m /= curve.samples;
  return curve;
}

/// One row of the budget-sweep experiment output.
struct DisseminationRow {
  std::string topology;
  int n = 0;
  int k = 0;
  std::uint64_t seed = 0;
  int source = 0;
  int t = 0;
  int coverage = 0;
};

struct DisseminationConfig {
  int n = 256;
  std::vector<int> budgets = {0, 1};  // 0 means "auto": ceil(log2 n)
  int seeds = 20;
  std::uint64_t base_seed = 0;
  int sources = 8;
  int max_t = 24;
  std::vector<std::string> families = {"distance_top_k", "er_k_in_regular",
                                       "exponential"};
};

/// Builds the schedule for one experiment cell. The exponential family picks
/// its variant from the budget: the k = ceil(log2 n) class is the static
/// graph, the k = 1 class the one-peer graph.
inline TopologySchedule dissemination_cell_schedule(const std::string& family,
                                                    int n, int k,
                                                    std::uint64_t seed) {
  ScheduleParams params;
  params.k = k;
  params.seed = seed;
  params.position_seed = seed;
  if (family == "exponential")
    return make_schedule(k <= 1 ? TopologyKind::OnePeerExponential
                                : TopologyKind::StaticExponential,
                         n, params);
  if (family == "er_k_in_regular")
    return make_schedule(TopologyKind::ErdosRenyiKInRegular, n, params);
  if (family == "distance_top_k")
    return make_schedule(TopologyKind::DistanceTopK, n, params);
  if (family == "ring") return make_schedule(TopologyKind::Ring, n, params);
  throw std::invalid_argument("unknown dissemination family: " + family);
}

/// Sweeps {family} x {budget} cells, tracing every (seed, source) pair.
/// Rows come out ordered by (family, k, seed, source, t) regardless of the
/// worker count: each (family, budget, seed) task fills its own slot.
inline std::vector<DisseminationRow> run_dissemination_experiment(
    const DisseminationConfig& cfg, int jobs = 1) {
  if (cfg.n < 2) throw std::invalid_argument("dissemination: n must be >= 2");
  if (cfg.seeds < 1) throw std::invalid_argument("dissemination: seeds must be >= 1");
  if (cfg.sources < 1) throw std::invalid_argument("dissemination: sources must be >= 1");

  struct Task {
    std::string family;
    int k = 0;
    int seed_index = 0;
  };
  std::vector<Task> tasks;
  for (const std::string& family : cfg.families)
    for (int budget : cfg.budgets) {
      const int k = budget == 0 ? ceil_log2(cfg.n) : budget;
      for (int s = 0; s < cfg.seeds; ++s) tasks.push_back({family, k, s});
    }

  std::vector<std::vector<DisseminationRow>> slots(tasks.size());
  parallel_for(static_cast<int>(tasks.size()), jobs, [&](int idx) {
    const Task& task = tasks[idx];
    const std::uint64_t seed =
        derive_seed(cfg.base_seed, "dissemination", task.seed_index);
    const TopologySchedule schedule =
        dissemination_cell_schedule(task.family, cfg.n, task.k, seed);
    Rng source_rng(derive_seed(seed, "spread-sources"));
    for (int src_idx = 0; src_idx < cfg.sources; ++src_idx) {
      const int source = static_cast<int>(source_rng.below(cfg.n));
      const DisseminationTrace trace = simulate_spread(schedule, source, cfg.max_t);
      for (int t = 0; t <= cfg.max_t; ++t)
        slots[idx].push_back({task.family, cfg.n, task.k,
                              static_cast<std::uint64_t>(task.seed_index), source, t,
                              trace.coverage[t]});
    }
  });

  std::vector<DisseminationRow> rows;
  for (const auto& slot : slots) rows.insert(rows.end(), slot.begin(), slot.end());
  return rows;
}

}  // namespace commlab
