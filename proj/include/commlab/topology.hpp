#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "commlab/bitset.hpp"
#include "commlab/rng.hpp"

namespace commlab {

/// Directed communication graph at a single step. Entry (i, j) means
/// "i sends to j". Every generator in this header keeps the diagonal set;
/// size/budget accounting always excludes it.
class AdjacencyMatrix {
 public:
  AdjacencyMatrix() = default;
  explicit AdjacencyMatrix(int n, bool self_loops = true)
      : n_(n), self_loops_(self_loops), rows_(n, DynamicBitset(n)) {
    if (n < 1) throw std::invalid_argument("AdjacencyMatrix: n must be >= 1");
    if (self_loops_)
      for (int i = 0; i < n_; ++i) rows_[i].set(i);
  }

  int n() const { return n_; }
  bool includes_self_loops() const { return self_loops_; }

  bool test(int i, int j) const { return row(i).test(j); }
  void set(int i, int j) { mutable_row(i).set(j); }

  const DynamicBitset& row(int i) const {
    check(i);
    return rows_[i];
  }
  DynamicBitset& mutable_row(int i) {
    check(i);
    return rows_[i];
  }

  /// Ascending non-self out-neighbors of i.
  std::vector<int> out_edges(int i) const {
    const DynamicBitset& r = row(i);
    std::vector<int> out;
    for (int j = 0; j < n_; ++j)
      if (j != i && r.test(j)) out.push_back(j);
    return out;
  }

  int out_degree(int i) const { return row(i).count() - (test(i, i) ? 1 : 0); }

  int in_degree(int j) const {
    if (j < 0 || j >= n_) throw std::out_of_range("AdjacencyMatrix: index");
    int d = 0;
    for (int i = 0; i < n_; ++i)
      if (i != j && rows_[i].test(j)) ++d;
    return d;
  }

  friend bool operator==(const AdjacencyMatrix& a, const AdjacencyMatrix& b) {
    return a.n_ == b.n_ && a.rows_ == b.rows_;
  }

 private:
  void check(int i) const {
    if (i < 0 || i >= n_) throw std::out_of_range("AdjacencyMatrix: index");
  }

  int n_ = 0;
  bool self_loops_ = true;
  std::vector<DynamicBitset> rows_;
};

inline std::vector<int> out_edges(const AdjacencyMatrix& adj, int i) {
  return adj.out_edges(i);
}

inline bool is_power_of_two(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

/// floor(log2(v)) for v >= 1.
inline int floor_log2(std::uint64_t v) {
  if (v == 0) throw std::invalid_argument("floor_log2: v must be >= 1");
  int k = 0;
  while (v >>= 1) ++k;
  return k;
}

inline int ceil_log2(std::uint64_t v) {
  if (v == 0) throw std::invalid_argument("ceil_log2: v must be >= 1");
  return is_power_of_two(v) ? floor_log2(v) : floor_log2(v) + 1;
}

/// Hop-cycle length of the one-peer family: floor(log2(n-1)) + 1 for n >= 2,
/// which equals ceil(log2(n)). Single agent degenerates to 1.
inline int one_peer_period(int n) {
  if (n < 1) throw std::invalid_argument("one_peer_period: n must be >= 1");
  return n >= 2 ? floor_log2(static_cast<std::uint64_t>(n) - 1) + 1 : 1;
}

/// Static exponential graph: i sends to j iff (j - i) mod n is a power of two.
inline AdjacencyMatrix static_exponential(int n) {
  AdjacencyMatrix adj(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int hop = ((j - i) % n + n) % n;
      if (hop > 0 && is_power_of_two(static_cast<std::uint64_t>(hop)))
        adj.set(i, j);
    }
  return adj;
}

/// One-peer exponential graph at step t: i sends to i + 2^(t mod period).
/// The hop cycles through 2^0 .. 2^(period-1), one power per step.
inline AdjacencyMatrix one_peer_exponential(int n, std::int64_t t) {
  if (t < 0) throw std::invalid_argument("one_peer_exponential: t must be >= 0");
  AdjacencyMatrix adj(n);
  if (n == 1) return adj;
  const int period = one_peer_period(n);
  const int hop = 1 << static_cast<int>(t % period);
  for (int i = 0; i < n; ++i) adj.set(i, (i + hop) % n);
  return adj;
}

/// k-in-regular random digraph: every node draws its k in-edge sources as a
/// uniform k-subset of the other nodes, independently per node.
inline AdjacencyMatrix er_k_in_regular(int n, int k, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("er_k_in_regular: n must be >= 1");
  if (k < 0 || k > n - 1)
    throw std::invalid_argument("er_k_in_regular: k must be in [0, n-1]");
  AdjacencyMatrix adj(n);
  Rng rng(derive_seed(seed, "er-k-in-regular"));
  for (int j = 0; j < n; ++j)
    for (int src : sample_distinct(rng, n, k, j)) adj.set(src, j);
  return adj;
}

/// Agent coordinates in the unit square.
struct AgentPositions {
  std::vector<std::pair<double, double>> pts;

  int n() const { return static_cast<int>(pts.size()); }

  void validate() const {
    for (const auto& [x, y] : pts) {
      if (!std::isfinite(x) || !std::isfinite(y))
        throw std::invalid_argument("AgentPositions: non-finite coordinate");
      if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0)
        throw std::invalid_argument("AgentPositions: coordinate outside [0,1]");
    }
  }
};

inline AgentPositions sample_positions(int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_positions: n must be >= 1");
  Rng rng(derive_seed(seed, "agent-positions"));
  AgentPositions pos;
  pos.pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double x = rng.unit();
    const double y = rng.unit();
    pos.pts.emplace_back(x, y);
  }
  return pos;
}

/// Each agent sends to its k nearest peers by Euclidean distance,
/// ties broken by lower agent index.
inline AdjacencyMatrix distance_top_k(const AgentPositions& positions, int k) {
  const int n = positions.n();
  if (n < 1) throw std::invalid_argument("distance_top_k: empty positions");
  if (k < 0 || k > n - 1)
    throw std::invalid_argument("distance_top_k: k must be in [0, n-1]");
  for (const auto& [x, y] : positions.pts)
    if (!std::isfinite(x) || !std::isfinite(y))
      throw std::invalid_argument("distance_top_k: non-finite coordinate");

  AdjacencyMatrix adj(n);
  std::vector<std::pair<double, int>> order(n);
  for (int i = 0; i < n; ++i) {
    order.clear();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dx = positions.pts[i].first - positions.pts[j].first;
      const double dy = positions.pts[i].second - positions.pts[j].second;
      order.emplace_back(dx * dx + dy * dy, j);
    }
    std::sort(order.begin(), order.end());
    for (int m = 0; m < k; ++m) adj.set(i, order[m].second);
  }
  return adj;
}

/// Directed cycle i -> i+1.
inline AdjacencyMatrix ring(int n) {
  AdjacencyMatrix adj(n);
  if (n >= 2)
    for (int i = 0; i < n; ++i) adj.set(i, (i + 1) % n);
  return adj;
}

inline AdjacencyMatrix fully_connected(int n) {
  AdjacencyMatrix adj(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) adj.set(i, j);
  return adj;
}

inline AdjacencyMatrix self_loops_only(int n) { return AdjacencyMatrix(n); }

enum class TopologyKind {
  StaticExponential,
  OnePeerExponential,
  ErdosRenyiKInRegular,
  DistanceTopK,
  Ring,
  FullyConnected,
};

inline std::string to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::StaticExponential: return "static_exponential";
    case TopologyKind::OnePeerExponential: return "one_peer_exponential";
    case TopologyKind::ErdosRenyiKInRegular: return "er_k_in_regular";
    case TopologyKind::DistanceTopK: return "distance_top_k";
    case TopologyKind::Ring: return "ring";
    case TopologyKind::FullyConnected: return "fully_connected";
  }
  throw std::logic_error("to_string: bad TopologyKind");
}

inline std::optional<TopologyKind> parse_topology_kind(const std::string& s) {
  if (s == "static_exponential") return TopologyKind::StaticExponential;
  if (s == "one_peer_exponential") return TopologyKind::OnePeerExponential;
  if (s == "er_k_in_regular") return TopologyKind::ErdosRenyiKInRegular;
  if (s == "distance_top_k") return TopologyKind::DistanceTopK;
  if (s == "ring") return TopologyKind::Ring;
  if (s == "fully_connected") return TopologyKind::FullyConnected;
  return std::nullopt;
}

enum class ErMode { Fixed, PerStep };

struct ScheduleParams {
  int k = 1;                       // in-degree (ER) / neighbor count (distance)
  std::uint64_t seed = 0;          // ER sampling seed
  ErMode er_mode = ErMode::PerStep;
  std::uint64_t position_seed = 0; // distance graphs
};

/// Time-indexed adjacency generator. at(t) is pure: equal t gives equal
/// matrices. period == 0 marks a non-repeating schedule (per-step ER);
/// every other kind satisfies at(t) == at(t + period).
class TopologySchedule {
 public:
  TopologySchedule(TopologyKind kind, int n, ScheduleParams params)
      : kind_(kind), n_(n), params_(params) {
    if (n < 1) throw std::invalid_argument("TopologySchedule: n must be >= 1");
    switch (kind_) {
      case TopologyKind::StaticExponential:
        period_ = 1;
        phases_.push_back(static_exponential(n));
        break;
      case TopologyKind::OnePeerExponential:
        period_ = one_peer_period(n);
        for (int p = 0; p < period_; ++p) phases_.push_back(one_peer_exponential(n, p));
        break;
      case TopologyKind::ErdosRenyiKInRegular:
        if (params_.k < 0 || params_.k > n - 1)
          throw std::invalid_argument("TopologySchedule: ER k must be in [0, n-1]");
        if (params_.er_mode == ErMode::Fixed) {
          period_ = 1;
          phases_.push_back(er_k_in_regular(n, params_.k, params_.seed));
        } else {
          period_ = 0;  // aperiodic; matrices derived from (seed, t) on demand
        }
        break;
      case TopologyKind::DistanceTopK: {
        if (params_.k < 0 || params_.k > n - 1)
          throw std::invalid_argument("TopologySchedule: distance k must be in [0, n-1]");
        period_ = 1;
        AgentPositions pos = sample_positions(n, params_.position_seed);
        phases_.push_back(distance_top_k(pos, params_.k));
        break;
      }
      case TopologyKind::Ring:
        period_ = 1;
        phases_.push_back(ring(n));
        break;
      case TopologyKind::FullyConnected:
        period_ = 1;
        phases_.push_back(fully_connected(n));
        break;
    }
  }

  TopologyKind kind() const { return kind_; }
  int n() const { return n_; }
  int period() const { return period_; }
  const ScheduleParams& params() const { return params_; }

  AdjacencyMatrix at(std::int64_t t) const {
    if (t < 0) throw std::invalid_argument("TopologySchedule::at: t must be >= 0");
    if (period_ > 0) return phases_[t % period_];
    return er_k_in_regular(n_, params_.k,
                           derive_seed(params_.seed, "er-step",
                                       static_cast<std::uint64_t>(t)));
  }

 private:
  TopologyKind kind_;
  int n_;
  ScheduleParams params_;
  int period_ = 1;
  std::vector<AdjacencyMatrix> phases_;
};

inline TopologySchedule make_schedule(TopologyKind kind, int n,
                                      ScheduleParams params = {}) {
  return TopologySchedule(kind, n, params);
}

}  // namespace commlab
