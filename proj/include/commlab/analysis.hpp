#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <vector>

#include "commlab/topology.hpp"

namespace commlab {

/// Non-self edge count: the per-step communication budget of the graph.
inline std::int64_t graph_size(const AdjacencyMatrix& adj) {
  std::int64_t size = 0;
  for (int i = 0; i < adj.n(); ++i) size += adj.out_degree(i);
  return size;
}

inline std::vector<int> out_degrees(const AdjacencyMatrix& adj) {
  std::vector<int> deg(adj.n());
  for (int i = 0; i < adj.n(); ++i) deg[i] = adj.out_degree(i);
  return deg;
}

/// Max over ordered pairs of shortest directed path length (self-loops
/// ignored). nullopt when some ordered pair is unreachable.
inline std::optional<int> diameter(const AdjacencyMatrix& adj) {
  const int n = adj.n();
  int worst = 0;
  std::vector<int> dist(n);
  std::deque<int> queue;
  for (int s = 0; s < n; ++s) {
    std::fill(dist.begin(), dist.end(), -1);
    dist[s] = 0;
    queue.assign(1, s);
    while (!queue.empty()) {
      const int u = queue.front();
      queue.pop_front();
      for (int v = 0; v < n; ++v) {
        if (v == u || !adj.test(u, v) || dist[v] >= 0) continue;
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
    }
    for (int v = 0; v < n; ++v) {
      if (dist[v] < 0) return std::nullopt;
      worst = std::max(worst, dist[v]);
    }
  }
  return worst;
}

struct GraphMetrics {
  std::optional<int> diameter;
  std::int64_t size = 0;
  std::vector<int> per_node_out_degree;
};

inline GraphMetrics compute_metrics(const AdjacencyMatrix& adj) {
  return GraphMetrics{diameter(adj), graph_size(adj), out_degrees(adj)};
}

/// Entry (i, j) true iff information leaving i at the window start is held by
/// j at the window end, stepping one edge (or self-loop) per step.
using ReachabilityMatrix = AdjacencyMatrix;

/// Boolean matrix product over (AND, OR): row i of (A x_b B) is the union of
/// B's rows indexed by row i of A.
inline ReachabilityMatrix boolean_product(const AdjacencyMatrix& a,
                                          const AdjacencyMatrix& b) {
  if (a.n() != b.n()) throw std::invalid_argument("boolean_product: size mismatch");
  const int n = a.n();
  AdjacencyMatrix out(n, /*self_loops=*/false);
  for (int i = 0; i < n; ++i) {
    DynamicBitset& row = out.mutable_row(i);
    for (int k = 0; k < n; ++k)
      if (a.test(i, k)) row |= b.row(k);
  }
  return out;
}

inline bool all_ones(const ReachabilityMatrix& m) {
  for (int i = 0; i < m.n(); ++i)
    if (!m.row(i).all()) return false;
  return true;
}

/// Left-to-right Boolean product at(t0) x_b ... x_b at(t0 + w - 1).
inline ReachabilityMatrix boolean_window_product(const TopologySchedule& schedule,
                                                 std::int64_t t0, int w) {
  if (w < 1) throw std::invalid_argument("boolean_window_product: w must be >= 1");
  ReachabilityMatrix acc = schedule.at(t0);
  for (int s = 1; s < w; ++s) acc = boolean_product(acc, schedule.at(t0 + s));
  return acc;
}

/// Smallest window starting at t0 whose Boolean product is all-ones. Search
/// is bounded: any strongly connected periodic schedule shipped here reaches
/// within n * period <= 4n. nullopt when the bound is exceeded.
inline std::optional<int> time_to_full_reach(const TopologySchedule& schedule,
                                             std::int64_t t0,
                                             int max_window = -1) {
  if (max_window < 0) max_window = 4 * schedule.n();
  ReachabilityMatrix acc = schedule.at(t0);
  for (int w = 1; w <= max_window; ++w) {
    if (w > 1) acc = boolean_product(acc, schedule.at(t0 + w - 1));
    if (all_ones(acc)) return w;
  }
  return std::nullopt;
}

/// Minimal dense matrix for mixing-weight arithmetic.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
};

inline Matrix multiply(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("multiply: shape mismatch");
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int k = 0; k < a.cols; ++k) {
      const double v = a.at(i, k);
      if (v == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) out.at(i, j) += v * b.at(k, j);
    }
  return out;
}

inline Matrix adjacency_to_matrix(const AdjacencyMatrix& adj) {
  Matrix m(adj.n(), adj.n());
  for (int i = 0; i < adj.n(); ++i)
    for (int j = 0; j < adj.n(); ++j)
      if (adj.test(i, j)) m.at(i, j) = 1.0;
  return m;
}

/// Column-stochastic gossip weights: column j spreads 1/(in-degree of j
/// including self) over each in-neighbor of j and j itself.
inline Matrix mixing_matrix(const AdjacencyMatrix& adj) {
  const int n = adj.n();
  for (int i = 0; i < n; ++i)
    if (!adj.test(i, i))
      throw std::invalid_argument("mixing_matrix: self-loops required");
  Matrix w(n, n);
  for (int j = 0; j < n; ++j) {
    const double share = 1.0 / (adj.in_degree(j) + 1);
    for (int i = 0; i < n; ++i)
      if (adj.test(i, j)) w.at(i, j) = share;
  }
  return w;
}

inline bool is_column_stochastic(const Matrix& m, double tol = 1e-12) {
  if (m.rows != m.cols) return false;
  for (int j = 0; j < m.cols; ++j) {
    double sum = 0.0;
    for (int i = 0; i < m.rows; ++i) {
      if (m.at(i, j) < 0.0) return false;
      sum += m.at(i, j);
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

inline bool is_doubly_stochastic(const Matrix& m, double tol = 1e-12) {
  if (!is_column_stochastic(m, tol)) return false;
  for (int i = 0; i < m.rows; ++i) {
    double sum = 0.0;
    for (int j = 0; j < m.cols; ++j) sum += m.at(i, j);
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

struct GossipResult {
  std::vector<std::vector<double>> values;  // values[t] = per-agent state
  std::vector<double> consensus_error;      // max_j |x_j^t - mean(x0)|
};

/// Iterates x^{t+1}_j = sum_i W^t(i,j) x^t_i with W^t = mixing_matrix(at(t)).
/// Error is reported in the infinity norm against the initial global mean.
inline GossipResult gossip_consensus(const TopologySchedule& schedule,
                                     const std::vector<double>& x0, int steps) {
  const int n = schedule.n();
  if (static_cast<int>(x0.size()) != n)
    throw std::invalid_argument("gossip_consensus: x0 size mismatch");
  if (steps < 0) throw std::invalid_argument("gossip_consensus: steps must be >= 0");

  double mean = 0.0;
  for (double v : x0) mean += v;
  mean /= n;

  GossipResult result;
  std::vector<double> x = x0;
  auto record = [&](const std::vector<double>& v) {
    double err = 0.0;
    for (double e : v) err = std::max(err, std::abs(e - mean));
    result.values.push_back(v);
    result.consensus_error.push_back(err);
  };
  record(x);
  std::vector<double> next(n);
  for (int t = 0; t < steps; ++t) {
    const Matrix w = mixing_matrix(schedule.at(t));
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += w.at(i, j) * x[i];
      next[j] = acc;
    }
    x.swap(next);
    record(x);
  }
  return result;
}

}  // namespace commlab
