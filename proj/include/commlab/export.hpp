#pragma once

#include <ostream>

#include "commlab/topology.hpp"

namespace commlab {

/// One DOT digraph per timestep, nodes 0..n-1, self-loops omitted.
inline void write_dot(std::ostream& os, const TopologySchedule& schedule,
                      int steps) {
  for (int t = 0; t < steps; ++t) {
    const AdjacencyMatrix adj = schedule.at(t);
    os << "digraph step" << t << " {\n";
    for (int i = 0; i < adj.n(); ++i) os << "  " << i << ";\n";
    for (int i = 0; i < adj.n(); ++i)
      for (int j : adj.out_edges(i)) os << "  " << i << " -> " << j << ";\n";
    os << "}\n";
  }
}

/// Adjacency-list text: one "i: j1 j2 ..." line per node, per timestep.
inline void write_adjacency_list(std::ostream& os, const TopologySchedule& schedule,
                                 int steps) {
  for (int t = 0; t < steps; ++t) {
    const AdjacencyMatrix adj = schedule.at(t);
    os << "t=" << t << "\n";
    for (int i = 0; i < adj.n(); ++i) {
      os << i << ":";
      for (int j : adj.out_edges(i)) os << " " << j;
      os << "\n";
    }
  }
}

}  // namespace commlab
