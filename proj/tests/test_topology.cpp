#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <vector>

#include "commlab/topology.hpp"
#include "oracles.hpp"

using namespace commlab;

TEST_CASE("static exponential matches the hop pattern", "[topology]") {
  SECTION("n=8 neighbors are 1, 2 and 4 hops ahead, rotationally") {
    const AdjacencyMatrix adj = static_exponential(8);
    for (int i = 0; i < 8; ++i) {
      std::vector<int> expected = {(i + 1) % 8, (i + 2) % 8, (i + 4) % 8};
      std::sort(expected.begin(), expected.end());
      REQUIRE(adj.out_edges(i) == expected);
    }
  }
  SECTION("single agent keeps only the self-loop") {
    const AdjacencyMatrix adj = static_exponential(1);
    REQUIRE(adj.n() == 1);
    REQUIRE(adj.test(0, 0));
    REQUIRE(adj.out_edges(0).empty());
  }
  SECTION("n=5: agent 3 reaches hops 1, 2, 4 mod 5") {
    // Direct membership evaluation: (j - 3) mod 5 must be 1, 2 or 4.
    const AdjacencyMatrix adj = static_exponential(5);
    REQUIRE(adj.out_edges(3) == std::vector<int>{0, 2, 4});
  }
  SECTION("non-self out-degree is floor(log2(n-1)) + 1 everywhere") {
    for (int n = 2; n <= 64; ++n) {
      const AdjacencyMatrix adj = static_exponential(n);
      const int expected = floor_log2(n - 1) + 1;
      for (int i = 0; i < n; ++i) REQUIRE(adj.out_degree(i) == expected);
    }
  }
}

TEST_CASE("one-peer exponential cycles through the hop powers", "[topology]") {
  SECTION("n=8 phases: +1, +2, +4") {
    for (int t : {0, 3, 6}) {
      const AdjacencyMatrix adj = one_peer_exponential(8, t);
      for (int i = 0; i < 8; ++i)
        REQUIRE(adj.out_edges(i) == std::vector<int>{(i + 1) % 8});
    }
    for (int t : {2, 5}) {
      const AdjacencyMatrix adj = one_peer_exponential(8, t);
      for (int i = 0; i < 8; ++i)
        REQUIRE(adj.out_edges(i) == std::vector<int>{(i + 4) % 8});
    }
    for (int i = 0; i < 8; ++i)
      REQUIRE(one_peer_exponential(8, 1).out_edges(i) ==
              std::vector<int>{(i + 2) % 8});
  }
  SECTION("n=2 pairs the two agents at every step") {
    for (int t = 0; t < 5; ++t) {
      const AdjacencyMatrix adj = one_peer_exponential(2, t);
      REQUIRE(adj.test(0, 1));
      REQUIRE(adj.test(1, 0));
      REQUIRE(adj.test(0, 0));
      REQUIRE(adj.test(1, 1));
    }
  }
  SECTION("degrees are one and the hop map is a bijection") {
    for (int n = 2; n <= 64; ++n) {
      const int period = one_peer_period(n);
      for (int t = 0; t < 3 * period; ++t) {
        const AdjacencyMatrix adj = one_peer_exponential(n, t);
        std::set<int> targets;
        for (int i = 0; i < n; ++i) {
          const std::vector<int> out = adj.out_edges(i);
          REQUIRE(out.size() == 1);
          REQUIRE(adj.in_degree(i) == 1);
          targets.insert(out[0]);
        }
        REQUIRE(static_cast<int>(targets.size()) == n);
      }
    }
  }
  SECTION("period is floor(log2(n-1)) + 1") {
    REQUIRE(one_peer_period(2) == 1);
    REQUIRE(one_peer_period(5) == 3);
    REQUIRE(one_peer_period(8) == 3);
    REQUIRE(one_peer_period(9) == 4);
    REQUIRE(one_peer_period(256) == 8);
  }
}

TEST_CASE("k-in-regular random digraphs", "[topology]") {
  SECTION("k = n-1 forces the complete digraph") {
    const AdjacencyMatrix adj = er_k_in_regular(5, 4, 123);
    REQUIRE(adj == fully_connected(5));
  }
  SECTION("every node has exactly one non-self in-edge at k=1, n=256") {
    const AdjacencyMatrix adj = er_k_in_regular(256, 1, 7);
    for (int j = 0; j < 256; ++j) REQUIRE(adj.in_degree(j) == 1);
  }
  SECTION("deterministic under a fixed seed") {
    REQUIRE(er_k_in_regular(8, 3, 7) == er_k_in_regular(8, 3, 7));
    REQUIRE_FALSE(er_k_in_regular(8, 3, 7) == er_k_in_regular(8, 3, 8));
  }
  SECTION("column sums excluding the diagonal equal k") {
    for (int n : {3, 7, 16, 33}) {
      for (int k : {0, 1, 2}) {
        if (k > n - 1) continue;
        const AdjacencyMatrix adj = er_k_in_regular(n, k, 42 + n + k);
        for (int j = 0; j < n; ++j) REQUIRE(adj.in_degree(j) == k);
      }
    }
  }
  SECTION("impossible in-degree is rejected") {
    REQUIRE_THROWS_AS(er_k_in_regular(4, 4, 0), std::invalid_argument);
  }
}

TEST_CASE("distance top-k graphs", "[topology]") {
  SECTION("collinear agents pick their nearest neighbor") {
    AgentPositions pos;
    pos.pts = {{0.0, 0.0}, {0.1, 0.0}, {0.9, 0.0}};
    const AdjacencyMatrix adj = distance_top_k(pos, 1);
    REQUIRE(adj.out_edges(0) == std::vector<int>{1});
    REQUIRE(adj.out_edges(1) == std::vector<int>{0});
    REQUIRE(adj.out_edges(2) == std::vector<int>{1});
  }
  SECTION("k=0 leaves self-loops only") {
    const AgentPositions pos = sample_positions(6, 1);
    const AdjacencyMatrix adj = distance_top_k(pos, 0);
    for (int i = 0; i < 6; ++i) {
      REQUIRE(adj.test(i, i));
      REQUIRE(adj.out_edges(i).empty());
    }
  }
  SECTION("n=256, k=8 gives out-degree 8 everywhere") {
    const AgentPositions pos = sample_positions(256, 3);
    const AdjacencyMatrix adj = distance_top_k(pos, 8);
    for (int i = 0; i < 256; ++i) REQUIRE(adj.out_degree(i) == 8);
  }
  SECTION("equidistant ties go to the lower index") {
    AgentPositions pos;
    pos.pts = {{0.5, 0.5}, {0.5, 0.2}, {0.5, 0.8}};  // 1 and 2 tie from 0
    const AdjacencyMatrix adj = distance_top_k(pos, 1);
    REQUIRE(adj.out_edges(0) == std::vector<int>{1});
  }
  SECTION("invalid inputs are rejected") {
    AgentPositions bad;
    bad.pts = {{0.0, 0.0}, {std::nan(""), 0.5}};
    REQUIRE_THROWS_AS(distance_top_k(bad, 1), std::invalid_argument);
    const AgentPositions pos = sample_positions(4, 0);
    REQUIRE_THROWS_AS(distance_top_k(pos, 4), std::invalid_argument);
  }
}

TEST_CASE("schedules delegate to the matching generator", "[topology]") {
  SECTION("periods") {
    REQUIRE(make_schedule(TopologyKind::OnePeerExponential, 8).period() == 3);
    REQUIRE(make_schedule(TopologyKind::StaticExponential, 8).period() == 1);
    ScheduleParams per_step;
    per_step.er_mode = ErMode::PerStep;
    REQUIRE(make_schedule(TopologyKind::ErdosRenyiKInRegular, 8, per_step).period() == 0);
  }
  SECTION("ring schedule always advances by one") {
    const TopologySchedule sched = make_schedule(TopologyKind::Ring, 5);
    for (int t = 0; t < 4; ++t)
      for (int i = 0; i < 5; ++i)
        REQUIRE(sched.at(t).out_edges(i) == std::vector<int>{(i + 1) % 5});
  }
  SECTION("one-peer schedule repeats with its period") {
    const TopologySchedule sched = make_schedule(TopologyKind::OnePeerExponential, 12);
    for (int t = 0; t < sched.period(); ++t)
      REQUIRE(sched.at(t) == sched.at(t + sched.period()));
  }
  SECTION("at(t) is pure for every kind") {
    ScheduleParams params;
    params.k = 2;
    params.seed = 11;
    params.position_seed = 5;
    for (TopologyKind kind :
         {TopologyKind::StaticExponential, TopologyKind::OnePeerExponential,
          TopologyKind::ErdosRenyiKInRegular, TopologyKind::DistanceTopK,
          TopologyKind::Ring, TopologyKind::FullyConnected}) {
      const TopologySchedule sched = make_schedule(kind, 9, params);
      for (int t = 0; t < 4; ++t) REQUIRE(sched.at(t) == sched.at(t));
    }
  }
  SECTION("per-step ER regenerates while fixed ER does not") {
    ScheduleParams params;
    params.k = 2;
    params.seed = 9;
    params.er_mode = ErMode::PerStep;
    const TopologySchedule per_step =
        make_schedule(TopologyKind::ErdosRenyiKInRegular, 16, params);
    bool any_difference = false;
    for (int t = 1; t < 6 && !any_difference; ++t)
      any_difference = !(per_step.at(0) == per_step.at(t));
    REQUIRE(any_difference);

    params.er_mode = ErMode::Fixed;
    const TopologySchedule fixed =
        make_schedule(TopologyKind::ErdosRenyiKInRegular, 16, params);
    for (int t = 1; t < 6; ++t) REQUIRE(fixed.at(0) == fixed.at(t));
  }
  SECTION("invalid budgets are rejected") {
    ScheduleParams params;
    params.k = 8;
    REQUIRE_THROWS_AS(make_schedule(TopologyKind::ErdosRenyiKInRegular, 8, params),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(make_schedule(TopologyKind::DistanceTopK, 8, params),
                      std::invalid_argument);
  }
}

TEST_CASE("out_edges lists ascending non-self targets", "[topology]") {
  REQUIRE(out_edges(static_exponential(8), 0) == std::vector<int>{1, 2, 4});
  REQUIRE(out_edges(fully_connected(3), 1) == std::vector<int>{0, 2});
  REQUIRE(out_edges(ring(4), 3) == std::vector<int>{0});
  REQUIRE_THROWS_AS(out_edges(ring(4), 4), std::out_of_range);
  REQUIRE_THROWS_AS(out_edges(ring(4), -1), std::out_of_range);
}

TEST_CASE("n=1 degenerates to a self-loop everywhere", "[topology]") {
  for (TopologyKind kind :
       {TopologyKind::StaticExponential, TopologyKind::OnePeerExponential,
        TopologyKind::Ring, TopologyKind::FullyConnected}) {
    ScheduleParams params;
    params.k = 0;
    const TopologySchedule sched = make_schedule(kind, 1, params);
    REQUIRE(sched.at(0).test(0, 0));
    REQUIRE(sched.at(0).out_edges(0).empty());
  }
  REQUIRE(er_k_in_regular(1, 0, 0).test(0, 0));
}

TEST_CASE("position sampling stays in the unit square", "[topology]") {
  const AgentPositions pos = sample_positions(64, 9);
  REQUIRE(pos.n() == 64);
  REQUIRE_NOTHROW(pos.validate());
  REQUIRE(sample_positions(64, 9).pts == pos.pts);
}
