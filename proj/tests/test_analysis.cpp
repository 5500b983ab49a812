#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "commlab/analysis.hpp"
#include "commlab/rng.hpp"
#include "oracles.hpp"

using namespace commlab;

TEST_CASE("diameter by BFS agrees with Floyd-Warshall", "[analysis]") {
  SECTION("named cases") {
    REQUIRE(diameter(static_exponential(8)) == 3);
    REQUIRE(diameter(fully_connected(5)) == 1);
    REQUIRE(diameter(ring(8)) == 7);
    REQUIRE(diameter(static_exponential(1)) == 0);
    REQUIRE_FALSE(diameter(self_loops_only(3)).has_value());
  }
  SECTION("cross-check on assorted graphs") {
    for (int n : {2, 5, 8, 13, 32}) {
      REQUIRE(diameter(static_exponential(n)) ==
              oracle::diameter_by_floyd_warshall(static_exponential(n)));
      REQUIRE(diameter(ring(n)) == oracle::diameter_by_floyd_warshall(ring(n)));
      const AdjacencyMatrix er = er_k_in_regular(n, std::min(2, n - 1), 17 + n);
      REQUIRE(diameter(er) == oracle::diameter_by_floyd_warshall(er));
    }
  }
  SECTION("static exponential diameter is at most ceil(log2 n)") {
    for (int n = 2; n <= 64; ++n) {
      const auto d = diameter(static_exponential(n));
      REQUIRE(d.has_value());
      REQUIRE(*d <= ceil_log2(n));
      if (is_power_of_two(static_cast<std::uint64_t>(n)))
        REQUIRE(*d == ceil_log2(n));
    }
  }
}

TEST_CASE("graph size counts non-self edges", "[analysis]") {
  REQUIRE(graph_size(one_peer_exponential(256, 0)) == 256);
  REQUIRE(graph_size(one_peer_exponential(256, 5)) == 256);
  REQUIRE(graph_size(static_exponential(8)) == 24);
  REQUIRE(graph_size(self_loops_only(9)) == 0);
  REQUIRE(graph_size(fully_connected(10)) == 90);
}

TEST_CASE("boolean window products", "[analysis]") {
  const TopologySchedule one_peer = make_schedule(TopologyKind::OnePeerExponential, 8);
  SECTION("window of one is the adjacency itself") {
    for (int t0 = 0; t0 < 3; ++t0) {
      const ReachabilityMatrix r = boolean_window_product(one_peer, t0, 1);
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) REQUIRE(r.test(i, j) == one_peer.at(t0).test(i, j));
    }
  }
  SECTION("three one-peer steps reach everyone at n=8, any phase") {
    for (int t0 = 0; t0 < 3; ++t0)
      REQUIRE(all_ones(boolean_window_product(one_peer, t0, 3)));
  }
  SECTION("matches the triple-loop oracle") {
    ScheduleParams params;
    params.k = 2;
    params.seed = 3;
    const TopologySchedule er = make_schedule(TopologyKind::ErdosRenyiKInRegular, 11, params);
    for (int w = 1; w <= 4; ++w) {
      oracle::BoolMat expect = oracle::to_bool_mat(er.at(0));
      for (int s = 1; s < w; ++s)
        expect = oracle::bool_multiply(expect, oracle::to_bool_mat(er.at(s)));
      const ReachabilityMatrix got = boolean_window_product(er, 0, w);
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) REQUIRE(got.test(i, j) == expect[i][j]);
    }
  }
  SECTION("diagonal stays true and widening never clears an entry") {
    const TopologySchedule sched = make_schedule(TopologyKind::OnePeerExponential, 12);
    ReachabilityMatrix prev = boolean_window_product(sched, 1, 1);
    for (int w = 2; w <= 8; ++w) {
      const ReachabilityMatrix cur = boolean_window_product(sched, 1, w);
      for (int i = 0; i < 12; ++i) {
        REQUIRE(cur.test(i, i));
        for (int j = 0; j < 12; ++j)
          if (prev.test(i, j)) REQUIRE(cur.test(i, j));
      }
      prev = cur;
    }
  }
}

TEST_CASE("time to full reach", "[analysis]") {
  SECTION("one-peer n=8 needs exactly 3 steps from any phase") {
    const TopologySchedule sched = make_schedule(TopologyKind::OnePeerExponential, 8);
    for (int t0 = 0; t0 < 3; ++t0) REQUIRE(time_to_full_reach(sched, t0) == 3);
  }
  SECTION("fully connected reaches in one step") {
    const TopologySchedule sched = make_schedule(TopologyKind::FullyConnected, 6);
    REQUIRE(time_to_full_reach(sched, 0) == 1);
  }
  SECTION("one-peer n=5 needs 3 steps, one more than ceil(log2(n-1))") {
    const TopologySchedule sched = make_schedule(TopologyKind::OnePeerExponential, 5);
    REQUIRE(time_to_full_reach(sched, 0) == 3);
    REQUIRE_FALSE(all_ones(boolean_window_product(sched, 0, 2)));
  }
  SECTION("self-loops-only never reaches and hits the bound") {
    ScheduleParams params;
    params.k = 0;
    const TopologySchedule sched =
        make_schedule(TopologyKind::ErdosRenyiKInRegular, 4, params);
    REQUIRE_FALSE(time_to_full_reach(sched, 0).has_value());
  }
  SECTION("one-peer reach is within ceil(log2 n) for all n and phases") {
    for (int n = 2; n <= 64; ++n) {
      const TopologySchedule sched = make_schedule(TopologyKind::OnePeerExponential, n);
      for (int t0 = 0; t0 < sched.period(); ++t0) {
        const auto w = time_to_full_reach(sched, t0);
        REQUIRE(w.has_value());
        REQUIRE(*w <= ceil_log2(n));
      }
    }
  }
}

TEST_CASE("mixing matrices", "[analysis]") {
  SECTION("one-peer columns hold two halves") {
    const Matrix w = mixing_matrix(one_peer_exponential(8, 0));
    for (int j = 0; j < 8; ++j) {
      int halves = 0;
      for (int i = 0; i < 8; ++i) {
        if (w.at(i, j) != 0.0) {
          REQUIRE(w.at(i, j) == 0.5);
          ++halves;
        }
      }
      REQUIRE(halves == 2);
    }
    REQUIRE(is_doubly_stochastic(w));
  }
  SECTION("self-loops-only mixes to the identity") {
    const Matrix w = mixing_matrix(self_loops_only(5));
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) REQUIRE(w.at(i, j) == (i == j ? 1.0 : 0.0));
  }
  SECTION("fully connected spreads uniformly") {
    const Matrix w = mixing_matrix(fully_connected(4));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) REQUIRE(w.at(i, j) == 0.25);
  }
  SECTION("columns always sum to one") {
    for (int n : {3, 8, 17}) {
      const Matrix w = mixing_matrix(er_k_in_regular(n, std::min(3, n - 1), 5));
      REQUIRE(is_column_stochastic(w));
    }
  }
  SECTION("weights only sit on edges") {
    const AdjacencyMatrix adj = er_k_in_regular(9, 2, 21);
    const Matrix w = mixing_matrix(adj);
    for (int i = 0; i < 9; ++i)
      for (int j = 0; j < 9; ++j)
        if (w.at(i, j) > 0.0) REQUIRE((adj.test(i, j) || i == j));
  }
}

TEST_CASE("numeric product identity at powers of two", "[analysis]") {
  // Integer product of period-many one-peer adjacencies equals
  // (2^tau / n) * all-ones, checked in exact integer arithmetic.
  for (int n : {2, 4, 8, 16, 32, 64}) {
    const int tau = one_peer_period(n);
    std::vector<std::vector<long long>> acc(n, std::vector<long long>(n, 0));
    for (int i = 0; i < n; ++i) acc[i][i] = 1;
    for (int t = 0; t < tau; ++t) {
      const AdjacencyMatrix step = one_peer_exponential(n, t);
      std::vector<std::vector<long long>> next(n, std::vector<long long>(n, 0));
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) {
          if (acc[i][k] == 0) continue;
          for (int j = 0; j < n; ++j)
            if (step.test(k, j)) next[i][j] += acc[i][k];
        }
      acc = next;
    }
    const long long expected = (1LL << tau) / n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) REQUIRE(acc[i][j] == expected);
  }
}

TEST_CASE("gossip consensus", "[analysis]") {
  SECTION("one-peer n=8 averages exactly after 3 steps") {
    const TopologySchedule sched = make_schedule(TopologyKind::OnePeerExponential, 8);
    Rng rng(99);
    std::vector<double> x0(8);
    for (double& v : x0) v = rng.uniform(-1.0, 1.0);
    const GossipResult result = gossip_consensus(sched, x0, 3);
    REQUIRE(result.consensus_error.size() == 4);
    REQUIRE(result.consensus_error[3] <= 1e-12);
    REQUIRE(result.consensus_error[2] > 1e-12);
  }
  SECTION("constant input stays at zero error") {
    const TopologySchedule sched = make_schedule(TopologyKind::OnePeerExponential, 8);
    const GossipResult result = gossip_consensus(sched, std::vector<double>(8, 0.75), 5);
    for (double e : result.consensus_error) REQUIRE(e == 0.0);
  }
  SECTION("ring spreads a unit vector binomially") {
    const TopologySchedule sched = make_schedule(TopologyKind::Ring, 8);
    std::vector<double> x0(8, 0.0);
    x0[0] = 1.0;
    const GossipResult result = gossip_consensus(sched, x0, 3);
    REQUIRE(result.consensus_error[3] > 0.05);
    // Hand-computed: x^3_j = C(3, j) / 8 for j <= 3, zero beyond.
    const std::vector<double> expected = {1.0 / 8, 3.0 / 8, 3.0 / 8, 1.0 / 8,
                                          0.0,     0.0,     0.0,     0.0};
    for (int j = 0; j < 8; ++j)
      REQUIRE(result.values[3][j] == Catch::Approx(expected[j]).margin(1e-15));
  }
  SECTION("doubly stochastic schedules preserve the mean") {
    const TopologySchedule sched = make_schedule(TopologyKind::OnePeerExponential, 12);
    Rng rng(5);
    std::vector<double> x0(12);
    double mean = 0.0;
    for (double& v : x0) {
      v = rng.uniform(0.0, 10.0);
      mean += v;
    }
    mean /= 12;
    const GossipResult result = gossip_consensus(sched, x0, 10);
    for (const auto& xs : result.values) {
      double m = 0.0;
      for (double v : xs) m += v;
      REQUIRE(std::abs(m / 12 - mean) <= 1e-12);
    }
  }
}
