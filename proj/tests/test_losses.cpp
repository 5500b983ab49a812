#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "commlab/losses.hpp"
#include "commlab/rng.hpp"

using namespace commlab;

namespace {

ContrastiveBatch random_batch(int dim, int negatives, std::uint64_t seed) {
  Rng rng(seed);
  auto vec = [&] {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
  };
  ContrastiveBatch batch;
  batch.anchor = vec();
  batch.positive = vec();
  for (int m = 0; m < negatives; ++m) batch.negatives.push_back(vec());
  return batch;
}

}  // namespace

TEST_CASE("td target and td loss arithmetic", "[losses]") {
  REQUIRE(td_target(1.5, 0.0, 123.0) == 1.5);
  REQUIRE(td_target(0.0, 1.0, 2.0) == 2.0);
  REQUIRE(td_target(-1.0, 0.95, 3.0) == Catch::Approx(1.85).margin(1e-15));

  REQUIRE(td_loss({{1.0, 1.0}, {-2.0, -2.0}}) == 0.0);
  REQUIRE(td_loss({{2.0, 0.0}}) == 4.0);
  REQUIRE(td_loss({{1.0, 0.0}, {0.0, 2.0}}) == 2.5);
  REQUIRE_THROWS_AS(td_loss({}), std::invalid_argument);
}

TEST_CASE("state-prediction loss arithmetic", "[losses]") {
  REQUIRE(aux_pred_loss({{1.0, 2.0}}, {{1.0, 2.0}}) == 0.0);
  REQUIRE(aux_pred_loss({{1.0, 0.0}}, {{0.0, 0.0}}) == 1.0);
  REQUIRE(aux_pred_loss({{1.0, 0.0}, {0.0, 2.0}}, {{0.0, 0.0}, {0.0, 0.0}}) == 2.5);
  REQUIRE_THROWS_AS(aux_pred_loss({{1.0}}, {{1.0, 2.0}}), std::invalid_argument);
  REQUIRE_THROWS_AS(aux_pred_loss({}, {}), std::invalid_argument);
}

TEST_CASE("combined loss", "[losses]") {
  REQUIRE(total_loss(3.0, 7.0, 0.0) == 3.0);
  REQUIRE(total_loss(1.0, 2.0, 0.1) == Catch::Approx(1.2).margin(1e-15));
  REQUIRE(total_loss(5.0, 0.0, 0.3) == 5.0);
}

TEST_CASE("contrastive loss closed forms", "[losses]") {
  SECTION("identical members give ln(M+1)") {
    std::vector<double> u = {0.3, -0.4, 1.2};
    ContrastiveBatch batch;
    batch.anchor = u;
    batch.positive = u;
    batch.negatives.assign(20, u);
    REQUIRE(infonce_loss(batch, 0.07) ==
            Catch::Approx(std::log(21.0)).margin(1e-9));
  }
  SECTION("one opposed negative at unit temperature") {
    ContrastiveBatch batch;
    batch.anchor = {1.0, 0.0};
    batch.positive = {2.0, 0.0};    // same direction as the anchor
    batch.negatives = {{-3.0, 0.0}};  // opposite direction
    REQUIRE(infonce_loss(batch, 1.0) ==
            Catch::Approx(std::log(1.0 + std::exp(-2.0))).margin(1e-12));
  }
  SECTION("rescaling any input leaves the loss unchanged") {
    const ContrastiveBatch batch = random_batch(6, 5, 99);
    const double base = infonce_loss(batch, 0.07);
    ContrastiveBatch scaled = batch;
    for (double& v : scaled.anchor) v *= 10.0;
    for (double& v : scaled.positive) v *= 0.02;
    for (double& v : scaled.negatives[2]) v *= 1000.0;
    REQUIRE(infonce_loss(scaled, 0.07) == Catch::Approx(base).margin(1e-9));
  }
  SECTION("loss is positive and decreases as the positive aligns") {
    ContrastiveBatch batch = random_batch(4, 8, 5);
    double prev = infonce_loss(batch, 0.5);
    REQUIRE(prev > 0.0);
    // Walk the positive toward the anchor direction; the loss must fall.
    for (double blend : {0.25, 0.5, 0.75, 1.0}) {
      ContrastiveBatch closer = batch;
      for (std::size_t i = 0; i < closer.positive.size(); ++i)
        closer.positive[i] = (1.0 - blend) * batch.positive[i] + blend * batch.anchor[i];
      const double cur = infonce_loss(closer, 0.5);
      REQUIRE(cur < prev);
      prev = cur;
    }
  }
  SECTION("rejects degenerate inputs") {
    ContrastiveBatch batch = random_batch(3, 2, 1);
    REQUIRE_THROWS_AS(infonce_loss(batch, 0.0), std::invalid_argument);
    batch.anchor = {0.0, 0.0, 0.0};
    REQUIRE_THROWS_AS(infonce_loss(batch, 0.07), std::invalid_argument);
  }
}

TEST_CASE("contrastive pair sampling", "[losses]") {
  LossConfig cfg;
  cfg.m_negatives = 6;

  MessageLog log;  // [t][agent] -> 2-dim message
  const int steps = 30, agents = 4;
  for (int t = 0; t < steps; ++t) {
    log.emplace_back();
    for (int a = 0; a < agents; ++a)
      log.back().push_back({static_cast<double>(t), static_cast<double>(a + 1)});
  }

  SECTION("negatives always sit outside the diameter window") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const ContrastiveSample s = sample_contrastive_pairs(log, 5, cfg, seed);
      REQUIRE(s.positive_agent != s.anchor_agent);
      for (const auto& [agent, t] : s.negative_indices)
        REQUIRE(std::abs(t - s.anchor_t) > 5);
    }
  }
  SECTION("deterministic per seed") {
    const ContrastiveSample a = sample_contrastive_pairs(log, 2, cfg, 17);
    const ContrastiveSample b = sample_contrastive_pairs(log, 2, cfg, 17);
    REQUIRE(a.anchor_agent == b.anchor_agent);
    REQUIRE(a.anchor_t == b.anchor_t);
    REQUIRE(a.positive_agent == b.positive_agent);
    REQUIRE(a.negative_indices == b.negative_indices);
    const ContrastiveSample c = sample_contrastive_pairs(log, 2, cfg, 18);
    const bool same = a.anchor_agent == c.anchor_agent && a.anchor_t == c.anchor_t &&
                      a.negative_indices == c.negative_indices;
    REQUIRE_FALSE(same);
  }
  SECTION("two agents force the unique positive") {
    MessageLog two;
    for (int t = 0; t < 10; ++t) two.push_back({{1.0, 0.0}, {0.0, 1.0}});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const ContrastiveSample s = sample_contrastive_pairs(two, 1, cfg, seed);
      REQUIRE(s.positive_agent == 1 - s.anchor_agent);
    }
  }
  SECTION("a log that cannot escape the window is rejected") {
    MessageLog small;
    for (int t = 0; t < 6; ++t) small.push_back({{1.0}, {2.0}});
    REQUIRE_THROWS_AS(sample_contrastive_pairs(small, 3, cfg, 0),
                      std::invalid_argument);
  }
  SECTION("a mid-log anchor with an empty far pool is rejected") {
    // Length 7 with diameter 3: only an anchor at t=3 has no far timestep.
    MessageLog seven;
    for (int t = 0; t < 7; ++t) seven.push_back({{1.0}, {2.0}});
    bool saw_error = false, saw_success = false;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      try {
        const ContrastiveSample s = sample_contrastive_pairs(seven, 3, cfg, seed);
        saw_success = true;
        REQUIRE(s.anchor_t != 3);
      } catch (const std::invalid_argument&) {
        saw_error = true;
      }
    }
    REQUIRE(saw_error);
    REQUIRE(saw_success);
  }
}

TEST_CASE("finite differences validate the analytic gradients", "[losses]") {
  SECTION("a quadratic is exact up to rounding") {
    const std::vector<double> point = {1.0, -2.0, 3.0};
    auto f = [](const std::vector<double>& x) {
      return 0.5 * x[0] * x[0] + 2.0 * x[1] * x[1] - x[0] * x[2];
    };
    const std::vector<double> grad = {point[0] - point[2], 4.0 * point[1], -point[0]};
    REQUIRE(finite_diff_check(f, point, grad, 1e-5) <= 1e-9);
  }
  SECTION("contrastive gradients w.r.t. every input") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
      const ContrastiveBatch batch = random_batch(5, 4, seed);
      const double tau = 0.3;
      const InfoNceGradients grads = infonce_loss_with_grad(batch, tau);
      REQUIRE(grads.loss == Catch::Approx(infonce_loss(batch, tau)).margin(1e-12));

      auto wiggle_anchor = [&](const std::vector<double>& x) {
        ContrastiveBatch b = batch;
        b.anchor = x;
        return infonce_loss(b, tau);
      };
      REQUIRE(finite_diff_check(wiggle_anchor, batch.anchor, grads.anchor, 1e-6) <= 1e-5);

      auto wiggle_positive = [&](const std::vector<double>& x) {
        ContrastiveBatch b = batch;
        b.positive = x;
        return infonce_loss(b, tau);
      };
      REQUIRE(finite_diff_check(wiggle_positive, batch.positive, grads.positive, 1e-6) <=
              1e-5);

      for (std::size_t m = 0; m < batch.negatives.size(); ++m) {
        auto wiggle_negative = [&](const std::vector<double>& x) {
          ContrastiveBatch b = batch;
          b.negatives[m] = x;
          return infonce_loss(b, tau);
        };
        REQUIRE(finite_diff_check(wiggle_negative, batch.negatives[m],
                                  grads.negatives[m], 1e-6) <= 1e-5);
      }
    }
  }
  SECTION("prediction-loss gradients") {
    Rng rng(7);
    std::vector<std::vector<double>> states(3), preds(3);
    for (int b = 0; b < 3; ++b)
      for (int d = 0; d < 4; ++d) {
        states[b].push_back(rng.uniform(-1.0, 1.0));
        preds[b].push_back(rng.uniform(-1.0, 1.0));
      }
    const auto grads = aux_pred_loss_grad_predictions(states, preds);
    for (int b = 0; b < 3; ++b) {
      auto f = [&](const std::vector<double>& x) {
        auto p = preds;
        p[b] = x;
        return aux_pred_loss(states, p);
      };
      REQUIRE(finite_diff_check(f, preds[b], grads[b], 1e-5) <= 1e-7);
    }
  }
  SECTION("epsilon outside the supported window is rejected") {
    auto f = [](const std::vector<double>& x) { return x[0]; };
    REQUIRE_THROWS_AS(finite_diff_check(f, {1.0}, {1.0}, 1e-2), std::invalid_argument);
    REQUIRE_THROWS_AS(finite_diff_check(f, {1.0}, {1.0}, 1e-9), std::invalid_argument);
  }
}

TEST_CASE("loss configuration validation", "[losses]") {
  LossConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
  REQUIRE(cfg.alpha == 0.1);
  REQUIRE(cfg.tau == 0.07);
  REQUIRE(cfg.m_negatives == 20);
  cfg.tau = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.tau = 0.07;
  cfg.m_negatives = 0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.m_negatives = 20;
  cfg.gamma = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}
