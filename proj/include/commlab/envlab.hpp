#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "commlab/losses.hpp"
#include "commlab/rng.hpp"
#include "commlab/runtime.hpp"
#include "commlab/topology.hpp"

namespace commlab {

// ---------------------------------------------------------------------------
// MajorityBit: a cooperative task where communication is provably necessary.
// Each agent privately observes one hidden bit; the team is rewarded, at the
// last step only, by the fraction of agents whose final action equals the
// global majority bit (ties count as majority one).

enum MajorityAction : int { kActZero = 0, kActOne = 1, kActNoop = 2 };

class MajorityBitEnv {
 public:
  MajorityBitEnv(int n, int horizon) : n_(n), horizon_(horizon) {
    if (n < 1) throw std::invalid_argument("MajorityBitEnv: n must be >= 1");
    if (horizon < 1) throw std::invalid_argument("MajorityBitEnv: horizon must be >= 1");
  }

  int n_agents() const { return n_; }
  int horizon() const { return horizon_; }
  int t() const { return t_; }
  bool done() const { return done_; }

  void reset(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "majority-bits"));
    bits_.assign(n_, false);
    for (int i = 0; i < n_; ++i) bits_[i] = rng.below(2) == 1;
    t_ = 0;
    done_ = false;
  }

  bool agent_bit(int i) const {
    if (i < 0 || i >= n_) throw std::out_of_range("MajorityBitEnv: agent id");
    return bits_[i];
  }

  int ones_count() const {
    int c = 0;
    for (bool b : bits_) c += b;
    return c;
  }

  /// Ties resolve to one, so the target is always well-defined.
  bool majority_bit() const { return 2 * ones_count() >= n_; }

  std::vector<double> observe(int i) const {
    return {agent_bit(i) ? 1.0 : 0.0,
            horizon_ > 1 ? static_cast<double>(t_) / (horizon_ - 1) : 0.0};
  }

  std::vector<double> state() const {
    std::vector<double> s(n_);
    for (int i = 0; i < n_; ++i) s[i] = bits_[i] ? 1.0 : 0.0;
    return s;
  }

  /// Zero reward until the final step; the final step pays the fraction of
  /// agents whose action equals the majority bit.
  double step(const std::vector<int>& actions) {
    if (done_) throw std::logic_error("MajorityBitEnv: acting after done");
    if (static_cast<int>(actions.size()) != n_)
      throw std::invalid_argument("MajorityBitEnv: joint action size");
    for (int a : actions)
      if (a < 0 || a > 2) throw std::invalid_argument("MajorityBitEnv: bad action");
    double reward = 0.0;
    if (t_ == horizon_ - 1) {
      const int target = majority_bit() ? 1 : 0;
      int correct = 0;
      for (int a : actions) correct += (a == target);
      reward = static_cast<double>(correct) / n_;
      done_ = true;
    }
    ++t_;
    return reward;
  }

 private:
  int n_;
  int horizon_;
  std::vector<bool> bits_;
  int t_ = 0;
  bool done_ = false;
};

/// Exact expected reward of the policy "play your own bit", by enumerating
/// all 2^n bit patterns. n is capped to keep enumeration exact and fast.
inline double own_bit_policy_expected_reward(int n) {
  if (n < 1 || n > 24)
    throw std::invalid_argument("own_bit_policy_expected_reward: n in [1, 24]");
  double total = 0.0;
  const std::uint64_t patterns = std::uint64_t{1} << n;
  for (std::uint64_t bits = 0; bits < patterns; ++bits) {
    const int ones = std::popcount(bits);
    const int target = 2 * ones >= n ? 1 : 0;
    const int correct = target == 1 ? ones : n - ones;
    total += static_cast<double>(correct) / n;
  }
  return total / static_cast<double>(patterns);
}

// ---------------------------------------------------------------------------
// Policies. All consume the numeric message view [ones_fraction,
// coverage_fraction] produced by the union aggregator, so they stay agnostic
// to the agent count.

/// Waits out the dissemination window, then votes the carried majority.
class ScriptedCountPolicy {
 public:
  explicit ScriptedCountPolicy(int diameter) : diameter_(diameter) {
    if (diameter < 0) throw std::invalid_argument("ScriptedCountPolicy: diameter");
  }

  void begin_episode(std::uint64_t) {}

  int act(int /*agent*/, const std::vector<double>& /*obs*/,
          const std::vector<double>& message, int t) const {
    if (t < diameter_) return kActNoop;
    return message.at(0) >= 0.5 ? kActOne : kActZero;
  }

 private:
  int diameter_;
};

/// Uniform coin over {0, 1}; the no-communication chance baseline.
class RandomBitPolicy {
 public:
  void begin_episode(std::uint64_t seed) { rng_.emplace(derive_seed(seed, "random-policy")); }

  int act(int, const std::vector<double>&, const std::vector<double>&, int) {
    return static_cast<int>(rng_->below(2));
  }

 private:
  std::optional<Rng> rng_;
};

// ---------------------------------------------------------------------------
// Tabular policy over n-agnostic features.

enum class FeatureMode { NormalizedFractions, RawCounts };

/// Discretized feature key: (own bit, ones-fraction bucket, coverage bucket,
/// episode-progress bucket). With NormalizedFractions every component is a
/// fraction of the agent count or horizon, so a table trained at one n reads
/// the same buckets at another.
struct TabularFeatures {
  int own_bit = 0;
  int ones_bucket = 0;
  int coverage_bucket = 0;
  int progress_bucket = 0;
};

class TabularPolicy {
 public:
  static constexpr int kActions = 3;

  TabularPolicy(int buckets, FeatureMode mode)
      : buckets_(buckets), mode_(mode),
        q_(static_cast<std::size_t>(2) * buckets * buckets * buckets * kActions, 0.0) {
    if (buckets < 2) throw std::invalid_argument("TabularPolicy: buckets must be >= 2");
  }

  int buckets() const { return buckets_; }
  FeatureMode mode() const { return mode_; }

  int bucket_of(double fraction) const {
    const int b = static_cast<int>(fraction * buckets_);
    return std::clamp(b, 0, buckets_ - 1);
  }

  TabularFeatures features(const std::vector<double>& obs,
                           const std::vector<double>& message, int t,
                           int horizon, int n) const {
    TabularFeatures f;
    f.own_bit = obs.at(0) >= 0.5 ? 1 : 0;
    if (mode_ == FeatureMode::NormalizedFractions) {
      f.ones_bucket = bucket_of(message.at(0));
      f.coverage_bucket = bucket_of(message.at(1));
      f.progress_bucket =
          horizon > 1 ? bucket_of(static_cast<double>(t) / (horizon - 1)) : buckets_ - 1;
    } else {
      // Raw counts deliberately key on absolute values; transfer rejects this.
      f.ones_bucket = std::clamp(static_cast<int>(message.at(0) * n), 0, buckets_ - 1);
      f.coverage_bucket = std::clamp(static_cast<int>(message.at(1) * n), 0, buckets_ - 1);
      f.progress_bucket = std::clamp(t, 0, buckets_ - 1);
    }
    return f;
  }

  double q(const TabularFeatures& f, int action) const { return q_[index(f, action)]; }
  double& q(const TabularFeatures& f, int action) { return q_[index(f, action)]; }

  double max_q(const TabularFeatures& f) const {
    double best = q(f, 0);
    for (int a = 1; a < kActions; ++a) best = std::max(best, q(f, a));
    return best;
  }

  /// Greedy with lowest-index tie-breaking.
  int greedy(const TabularFeatures& f) const {
    int best = 0;
    for (int a = 1; a < kActions; ++a)
      if (q(f, a) > q(f, best)) best = a;
    return best;
  }

  const std::vector<double>& table() const { return q_; }
  std::vector<double>& table() { return q_; }

 private:
  std::size_t index(const TabularFeatures& f, int action) const {
    if (action < 0 || action >= kActions)
      throw std::out_of_range("TabularPolicy: action");
    return (((static_cast<std::size_t>(f.own_bit) * buckets_ + f.ones_bucket) *
                 buckets_ + f.coverage_bucket) * buckets_ + f.progress_bucket) *
               kActions + action;
  }

  int buckets_;
  FeatureMode mode_;
  std::vector<double> q_;
};

/// Epsilon-greedy wrapper binding a TabularPolicy to an episode.
class EpsilonGreedyPolicy {
 public:
  EpsilonGreedyPolicy(const TabularPolicy& table, double epsilon, int horizon, int n)
      : table_(&table), epsilon_(epsilon), horizon_(horizon), n_(n) {}

  void begin_episode(std::uint64_t seed) { rng_.emplace(derive_seed(seed, "eps-greedy")); }

  int act(int /*agent*/, const std::vector<double>& obs,
          const std::vector<double>& message, int t) {
    if (epsilon_ > 0.0 && rng_->unit() < epsilon_)
      return static_cast<int>(rng_->below(TabularPolicy::kActions));
    return table_->greedy(table_->features(obs, message, t, horizon_, n_));
  }

 private:
  const TabularPolicy* table_;
  double epsilon_;
  int horizon_;
  int n_;
  std::optional<Rng> rng_;
};

// ---------------------------------------------------------------------------
// Evaluation.

struct EvalResult {
  double mean = 0.0;
  double stderr_ = 0.0;
  int episodes = 0;
};

inline int default_horizon(int n) { return ceil_log2(std::max(n, 2)) + 1; }

/// Mean terminal reward of a policy over seeded episodes with the union
/// aggregator. Policy must expose begin_episode/act like the classes above.
template <typename Policy>
EvalResult evaluate(Policy& policy, int n, int horizon,
                    const TopologySchedule& schedule, int episodes,
                    std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  MajorityBitEnv env(n, horizon);
  UnionAggregatorDriver<MajorityBitEnv> aggregator;
  double sum = 0.0, sum_sq = 0.0;
  for (int e = 0; e < episodes; ++e) {
    auto [buffer, budget] = run_episode(env, policy, schedule, aggregator, horizon,
                                        derive_seed(seed, "eval-episode", e));
    const double r = buffer.steps.back().reward;
    sum += r;
    sum_sq += r * r;
  }
  EvalResult out;
  out.episodes = episodes;
  out.mean = sum / episodes;
  const double var = std::max(0.0, sum_sq / episodes - out.mean * out.mean);
  out.stderr_ = episodes > 1 ? std::sqrt(var / (episodes - 1)) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Tabular independent Q-learning with a shared table.

struct TrainingConfig {
  LossConfig losses;
  int episodes = 20000;
  double lr = 0.1;
  double lr_aux = 0.05;
  double eps_start = 1.0;
  double eps_end = 0.05;
  int eps_anneal_episodes = 10000;
  int target_interval = 200;      // episodes between frozen-table refreshes
  int eval_episodes = 500;
  int checkpoint_interval = 1000; // episodes between learning-curve points
  int buckets = 8;
  FeatureMode feature_mode = FeatureMode::NormalizedFractions;

  void validate() const {
    losses.validate();
    if (episodes < 1) throw std::invalid_argument("training.episodes must be >= 1");
    if (lr < 0.0) throw std::invalid_argument("training.lr must be >= 0");
    if (lr_aux < 0.0) throw std::invalid_argument("training.lr_aux must be >= 0");
    if (eps_start < 0.0 || eps_start > 1.0 || eps_end < 0.0 || eps_end > 1.0)
      throw std::invalid_argument("training.eps must be in [0, 1]");
    if (eps_anneal_episodes < 1)
      throw std::invalid_argument("training.eps_anneal must be >= 1");
    if (target_interval < 1)
      throw std::invalid_argument("training.target_interval must be >= 1");
    if (eval_episodes < 1)
      throw std::invalid_argument("training.eval_episodes must be >= 1");
    if (checkpoint_interval < 1)
      throw std::invalid_argument("training.checkpoint_interval must be >= 1");
    if (buckets < 2) throw std::invalid_argument("training.buckets must be >= 2");
  }
};

struct LearningCurvePoint {
  int episode = 0;
  double eval_reward = 0.0;
  double td_loss = 0.0;
  double aux_loss = 0.0;
  double total_loss = 0.0;
  double epsilon = 0.0;
};

struct TrainResult {
  TabularPolicy policy{8, FeatureMode::NormalizedFractions};
  std::vector<LearningCurvePoint> curve;
};

/// Independent Q-learning on MajorityBit: one shared table across homogeneous
/// agents, targets built with td_target against a frozen table copy. A small
/// affine head predicting the global ones-fraction from the message view is
/// fitted alongside and reported as the auxiliary loss.
inline TrainResult train_iql(int n, int horizon, const TopologySchedule& schedule,
                             const TrainingConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (schedule.n() != n) throw std::invalid_argument("train_iql: schedule size mismatch");

  TrainResult result{TabularPolicy(cfg.buckets, cfg.feature_mode), {}};
  TabularPolicy target = result.policy;
  MajorityBitEnv env(n, horizon);
  UnionAggregatorDriver<MajorityBitEnv> aggregator;

  // Affine auxiliary head: predicts the global ones-fraction from the
  // [ones_fraction, coverage_fraction] message view.
  std::array<double, 3> aux_w{0.0, 0.0, 0.0};

  double td_acc = 0.0, aux_acc = 0.0;
  int acc_count = 0;
  const double gamma = cfg.losses.gamma;

  for (int episode = 0; episode < cfg.episodes; ++episode) {
    const double frac =
        std::min(1.0, static_cast<double>(episode) / cfg.eps_anneal_episodes);
    const double epsilon = cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start);
    // Team rewards correlate the TD samples of every same-bucket agent, so a
    // constant step size keeps converged cells oscillating; decay to a tenth
    // of the base rate over the run to lock them in.
    const double lr = cfg.lr * (1.0 - 0.9 * static_cast<double>(episode) /
                                          std::max(cfg.episodes - 1, 1));

    if (episode % cfg.target_interval == 0) target = result.policy;

    EpsilonGreedyPolicy actor(result.policy, epsilon, horizon, n);
    auto [buffer, budget] = run_episode(env, actor, schedule, aggregator, horizon,
                                        derive_seed(seed, "train-episode", episode));

    double episode_td = 0.0;
    double episode_aux = 0.0;
    int updates = 0;
    for (std::size_t t = 0; t < buffer.steps.size(); ++t) {
      const EpisodeStep& step = buffer.steps[t];
      const bool terminal = t + 1 == buffer.steps.size();
      const double global_ones =
          std::accumulate(step.state.begin(), step.state.end(), 0.0) / n;
      for (int i = 0; i < n; ++i) {
        const TabularFeatures f = result.policy.features(
            step.obs[i], step.messages[i], static_cast<int>(t), horizon, n);
        double target_value = step.reward;
        if (!terminal) {
          const EpisodeStep& next = buffer.steps[t + 1];
          const TabularFeatures nf = target.features(
              next.obs[i], next.messages[i], static_cast<int>(t) + 1, horizon, n);
          target_value = td_target(step.reward, gamma, target.max_q(nf));
        }
        double& cell = result.policy.q(f, step.actions[i]);
        const double delta = target_value - cell;
        cell += lr * delta;
        episode_td += delta * delta;
        ++updates;

        // One SGD step on the auxiliary predictor per visited message.
        const double pred = aux_w[0] * step.messages[i][0] +
                            aux_w[1] * step.messages[i][1] + aux_w[2];
        const double err = pred - global_ones;
        episode_aux += err * err;
        aux_w[0] -= cfg.lr_aux * 2.0 * err * step.messages[i][0];
        aux_w[1] -= cfg.lr_aux * 2.0 * err * step.messages[i][1];
        aux_w[2] -= cfg.lr_aux * 2.0 * err;
      }
    }
    td_acc += episode_td / updates;
    aux_acc += episode_aux / updates;
    ++acc_count;

    if ((episode + 1) % cfg.checkpoint_interval == 0 || episode + 1 == cfg.episodes) {
      EpsilonGreedyPolicy greedy(result.policy, 0.0, horizon, n);
      const EvalResult eval = evaluate(greedy, n, horizon, schedule, cfg.eval_episodes,
                                       derive_seed(seed, "train-eval", episode));
      LearningCurvePoint point;
      point.episode = episode + 1;
      point.eval_reward = eval.mean;
      point.td_loss = td_acc / acc_count;
      point.aux_loss = aux_acc / acc_count;
      point.total_loss = total_loss(point.td_loss, point.aux_loss, cfg.losses.alpha);
      point.epsilon = epsilon;
      result.curve.push_back(point);
      td_acc = aux_acc = 0.0;
      acc_count = 0;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Zero-shot transfer.

/// Rebuilds the schedule at to_n, stretches the horizon to the new
/// dissemination window and evaluates the unchanged policy. Policies keyed on
/// raw counts cannot follow the agent count and are rejected.
inline EvalResult zero_shot_transfer(const TabularPolicy& policy, int to_n,
                                     TopologyKind kind, ScheduleParams params,
                                     int episodes, std::uint64_t seed) {
  if (policy.mode() == FeatureMode::RawCounts)
    throw std::invalid_argument(
        "zero_shot_transfer: policy keyed on raw counts does not transfer");
  const int horizon = default_horizon(to_n);
  const TopologySchedule schedule = make_schedule(kind, to_n, params);
  EpsilonGreedyPolicy greedy(policy, 0.0, horizon, to_n);
  return evaluate(greedy, to_n, horizon, schedule, episodes, seed);
}

inline EvalResult zero_shot_transfer_scripted(int to_n, TopologyKind kind,
                                              ScheduleParams params, int episodes,
                                              std::uint64_t seed) {
  const int horizon = default_horizon(to_n);
  const TopologySchedule schedule = make_schedule(kind, to_n, params);
  ScriptedCountPolicy policy(horizon - 1);
  return evaluate(policy, to_n, horizon, schedule, episodes, seed);
}

}  // namespace commlab
