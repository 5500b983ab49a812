#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "commlab/analysis.hpp"
#include "commlab/bitset.hpp"
#include "commlab/rng.hpp"
#include "commlab/topology.hpp"

namespace commlab {

using MessageVector = std::vector<double>;

inline void check_finite(const MessageVector& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

// ---------------------------------------------------------------------------
// Union aggregator: lossless knowledge sets carrying (agent id, bit) payloads.

/// Message carried by the union aggregator: the set of agents whose
/// information this message holds, and the subset of those whose payload bit
/// is one. Both sets only ever grow.
struct UnionMessage {
  DynamicBitset known;
  DynamicBitset ones;

  static UnionMessage origin(int n, int self_id, bool self_bit) {
    UnionMessage m{DynamicBitset(n), DynamicBitset(n)};
    m.known.set(self_id);
    if (self_bit) m.ones.set(self_id);
    return m;
  }

  int known_count() const { return known.count(); }
  int ones_count() const { return ones.count(); }

  double ones_fraction() const {
    const int total = known_count();
    return total == 0 ? 0.0 : static_cast<double>(ones_count()) / total;
  }
  double coverage_fraction() const {
    return known.size() == 0 ? 0.0
                             : static_cast<double>(known_count()) / known.size();
  }
};

/// Union of prev, all received sets and the agent's own origin entry.
inline UnionMessage union_aggregator_update(const UnionMessage& prev,
                                            const std::vector<const UnionMessage*>& received,
                                            int self_id, bool self_bit) {
  UnionMessage out = prev;
  if (self_id < 0 || self_id >= out.known.size())
    throw std::out_of_range("union_aggregator_update: self_id");
  for (const UnionMessage* m : received) {
    if (m->known.size() != out.known.size())
      throw std::invalid_argument("union_aggregator_update: universe mismatch");
    out.known |= m->known;
    out.ones |= m->ones;
  }
  out.known.set(self_id);
  if (self_bit) out.ones.set(self_id);
  return out;
}

// ---------------------------------------------------------------------------
// Recurrent aggregator: gated update over the mean-pooled inbox.

struct DenseParams {
  int rows = 0;
  int cols = 0;
  std::vector<double> w;

  DenseParams() = default;
  DenseParams(int r, int c) : rows(r), cols(c), w(static_cast<std::size_t>(r) * c, 0.0) {}

  double at(int i, int j) const { return w[static_cast<std::size_t>(i) * cols + j]; }
  double& at(int i, int j) { return w[static_cast<std::size_t>(i) * cols + j]; }

  std::vector<double> apply(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != cols)
      throw std::invalid_argument("DenseParams: dimension mismatch");
    std::vector<double> y(rows, 0.0);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) y[i] += at(i, j) * x[j];
    return y;
  }

  /// y = W^T g, the reverse map used by the backward passes.
  std::vector<double> apply_transposed(const std::vector<double>& g) const {
    if (static_cast<int>(g.size()) != rows)
      throw std::invalid_argument("DenseParams: dimension mismatch");
    std::vector<double> y(cols, 0.0);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) y[j] += at(i, j) * g[i];
    return y;
  }

  static DenseParams identity(int n) {
    DenseParams p(n, n);
    for (int i = 0; i < n; ++i) p.at(i, i) = 1.0;
    return p;
  }

  static DenseParams random(int rows, int cols, Rng& rng, double scale) {
    DenseParams p(rows, cols);
    for (double& v : p.w) v = rng.uniform(-scale, scale);
    return p;
  }
};

struct RecurrentParams {
  int dim = 0;
  int obs_dim = 0;
  DenseParams gate_prev, gate_pool, gate_obs;      // gate pre-activation
  std::vector<double> gate_bias;
  DenseParams cand_prev, cand_pool, cand_obs;      // candidate pre-activation
  std::vector<double> cand_bias;

  static RecurrentParams zeros(int dim, int obs_dim) {
    RecurrentParams p;
    p.dim = dim;
    p.obs_dim = obs_dim;
    p.gate_prev = p.cand_prev = DenseParams(dim, dim);
    p.gate_pool = p.cand_pool = DenseParams(dim, dim);
    p.gate_obs = p.cand_obs = DenseParams(dim, obs_dim);
    p.gate_bias.assign(dim, 0.0);
    p.cand_bias.assign(dim, 0.0);
    return p;
  }

  static RecurrentParams random(int dim, int obs_dim, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "recurrent-params"));
    const double scale = 0.5 / std::sqrt(static_cast<double>(dim));
    RecurrentParams p = zeros(dim, obs_dim);
    p.gate_prev = DenseParams::random(dim, dim, rng, scale);
    p.gate_pool = DenseParams::random(dim, dim, rng, scale);
    p.gate_obs = DenseParams::random(dim, obs_dim, rng, scale);
    p.cand_prev = DenseParams::random(dim, dim, rng, scale);
    p.cand_pool = DenseParams::random(dim, dim, rng, scale);
    p.cand_obs = DenseParams::random(dim, obs_dim, rng, scale);
    for (double& b : p.gate_bias) b = rng.uniform(-scale, scale);
    for (double& b : p.cand_bias) b = rng.uniform(-scale, scale);
    return p;
  }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace detail {

/// Mean over received + {prev}; the pool always contains prev, so an empty
/// inbox degenerates to prev itself.
inline MessageVector mean_pool(const MessageVector& prev,
                               const std::vector<const MessageVector*>& received) {
  MessageVector pool = prev;
  for (const MessageVector* m : received) {
    if (m->size() != prev.size())
      throw std::invalid_argument("aggregator: message dimension mismatch");
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] += (*m)[i];
  }
  const double inv = 1.0 / (received.size() + 1);
  for (double& v : pool) v *= inv;
  return pool;
}

}  // namespace detail

/// Gated recurrent update:
///   z = sigmoid(Wg_p prev + Wg_m pool + Wg_o obs + bg)
///   c = tanh(Wc_p prev + Wc_m pool + Wc_o obs + bc)
///   out = z * prev + (1 - z) * c
/// pool is the mean of received + {prev}, so the result never depends on the
/// order of arrivals.
inline MessageVector recurrent_aggregator_update(
    const MessageVector& prev, const std::vector<const MessageVector*>& received,
    const MessageVector& obs_enc, const RecurrentParams& params) {
  if (static_cast<int>(prev.size()) != params.dim ||
      static_cast<int>(obs_enc.size()) != params.obs_dim)
    throw std::invalid_argument("recurrent_aggregator_update: dimension mismatch");
  check_finite(prev, "recurrent_aggregator_update prev");
  check_finite(obs_enc, "recurrent_aggregator_update obs");
  for (const MessageVector* m : received) check_finite(*m, "recurrent_aggregator_update received");

  const MessageVector pool = detail::mean_pool(prev, received);
  const std::vector<double> zg = params.gate_prev.apply(prev);
  const std::vector<double> zm = params.gate_pool.apply(pool);
  const std::vector<double> zo = params.gate_obs.apply(obs_enc);
  const std::vector<double> cg = params.cand_prev.apply(prev);
  const std::vector<double> cm = params.cand_pool.apply(pool);
  const std::vector<double> co = params.cand_obs.apply(obs_enc);

  MessageVector out(params.dim);
  for (int i = 0; i < params.dim; ++i) {
    const double z = sigmoid(zg[i] + zm[i] + zo[i] + params.gate_bias[i]);
    const double c = std::tanh(cg[i] + cm[i] + co[i] + params.cand_bias[i]);
    out[i] = z * prev[i] + (1.0 - z) * c;
  }
  return out;
}

struct AggregatorGradients {
  MessageVector prev;
  MessageVector obs;
  std::vector<MessageVector> received;
};

/// Vector-Jacobian product of the recurrent update: gradients of
/// upstream . out with respect to prev, obs_enc and each received message.
inline AggregatorGradients recurrent_aggregator_backward(
    const MessageVector& prev, const std::vector<const MessageVector*>& received,
    const MessageVector& obs_enc, const RecurrentParams& params,
    const MessageVector& upstream) {
  if (static_cast<int>(upstream.size()) != params.dim)
    throw std::invalid_argument("recurrent_aggregator_backward: upstream dimension");
  const MessageVector pool = detail::mean_pool(prev, received);
  const std::vector<double> zg = params.gate_prev.apply(prev);
  const std::vector<double> zm = params.gate_pool.apply(pool);
  const std::vector<double> zo = params.gate_obs.apply(obs_enc);
  const std::vector<double> cg = params.cand_prev.apply(prev);
  const std::vector<double> cm = params.cand_pool.apply(pool);
  const std::vector<double> co = params.cand_obs.apply(obs_enc);

  std::vector<double> dz(params.dim), dc(params.dim), dprev_direct(params.dim);
  for (int i = 0; i < params.dim; ++i) {
    const double z = sigmoid(zg[i] + zm[i] + zo[i] + params.gate_bias[i]);
    const double c = std::tanh(cg[i] + cm[i] + co[i] + params.cand_bias[i]);
    const double g = upstream[i];
    dz[i] = g * (prev[i] - c) * z * (1.0 - z);  // through the sigmoid
    dc[i] = g * (1.0 - z) * (1.0 - c * c);      // through the tanh
    dprev_direct[i] = g * z;
  }

  const std::vector<double> gp = params.gate_prev.apply_transposed(dz);
  const std::vector<double> gm = params.gate_pool.apply_transposed(dz);
  const std::vector<double> go = params.gate_obs.apply_transposed(dz);
  const std::vector<double> cp = params.cand_prev.apply_transposed(dc);
  const std::vector<double> cm2 = params.cand_pool.apply_transposed(dc);
  const std::vector<double> co2 = params.cand_obs.apply_transposed(dc);

  const double pool_share = 1.0 / (received.size() + 1);
  AggregatorGradients out;
  out.prev.resize(params.dim);
  out.obs.resize(params.obs_dim);
  for (int i = 0; i < params.dim; ++i)
    out.prev[i] = dprev_direct[i] + gp[i] + cp[i] + pool_share * (gm[i] + cm2[i]);
  for (int i = 0; i < params.obs_dim; ++i) out.obs[i] = go[i] + co2[i];
  MessageVector per_received(params.dim);
  for (int i = 0; i < params.dim; ++i)
    per_received[i] = pool_share * (gm[i] + cm2[i]);
  out.received.assign(received.size(), per_received);
  return out;
}

// ---------------------------------------------------------------------------
// Attention aggregator: softmax pooling over the inbox with a residual path.

struct AttentionParams {
  int dim = 0;
  int obs_dim = 0;
  DenseParams query_prev;  // dim x dim
  DenseParams query_obs;   // dim x obs_dim
  DenseParams key;         // dim x dim
  DenseParams value;       // dim x dim

  static AttentionParams identity(int dim, int obs_dim) {
    AttentionParams p;
    p.dim = dim;
    p.obs_dim = obs_dim;
    p.query_prev = DenseParams::identity(dim);
    p.query_obs = DenseParams(dim, obs_dim);
    p.key = DenseParams::identity(dim);
    p.value = DenseParams::identity(dim);
    return p;
  }

  static AttentionParams random(int dim, int obs_dim, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "attention-params"));
    const double scale = 0.5 / std::sqrt(static_cast<double>(dim));
    AttentionParams p;
    p.dim = dim;
    p.obs_dim = obs_dim;
    p.query_prev = DenseParams::random(dim, dim, rng, scale);
    p.query_obs = DenseParams::random(dim, obs_dim, rng, scale);
    p.key = DenseParams::random(dim, dim, rng, scale);
    p.value = DenseParams::random(dim, dim, rng, scale);
    return p;
  }
};

/// Scaled dot-product pooling over received + {prev}:
///   q = Wq prev + Wo obs;  out = prev + sum_m softmax(q.k_m / sqrt(d)) v_m
inline MessageVector attention_aggregator_update(
    const MessageVector& prev, const std::vector<const MessageVector*>& received,
    const MessageVector& obs_enc, const AttentionParams& params) {
  if (static_cast<int>(prev.size()) != params.dim ||
      static_cast<int>(obs_enc.size()) != params.obs_dim)
    throw std::invalid_argument("attention_aggregator_update: dimension mismatch");
  check_finite(prev, "attention_aggregator_update prev");
  check_finite(obs_enc, "attention_aggregator_update obs");

  std::vector<const MessageVector*> pool;
  pool.push_back(&prev);
  for (const MessageVector* m : received) {
    if (static_cast<int>(m->size()) != params.dim)
      throw std::invalid_argument("attention_aggregator_update: dimension mismatch");
    check_finite(*m, "attention_aggregator_update received");
    pool.push_back(m);
  }

  std::vector<double> q = params.query_prev.apply(prev);
  const std::vector<double> qo = params.query_obs.apply(obs_enc);
  for (int i = 0; i < params.dim; ++i) q[i] += qo[i];

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.dim));
  std::vector<double> scores(pool.size());
  double max_s = -1e300;
  std::vector<std::vector<double>> values(pool.size());
  for (std::size_t m = 0; m < pool.size(); ++m) {
    const std::vector<double> k = params.key.apply(*pool[m]);
    values[m] = params.value.apply(*pool[m]);
    double s = 0.0;
    for (int i = 0; i < params.dim; ++i) s += q[i] * k[i];
    scores[m] = s * inv_sqrt_d;
    max_s = std::max(max_s, scores[m]);
  }
  double denom = 0.0;
  for (double& s : scores) {
    s = std::exp(s - max_s);
    denom += s;
  }

  MessageVector out = prev;
  for (std::size_t m = 0; m < pool.size(); ++m) {
    const double w = scores[m] / denom;
    for (int i = 0; i < params.dim; ++i) out[i] += w * values[m][i];
  }
  return out;
}

/// Vector-Jacobian product of the attention update.
inline AggregatorGradients attention_aggregator_backward(
    const MessageVector& prev, const std::vector<const MessageVector*>& received,
    const MessageVector& obs_enc, const AttentionParams& params,
    const MessageVector& upstream) {
  if (static_cast<int>(upstream.size()) != params.dim)
    throw std::invalid_argument("attention_aggregator_backward: upstream dimension");

  std::vector<const MessageVector*> pool;
  pool.push_back(&prev);
  for (const MessageVector* m : received) pool.push_back(m);

  std::vector<double> q = params.query_prev.apply(prev);
  const std::vector<double> qo = params.query_obs.apply(obs_enc);
  for (int i = 0; i < params.dim; ++i) q[i] += qo[i];

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(params.dim));
  const std::size_t count = pool.size();
  std::vector<std::vector<double>> keys(count), values(count);
  std::vector<double> scores(count);
  double max_s = -1e300;
  for (std::size_t m = 0; m < count; ++m) {
    keys[m] = params.key.apply(*pool[m]);
    values[m] = params.value.apply(*pool[m]);
    double s = 0.0;
    for (int i = 0; i < params.dim; ++i) s += q[i] * keys[m][i];
    scores[m] = s * inv_sqrt_d;
    max_s = std::max(max_s, scores[m]);
  }
  std::vector<double> att(count);
  double denom = 0.0;
  for (std::size_t m = 0; m < count; ++m) {
    att[m] = std::exp(scores[m] - max_s);
    denom += att[m];
  }
  for (double& a : att) a /= denom;

  // u_m = upstream . v_m drives the softmax backward pass.
  std::vector<double> u(count);
  double u_bar = 0.0;
  for (std::size_t m = 0; m < count; ++m) {
    double s = 0.0;
    for (int i = 0; i < params.dim; ++i) s += upstream[i] * values[m][i];
    u[m] = s;
    u_bar += att[m] * u[m];
  }
  std::vector<double> dscore(count);
  for (std::size_t m = 0; m < count; ++m) dscore[m] = att[m] * (u[m] - u_bar);

  // dq accumulates through every score; member gradients get the key/value
  // paths plus, for prev, the residual and query paths.
  std::vector<double> dq(params.dim, 0.0);
  for (std::size_t m = 0; m < count; ++m)
    for (int i = 0; i < params.dim; ++i)
      dq[i] += dscore[m] * keys[m][i] * inv_sqrt_d;

  auto member_grad = [&](std::size_t m) {
    std::vector<double> dk(params.dim);
    for (int i = 0; i < params.dim; ++i) dk[i] = dscore[m] * q[i] * inv_sqrt_d;
    std::vector<double> g = params.key.apply_transposed(dk);
    std::vector<double> dv(params.dim);
    for (int i = 0; i < params.dim; ++i) dv[i] = att[m] * upstream[i];
    const std::vector<double> gv = params.value.apply_transposed(dv);
    for (int i = 0; i < params.dim; ++i) g[i] += gv[i];
    return g;
  };

  AggregatorGradients out;
  out.prev = member_grad(0);
  const std::vector<double> gq = params.query_prev.apply_transposed(dq);
  for (int i = 0; i < params.dim; ++i) out.prev[i] += upstream[i] + gq[i];
  out.obs = params.query_obs.apply_transposed(dq);
  out.received.resize(received.size());
  for (std::size_t m = 0; m < received.size(); ++m)
    out.received[m] = member_grad(m + 1);
  return out;
}

// ---------------------------------------------------------------------------
// Episode loop.

struct EpisodeStep {
  std::vector<double> state;
  std::vector<std::vector<double>> obs;
  std::vector<int> actions;
  double reward = 0.0;
  std::vector<double> next_state;
  std::vector<std::vector<double>> next_obs;
  std::vector<std::vector<double>> messages;  // numeric snapshot per agent
};

struct EpisodeBuffer {
  std::vector<EpisodeStep> steps;
};

struct BudgetReport {
  std::int64_t total_messages = 0;
  std::vector<std::int64_t> per_step;
};

inline std::int64_t budget_per_step(const TopologySchedule& schedule, std::int64_t t) {
  return graph_size(schedule.at(t));
}

/// One decentralized episode. Per step t: histories absorb the current
/// observation, message t is built from message t-1 plus the arrivals sent
/// over the step-(t-1) graph, actions are sampled from (history, message),
/// then message t is dispatched over the step-t graph. The first step has an
/// empty inbox. Aggregator drivers supply the message type plus a numeric
/// view for snapshots; everything is deterministic given the seeds.
template <typename Env, typename Policy, typename AggregatorDriver>
std::pair<EpisodeBuffer, BudgetReport> run_episode(Env& env, Policy& policy,
                                                   const TopologySchedule& schedule,
                                                   AggregatorDriver& aggregator,
                                                   int horizon, std::uint64_t seed) {
  const int n = env.n_agents();
  if (schedule.n() != n)
    throw std::invalid_argument("run_episode: env/schedule size mismatch");
  if (horizon < 1) throw std::invalid_argument("run_episode: horizon must be >= 1");

  env.reset(derive_seed(seed, "episode-env"));
  policy.begin_episode(derive_seed(seed, "episode-policy"));

  using Message = typename AggregatorDriver::Message;
  std::vector<Message> messages;
  messages.reserve(n);
  for (int i = 0; i < n; ++i) messages.push_back(aggregator.initial(env, i));

  // inbox[j] holds what was dispatched to j at the previous step.
  std::vector<std::vector<Message>> inbox(n);

  EpisodeBuffer buffer;
  BudgetReport budget;
  for (int t = 0; t < horizon; ++t) {
    EpisodeStep step;
    step.state = env.state();
    step.obs.resize(n);
    for (int i = 0; i < n; ++i) step.obs[i] = env.observe(i);

    std::vector<Message> updated;
    updated.reserve(n);
    for (int i = 0; i < n; ++i) {
      std::vector<const Message*> received;
      received.reserve(inbox[i].size());
      for (const Message& m : inbox[i]) received.push_back(&m);
      updated.push_back(aggregator.update(messages[i], received, env, i, t));
    }
    messages.swap(updated);

    step.messages.resize(n);
    for (int i = 0; i < n; ++i) step.messages[i] = aggregator.view(messages[i]);

    step.actions.resize(n);
    for (int i = 0; i < n; ++i)
      step.actions[i] = policy.act(i, step.obs[i], step.messages[i], t);

    const AdjacencyMatrix adj = schedule.at(t);
    const std::int64_t sent = graph_size(adj);
    budget.per_step.push_back(sent);
    budget.total_messages += sent;
    for (auto& box : inbox) box.clear();
    for (int i = 0; i < n; ++i)
      for (int j : adj.out_edges(i)) inbox[j].push_back(messages[i]);

    step.reward = env.step(step.actions);
    step.next_state = env.state();
    step.next_obs.resize(n);
    for (int i = 0; i < n; ++i) step.next_obs[i] = env.observe(i);
    buffer.steps.push_back(std::move(step));
  }
  return {std::move(buffer), std::move(budget)};
}

// ---------------------------------------------------------------------------
// Ready-made aggregator drivers for run_episode.

/// Union driver for environments exposing agent_bit(i).
template <typename Env>
struct UnionAggregatorDriver {
  using Message = UnionMessage;

  Message initial(const Env& env, int i) const {
    return UnionMessage::origin(env.n_agents(), i, env.agent_bit(i));
  }

  Message update(const Message& prev, const std::vector<const Message*>& received,
                 const Env& env, int i, int /*t*/) const {
    return union_aggregator_update(prev, received, i, env.agent_bit(i));
  }

  std::vector<double> view(const Message& m) const {
    return {m.ones_fraction(), m.coverage_fraction()};
  }
};

/// Numeric drivers encode the observation with a caller-provided functor.
template <typename Env, typename ObsEncoder>
struct RecurrentAggregatorDriver {
  using Message = MessageVector;

  RecurrentParams params;
  ObsEncoder encode;

  Message initial(const Env&, int) const { return MessageVector(params.dim, 0.0); }

  Message update(const Message& prev, const std::vector<const Message*>& received,
                 const Env& env, int i, int t) const {
    return recurrent_aggregator_update(prev, received, encode(env, i, t), params);
  }

  std::vector<double> view(const Message& m) const { return m; }
};

template <typename Env, typename ObsEncoder>
struct AttentionAggregatorDriver {
  using Message = MessageVector;

  AttentionParams params;
  ObsEncoder encode;

  Message initial(const Env&, int) const { return MessageVector(params.dim, 0.0); }

  Message update(const Message& prev, const std::vector<const Message*>& received,
                 const Env& env, int i, int t) const {
    return attention_aggregator_update(prev, received, encode(env, i, t), params);
  }

  std::vector<double> view(const Message& m) const { return m; }
};

}  // namespace commlab
