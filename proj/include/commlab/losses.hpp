#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "commlab/rng.hpp"

namespace commlab {

struct LossConfig {
  double alpha = 0.1;    // auxiliary loss weight
  double tau = 0.07;     // contrastive temperature
  int m_negatives = 20;  // negatives per contrastive batch
  double gamma = 0.99;   // discount

  void validate() const {
    if (alpha < 0.0) throw std::invalid_argument("losses.alpha must be >= 0");
    if (tau <= 0.0) throw std::invalid_argument("losses.tau must be > 0");
    if (m_negatives < 1) throw std::invalid_argument("losses.m_negatives must be >= 1");
    if (gamma <= 0.0 || gamma > 1.0)
      throw std::invalid_argument("losses.gamma must be in (0, 1]");
  }
};

inline double td_target(double reward, double gamma, double q_next_max) {
  return reward + gamma * q_next_max;
}

/// Mean squared TD error over a batch of (target, prediction) pairs.
inline double td_loss(const std::vector<std::pair<double, double>>& batch) {
  if (batch.empty()) throw std::invalid_argument("td_loss: empty batch");
  double acc = 0.0;
  for (const auto& [y, q] : batch) {
    const double d = y - q;
    acc += d * d;
  }
  return acc / batch.size();
}

/// Squared state-prediction error, summed over state dimensions and averaged
/// over the batch.
inline double aux_pred_loss(const std::vector<std::vector<double>>& states,
                            const std::vector<std::vector<double>>& predictions) {
  if (states.size() != predictions.size() || states.empty())
    throw std::invalid_argument("aux_pred_loss: batch mismatch");
  double acc = 0.0;
  for (std::size_t b = 0; b < states.size(); ++b) {
    if (states[b].size() != predictions[b].size())
      throw std::invalid_argument("aux_pred_loss: dimension mismatch");
    for (std::size_t d = 0; d < states[b].size(); ++d) {
      const double e = states[b][d] - predictions[b][d];
      acc += e * e;
    }
  }
  return acc / states.size();
}

/// d(aux_pred_loss)/d(predictions), same shape as predictions.
inline std::vector<std::vector<double>> aux_pred_loss_grad_predictions(
    const std::vector<std::vector<double>>& states,
    const std::vector<std::vector<double>>& predictions) {
  if (states.size() != predictions.size() || states.empty())
    throw std::invalid_argument("aux_pred_loss_grad: batch mismatch");
  std::vector<std::vector<double>> grad(predictions.size());
  const double scale = 2.0 / states.size();
  for (std::size_t b = 0; b < states.size(); ++b) {
    grad[b].resize(predictions[b].size());
    for (std::size_t d = 0; d < predictions[b].size(); ++d)
      grad[b][d] = scale * (predictions[b][d] - states[b][d]);
  }
  return grad;
}

inline double total_loss(double td, double aux, double alpha) {
  return td + alpha * aux;
}

struct ContrastiveBatch {
  std::vector<double> anchor;
  std::vector<double> positive;
  std::vector<std::vector<double>> negatives;

  void validate() const {
    if (anchor.empty()) throw std::invalid_argument("ContrastiveBatch: empty anchor");
    if (positive.size() != anchor.size())
      throw std::invalid_argument("ContrastiveBatch: dimension mismatch");
    for (const auto& m : negatives)
      if (m.size() != anchor.size())
        throw std::invalid_argument("ContrastiveBatch: dimension mismatch");
    if (negatives.empty())
      throw std::invalid_argument("ContrastiveBatch: no negatives");
  }
};

namespace detail {

inline double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline std::vector<double> normalized(const std::vector<double>& v) {
  const double n = norm(v);
  if (n == 0.0)
    throw std::invalid_argument("infonce_loss: zero vector has no direction");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Backpropagates a gradient through unit normalization:
/// returns (I - u u^T) g / |v| where u = v/|v|.
inline std::vector<double> project_through_normalization(
    const std::vector<double>& raw, const std::vector<double>& grad_unit) {
  const double n = norm(raw);
  const std::vector<double> u = normalized(raw);
  const double proj = dot(u, grad_unit);
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    out[i] = (grad_unit[i] - proj * u[i]) / n;
  return out;
}

}  // namespace detail

/// Contrastive softmax score of the positive against positive + negatives,
/// on unit-normalized vectors at temperature tau:
///   -log exp(a.p/tau) / sum_{m in {positive} + negatives} exp(a.m/tau)
inline double infonce_loss(const ContrastiveBatch& batch, double tau) {
  batch.validate();
  if (tau <= 0.0) throw std::invalid_argument("infonce_loss: tau must be > 0");
  const std::vector<double> a = detail::normalized(batch.anchor);
  const std::vector<double> p = detail::normalized(batch.positive);

  const double s_pos = detail::dot(a, p) / tau;
  double max_s = s_pos;
  std::vector<double> scores;
  scores.reserve(batch.negatives.size());
  for (const auto& m : batch.negatives) {
    const double s = detail::dot(a, detail::normalized(m)) / tau;
    scores.push_back(s);
    max_s = std::max(max_s, s);
  }
  double denom = std::exp(s_pos - max_s);
  for (double s : scores) denom += std::exp(s - max_s);
  return -(s_pos - max_s) + std::log(denom);
}

struct InfoNceGradients {
  double loss = 0.0;
  std::vector<double> anchor;
  std::vector<double> positive;
  std::vector<std::vector<double>> negatives;
};

/// infonce_loss with analytic gradients w.r.t. the raw (unnormalized) inputs.
inline InfoNceGradients infonce_loss_with_grad(const ContrastiveBatch& batch,
                                               double tau) {
  batch.validate();
  if (tau <= 0.0) throw std::invalid_argument("infonce_loss: tau must be > 0");
  const std::size_t dim = batch.anchor.size();
  const std::size_t m_count = batch.negatives.size();

  const std::vector<double> a = detail::normalized(batch.anchor);
  std::vector<std::vector<double>> members;  // positive first, then negatives
  members.reserve(m_count + 1);
  members.push_back(detail::normalized(batch.positive));
  for (const auto& m : batch.negatives) members.push_back(detail::normalized(m));

  std::vector<double> scores(members.size());
  double max_s = -1e300;
  for (std::size_t k = 0; k < members.size(); ++k) {
    scores[k] = detail::dot(a, members[k]) / tau;
    max_s = std::max(max_s, scores[k]);
  }
  double denom = 0.0;
  std::vector<double> softmax(members.size());
  for (std::size_t k = 0; k < members.size(); ++k) {
    softmax[k] = std::exp(scores[k] - max_s);
    denom += softmax[k];
  }
  for (double& w : softmax) w /= denom;

  InfoNceGradients out;
  out.loss = -(scores[0] - max_s) + std::log(denom);

  // dL/d(a_hat) = (sum_k w_k m_hat_k - m_hat_pos) / tau
  std::vector<double> grad_a_hat(dim, 0.0);
  for (std::size_t k = 0; k < members.size(); ++k)
    for (std::size_t i = 0; i < dim; ++i)
      grad_a_hat[i] += softmax[k] * members[k][i] / tau;
  for (std::size_t i = 0; i < dim; ++i) grad_a_hat[i] -= members[0][i] / tau;
  out.anchor = detail::project_through_normalization(batch.anchor, grad_a_hat);

  // dL/d(m_hat_pos) = (w_pos - 1) a_hat / tau; dL/d(m_hat_neg) = w_neg a_hat / tau
  std::vector<double> grad_m_hat(dim);
  for (std::size_t i = 0; i < dim; ++i)
    grad_m_hat[i] = (softmax[0] - 1.0) * a[i] / tau;
  out.positive = detail::project_through_normalization(batch.positive, grad_m_hat);

  out.negatives.resize(m_count);
  for (std::size_t k = 0; k < m_count; ++k) {
    for (std::size_t i = 0; i < dim; ++i)
      grad_m_hat[i] = softmax[k + 1] * a[i] / tau;
    out.negatives[k] =
        detail::project_through_normalization(batch.negatives[k], grad_m_hat);
  }
  return out;
}

/// Message log indexed [t][agent] -> message vector.
using MessageLog = std::vector<std::vector<std::vector<double>>>;

struct ContrastiveSample {
  ContrastiveBatch batch;
  int anchor_agent = 0;
  int anchor_t = 0;
  int positive_agent = 0;
  std::vector<std::pair<int, int>> negative_indices;  // (agent, t')
};

/// Draws anchor (i, t), positive (j != i, t) and M negatives from timesteps
/// farther than `diameter` from t. Negative draws are uniform over the far
/// pool, agents included the anchor's own. Deterministic per seed.
inline ContrastiveSample sample_contrastive_pairs(const MessageLog& log,
                                                  int diameter,
                                                  const LossConfig& cfg,
                                                  std::uint64_t seed) {
  cfg.validate();
  const int steps = static_cast<int>(log.size());
  if (steps == 0) throw std::invalid_argument("sample_contrastive_pairs: empty log");
  const int n = static_cast<int>(log[0].size());
  if (n < 2) throw std::invalid_argument("sample_contrastive_pairs: need >= 2 agents");
  if (diameter < 0)
    throw std::invalid_argument("sample_contrastive_pairs: negative diameter");
  if (steps <= 2 * diameter)
    throw std::invalid_argument(
        "sample_contrastive_pairs: log too short to exclude the diameter window");

  Rng rng(derive_seed(seed, "contrastive-pairs"));
  ContrastiveSample out;
  out.anchor_agent = static_cast<int>(rng.below(n));
  out.anchor_t = static_cast<int>(rng.below(steps));
  out.positive_agent = static_cast<int>(rng.below(n - 1));
  if (out.positive_agent >= out.anchor_agent) ++out.positive_agent;

  std::vector<int> far_steps;
  for (int t = 0; t < steps; ++t)
    if (std::abs(t - out.anchor_t) > diameter) far_steps.push_back(t);
  if (far_steps.empty())
    throw std::invalid_argument(
        "sample_contrastive_pairs: no timestep lies outside the diameter window");

  out.batch.anchor = log[out.anchor_t][out.anchor_agent];
  out.batch.positive = log[out.anchor_t][out.positive_agent];
  for (int m = 0; m < cfg.m_negatives; ++m) {
    const int t = far_steps[rng.below(far_steps.size())];
    const int agent = static_cast<int>(rng.below(n));
    out.negative_indices.emplace_back(agent, t);
    out.batch.negatives.push_back(log[t][agent]);
  }
  return out;
}

/// Max relative error between an analytic gradient and central differences of
/// f at `point`. Relative scale max(1, |analytic|) keeps near-zero entries
/// from blowing up the ratio.
inline double finite_diff_check(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& point, const std::vector<double>& analytic_grad,
    double epsilon) {
  if (point.size() != analytic_grad.size())
    throw std::invalid_argument("finite_diff_check: gradient size mismatch");
  if (epsilon < 1e-8 || epsilon > 1e-3)
    throw std::invalid_argument("finite_diff_check: epsilon out of [1e-8, 1e-3]");
  std::vector<double> x = point;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + epsilon;
    const double hi = f(x);
    x[i] = keep - epsilon;
    const double lo = f(x);
    x[i] = keep;
    if (!std::isfinite(hi) || !std::isfinite(lo))
      throw std::invalid_argument("finite_diff_check: non-finite evaluation");
    const double numeric = (hi - lo) / (2.0 * epsilon);
    const double rel = std::abs(numeric - analytic_grad[i]) /
                       std::max(1.0, std::abs(analytic_grad[i]));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace commlab
