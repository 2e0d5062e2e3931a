#include "fhescale/ppo/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fhescale::ppo {

void PPOConfig::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(what); };
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) fail("clip_epsilon must be in (0, 1)");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must be in [0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) fail("gae_lambda must be in [0, 1]");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (epochs < 1) fail("epochs must be >= 1");
  if (minibatch_size < 1) fail("minibatch_size must be >= 1");
  if (entropy_coef < 0.0) fail("entropy_coef must be >= 0");
  if (value_coef < 0.0) fail("value_coef must be >= 0");
  if (rollout_length < 1) fail("rollout_length must be >= 1");
}

void Trajectory::validate() const {
  const auto n = states.size();
  if (actions.size() != n || log_probs.size() != n || rewards.size() != n || values.size() != n ||
      dones.size() != n)
    throw std::invalid_argument("trajectory: parallel arrays differ in length");
  if (!advantages.empty() && (advantages.size() != n || returns.size() != n))
    throw std::invalid_argument("trajectory: advantages/returns length mismatch");
}

GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double gamma, double lambda,
                      double bootstrap_value) {
  const auto n = rewards.size();
  if (n == 0) throw std::invalid_argument("compute_gae: empty trajectory");
  if (values.size() != n || dones.size() != n) throw std::invalid_argument("compute_gae: length mismatch");
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_value = t + 1 < n ? values[t + 1] : bootstrap_value;
    const double live = dones[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_value * live - values[t];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[t] = next_adv;
    out.returns[t] = next_adv + values[t];
  }
  return out;
}

void compute_gae(Trajectory& traj, double gamma, double lambda) {
  traj.validate();
  auto r = compute_gae(traj.rewards, traj.values, traj.dones, gamma, lambda, traj.bootstrap_value);
  traj.advantages = std::move(r.advantages);
  traj.returns = std::move(r.returns);
}

Sample sample_action(const std::array<double, kActions>& probs, Rng& rng) {
  const double u = uniform01(rng);
  double cum = 0.0;
  int chosen = -1;
  for (int k = 0; k < kActions; ++k) {
    const double p = probs[static_cast<std::size_t>(k)];
    if (p <= 0.0) continue;
    chosen = k;
    cum += p;
    if (u < cum) break;
  }
  if (chosen < 0) throw std::invalid_argument("sample_action: no positive probability");
  return {chosen, std::log(probs[static_cast<std::size_t>(chosen)])};
}

int greedy_action(const std::array<double, kActions>& probs) {
  return static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

double clipped_surrogate(double ratio, double advantage, double epsilon) {
  return std::min(ratio * advantage, std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * advantage);
}

Batch Batch::from(const Trajectory& traj, std::span<const std::size_t> indices,
                  std::span<const double> advantages) {
  Batch b;
  b.states.resize(kStateDim, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) {
    const auto i = indices[j];
    for (int d = 0; d < kStateDim; ++d)
      b.states(d, static_cast<Eigen::Index>(j)) = traj.states[i][static_cast<std::size_t>(d)];
    b.actions.push_back(traj.actions[i]);
    b.old_log_probs.push_back(traj.log_probs[i]);
    b.advantages.push_back(advantages[i]);
    b.returns.push_back(traj.returns[i]);
  }
  return b;
}

LossTerms loss_and_gradient(const PolicyNet& net, const Batch& batch, const PPOConfig& config,
                            Eigen::VectorXd* grad) {
  const auto c = net.forward_batch(batch.states);
  const Eigen::Index B = batch.states.cols();
  const double inv_b = 1.0 / static_cast<double>(B);
  const double eps = config.clip_epsilon;

  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(c.logits.rows(), B);
  Eigen::RowVectorXd d_values = Eigen::RowVectorXd::Zero(B);
  LossTerms t;
  int clipped = 0;

  for (Eigen::Index i = 0; i < B; ++i) {
    const auto k = static_cast<std::size_t>(i);
    const int a = batch.actions[k];
    const double adv = batch.advantages[k];
    const double log_ratio = c.log_probs(a, i) - batch.old_log_probs[k];
    const double ratio = std::exp(log_ratio);
    const double unclipped = ratio * adv;
    const double clipped_term = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * adv;
    t.policy_loss -= std::min(unclipped, clipped_term);
    clipped += std::abs(ratio - 1.0) > eps;
    t.approx_kl += (ratio - 1.0) - log_ratio;

    const auto p = c.probs.col(i);
    const auto lp = c.log_probs.col(i);
    const double h = -(p.array() * lp.array()).sum();
    t.entropy += h;

    const double v_err = c.values(i) - batch.returns[k];
    t.value_loss += v_err * v_err;

    if (grad) {
      // d(-min)/d log_prob is -ratio*A when the unclipped branch is active.
      const double d_lp = unclipped <= clipped_term ? -ratio * adv * inv_b : 0.0;
      d_logits.col(i) -= d_lp * p;
      d_logits(a, i) += d_lp;
      d_logits.col(i) += config.entropy_coef * inv_b * (p.array() * (lp.array() + h)).matrix();
      d_values(i) = config.value_coef * 2.0 * v_err * inv_b;
    }
  }

  t.policy_loss *= inv_b;
  t.value_loss *= inv_b;
  t.entropy *= inv_b;
  t.approx_kl *= inv_b;
  t.clip_fraction = clipped * inv_b;
  t.total = t.policy_loss + config.value_coef * t.value_loss - config.entropy_coef * t.entropy;
  if (grad) {
    grad->setZero(net.parameters().size());
    net.backward(c, d_logits, d_values, *grad);
  }
  return t;
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (grad.size() != m_.size() || params.size() != m_.size())
    throw std::invalid_argument("Adam: size mismatch");
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

UpdateStats ppo_update(PolicyNet& net, Adam& optimizer, const Trajectory& traj, const PPOConfig& config,
                       Rng& rng) {
  config.validate();
  traj.validate();
  const std::size_t n = traj.size();
  if (n == 0 || traj.advantages.size() != n) throw std::invalid_argument("ppo_update: compute advantages first");

  std::vector<double> adv = traj.advantages;
  if (config.normalize_advantages && n > 1) {
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (double& a : adv) a = (a - mean) / (sd + 1e-8);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto mb = static_cast<std::size_t>(config.minibatch_size);
  UpdateStats s;
  Eigen::VectorXd grad;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1))]);
    for (std::size_t start = 0; start < n; start += mb) {
      const auto idx = std::span<const std::size_t>(order).subspan(start, std::min(mb, n - start));
      const auto terms = loss_and_gradient(net, Batch::from(traj, idx, adv), config, &grad);
      const double norm = grad.norm();
      if (!std::isfinite(terms.total) || !std::isfinite(norm)) {
        s.aborted = true;
        break;
      }
      if (config.max_grad_norm > 0.0 && norm > config.max_grad_norm) grad *= config.max_grad_norm / norm;
      optimizer.step(net.parameters(), grad);

      ++s.minibatches;
      s.policy_loss += terms.policy_loss;
      s.value_loss += terms.value_loss;
      s.entropy += terms.entropy;
      s.approx_kl += terms.approx_kl;
      s.clip_fraction += terms.clip_fraction;
      s.grad_norm += norm;
    }
    if (s.aborted) break;
  }
  if (s.minibatches > 0) {
    const double k = s.minibatches;
    s.policy_loss /= k;
    s.value_loss /= k;
    s.entropy /= k;
    s.approx_kl /= k;
    s.clip_fraction /= k;
    s.grad_norm /= k;
  }
  return s;
}

}  // namespace fhescale::ppo
