#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fhescale/common/random.hpp"
#include "fhescale/ppo/policy_net.hpp"

namespace fhescale::ppo {

struct PPOConfig {
  double clip_epsilon = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double learning_rate = 3e-4;
  int epochs = 10;
  int minibatch_size = 64;
  double entropy_coef = 0.0;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
  int rollout_length = 2048;
  bool normalize_advantages = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// On-policy batch. dones[i] marks that the episode ended after step i.
struct Trajectory {
  std::vector<std::array<double, kStateDim>> states;
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;  // learning rewards, incl. time-limit bootstrap
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  double bootstrap_value = 0.0;  // V of the state after the last step

  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return states.size(); }
  /// Throws std::invalid_argument when the parallel arrays disagree.
  void validate() const;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// delta_t = r_t + gamma V_{t+1} (1 - done_t) - V_t, A_t = sum (gamma lambda)^i delta_{t+i}.
GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                      std::span<const std::uint8_t> dones, double gamma, double lambda,
                      double bootstrap_value);
void compute_gae(Trajectory& traj, double gamma, double lambda);

struct Sample {
  int action = 0;
  double log_prob = 0.0;
};

/// Inverse-CDF draw; zero-probability actions are never chosen.
Sample sample_action(const std::array<double, kActions>& probs, Rng& rng);
int greedy_action(const std::array<double, kActions>& probs);

/// min(rho A, clip(rho, 1 - eps, 1 + eps) A)
double clipped_surrogate(double ratio, double advantage, double epsilon);

struct LossTerms {
  double total = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

/// Batch view used by the loss: advantages are taken as given.
struct Batch {
  Eigen::MatrixXd states;  // kStateDim x B
  std::vector<int> actions;
  std::vector<double> old_log_probs;
  std::vector<double> advantages;
  std::vector<double> returns;

  static Batch from(const Trajectory& traj, std::span<const std::size_t> indices,
                    std::span<const double> advantages);
};

/// Mean PPO loss over the batch and its exact gradient.
LossTerms loss_and_gradient(const PolicyNet& net, const Batch& batch, const PPOConfig& config,
                            Eigen::VectorXd* grad);

class Adam {
 public:
  explicit Adam(std::size_t n, double lr = 3e-4, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-5);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  void set_learning_rate(double lr) { lr_ = lr; }
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
  int minibatches = 0;
  bool aborted = false;  // a non-finite loss stopped the update
};

/// Runs config.epochs passes of shuffled minibatches. Requires advantages.
UpdateStats ppo_update(PolicyNet& net, Adam& optimizer, const Trajectory& traj, const PPOConfig& config,
                       Rng& rng);

}  // namespace fhescale::ppo
