#pragma once

#include <concepts>
#include <cstdint>

#include "fhescale/ppo/ppo.hpp"

namespace fhescale::ppo {

template <typename E>
concept RolloutEnv = requires(E& env, std::uint64_t seed, int action) {
  { env.state_vector(env.reset(seed)) } -> std::convertible_to<std::array<double, kStateDim>>;
  { env.step(action).reward.total } -> std::convertible_to<double>;
  { env.step(action).done } -> std::convertible_to<bool>;
  { env.state_vector(env.step(action).observation) } -> std::convertible_to<std::array<double, kStateDim>>;
};

/// Episode bookkeeping carried across rollouts. Episode e is reset with
/// mix_seed(seed, e).
struct RolloutCursor {
  std::uint64_t seed = 0;
  std::uint64_t episode = 0;
  bool needs_reset = true;
  std::array<double, kStateDim> state{};
};

struct NoStepHook {
  template <typename R>
  void operator()(std::uint64_t, const R&) const {}
};

/// Samples n_steps transitions. Episodes end only by time limit, so the
/// learning reward of a final step gets gamma * V(final state) added.
/// `hook(episode, step_result)` sees every raw env step.
template <RolloutEnv Env, typename Hook = NoStepHook>
Trajectory collect_rollout(Env& env, const PolicyNet& net, int n_steps, Rng& rng, RolloutCursor& cursor,
                           double gamma, Hook&& hook = {}) {
  Trajectory traj;
  for (int i = 0; i < n_steps; ++i) {
    if (cursor.needs_reset) {
      cursor.state = env.state_vector(env.reset(mix_seed(cursor.seed, cursor.episode)));
      cursor.needs_reset = false;
    }
    const auto out = net.forward(cursor.state);
    const auto pick = sample_action(out.probs, rng);
    const auto result = env.step(pick.action);
    hook(cursor.episode, result);

    double reward = result.reward.total;
    const auto next = env.state_vector(result.observation);
    if (result.done) reward += gamma * net.forward(next).value;

    traj.states.push_back(cursor.state);
    traj.actions.push_back(pick.action);
    traj.log_probs.push_back(pick.log_prob);
    traj.rewards.push_back(reward);
    traj.values.push_back(out.value);
    traj.dones.push_back(result.done ? 1 : 0);

    cursor.state = next;
    if (result.done) {
      ++cursor.episode;
      cursor.needs_reset = true;
    }
  }
  traj.bootstrap_value = cursor.needs_reset ? 0.0 : net.forward(cursor.state).value;
  return traj;
}

template <RolloutEnv Env>
Trajectory collect_rollout(Env& env, const PolicyNet& net, int n_steps, Rng& rng) {
  RolloutCursor cursor;
  cursor.seed = rng();
  return collect_rollout(env, net, n_steps, rng, cursor, PPOConfig{}.gamma);
}

}  // namespace fhescale::ppo
