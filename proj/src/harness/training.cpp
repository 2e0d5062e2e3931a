#include "fhescale/harness/training.hpp"

#include <algorithm>

#include "fhescale/ppo/rollout.hpp"

namespace fhescale::harness {

StepRow make_step_row(int episode, const env::StepResult& r) {
  StepRow row;
  row.episode = episode;
  row.step = r.info.step_index;
  row.action = static_cast<int>(r.info.action);
  row.response_time_s = r.info.response_time_s;
  row.pod_count = r.info.pod_count;
  row.replica_target = r.info.replica_target;
  row.reward_base = r.reward.reward_base;
  row.penalty_stress = r.reward.penalty_stress;
  row.penalty_resource = r.reward.penalty_resource;
  row.heal_penalty = r.reward.heal_penalty_applied;
  row.reward_total = r.reward.total;
  row.stress_failed = r.info.stress && r.info.stress->success_rate < 1.0;
  return row;
}

EpisodeRow summarize_episode(int episode, const std::vector<StepRow>& rows) {
  EpisodeRow e;
  e.episode = episode;
  e.steps = static_cast<int>(rows.size());
  if (rows.empty()) return e;
  for (const auto& r : rows) {
    e.mean_reward += r.reward_total;
    e.mean_latency_s += r.response_time_s;
    e.mean_replicas += r.replica_target;
    e.mean_pods += r.pod_count;
    e.stress_failures += r.stress_failed;
  }
  const double n = static_cast<double>(rows.size());
  e.mean_reward /= n;
  e.mean_latency_s /= n;
  e.mean_replicas /= n;
  e.mean_pods /= n;
  return e;
}

std::vector<EpisodeRow> summarize(const std::vector<StepRow>& rows) {
  std::vector<EpisodeRow> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].episode == rows[i].episode) ++j;
    out.push_back(summarize_episode(rows[i].episode, {rows.begin() + static_cast<std::ptrdiff_t>(i),
                                                      rows.begin() + static_cast<std::ptrdiff_t>(j)}));
    i = j;
  }
  return out;
}

TrainOutput train_agent(const TrainSpec& spec, const ProgressFn& progress) {
  spec.env.validate();
  spec.ppo.validate();
  if (spec.episodes < 0) throw std::invalid_argument("episodes must be >= 0");

  TrainOutput out{ppo::PolicyNet(spec.layout, ppo::NetInit{.seed = mix_seed(spec.seed, 1),
                                                           .policy_head_scale = spec.policy_head_scale}),
                  {}, {}, {}};
  env::ScalingEnv env(spec.env);
  ppo::Adam adam(spec.layout.parameter_count(), spec.ppo.learning_rate);
  Rng act_rng(mix_seed(spec.seed, 2));
  Rng update_rng(mix_seed(spec.seed, 4));
  ppo::RolloutCursor cursor{.seed = mix_seed(spec.seed, 3)};

  const long total = static_cast<long>(spec.episodes) * spec.env.steps_per_episode;
  long done_steps = 0;
  auto hook = [&](std::uint64_t episode, const env::StepResult& r) {
    out.steps.push_back(make_step_row(static_cast<int>(episode), r));
  };
  while (done_steps < total) {
    const int n = static_cast<int>(std::min<long>(spec.ppo.rollout_length, total - done_steps));
    auto traj = ppo::collect_rollout(env, out.net, n, act_rng, cursor, spec.ppo.gamma, hook);
    done_steps += n;
    ppo::compute_gae(traj, spec.ppo.gamma, spec.ppo.gae_lambda);
    out.updates.push_back(ppo::ppo_update(out.net, adam, traj, spec.ppo, update_rng));
    if (progress) progress(static_cast<int>(cursor.episode), out.updates.back());
  }
  out.episodes = summarize(out.steps);
  return out;
}

EvalOutput evaluate_policy(const ppo::PolicyNet& net, const env::EnvConfig& config, int episodes,
                           std::uint64_t seed) {
  if (episodes < 0) throw std::invalid_argument("episodes must be >= 0");
  EvalOutput out;
  if (episodes == 0) return out;
  env::ScalingEnv env(config);
  for (int e = 0; e < episodes; ++e) {
    auto state = env.state_vector(env.reset(mix_seed(seed, static_cast<std::uint64_t>(e))));
    while (!env.done()) {
      const auto r = env.step(ppo::greedy_action(net.forward(state).probs));
      out.steps.push_back(make_step_row(e, r));
      state = env.state_vector(r.observation);
    }
  }
  out.episodes = summarize(out.steps);
  return out;
}

}  // namespace fhescale::harness
