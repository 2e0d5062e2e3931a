#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fhescale/env/scaling_env.hpp"
#include "fhescale/ppo/policy_net.hpp"
#include "fhescale/ppo/ppo.hpp"

namespace fhescale::harness {

struct StepRow {
  int episode = 0;
  int step = 0;
  int action = 1;
  double response_time_s = 0.0;
  int pod_count = 0;
  int replica_target = 0;
  double reward_base = 0.0;
  double penalty_stress = 0.0;
  double penalty_resource = 0.0;
  double heal_penalty = 0.0;
  double reward_total = 0.0;
  bool stress_failed = false;  // a stress test ran and success_rate < 1
};

struct EpisodeRow {
  int episode = 0;
  int steps = 0;
  double mean_reward = 0.0;
  double mean_latency_s = 0.0;
  double mean_replicas = 0.0;  // replica target
  double mean_pods = 0.0;
  int stress_failures = 0;
};

StepRow make_step_row(int episode, const env::StepResult& r);
/// Aggregates rows of one episode.
EpisodeRow summarize_episode(int episode, const std::vector<StepRow>& rows);
std::vector<EpisodeRow> summarize(const std::vector<StepRow>& rows);

struct TrainSpec {
  env::EnvConfig env;
  ppo::PPOConfig ppo;
  ppo::NetLayout layout;
  double policy_head_scale = 0.01;
  int episodes = 100;
  std::uint64_t seed = 0;
};

struct TrainOutput {
  ppo::PolicyNet net;
  std::vector<StepRow> steps;
  std::vector<EpisodeRow> episodes;
  std::vector<ppo::UpdateStats> updates;
};

/// Called after each PPO update with (episodes completed, stats).
using ProgressFn = std::function<void(int, const ppo::UpdateStats&)>;

/// Trains for exactly spec.episodes episodes; the final rollout is
/// shortened so no partial episode is collected.
TrainOutput train_agent(const TrainSpec& spec, const ProgressFn& progress = {});

struct EvalOutput {
  std::vector<StepRow> steps;
  std::vector<EpisodeRow> episodes;
};

/// Greedy (argmax) rollouts. Episode e uses env seed mix_seed(seed, e).
EvalOutput evaluate_policy(const ppo::PolicyNet& net, const env::EnvConfig& env, int episodes,
                           std::uint64_t seed);

}  // namespace fhescale::harness
