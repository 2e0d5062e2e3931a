#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "fhescale/common/random.hpp"
#include "fhescale/sim/cluster.hpp"

namespace fhescale::env {

enum class Action : int { ScaleDown = 0, NoOp = 1, ScaleUp = 2 };
inline constexpr int kActionCount = 3;

struct EnvConfig {
  int stress_interval = 5;     // k
  int soft_pod_threshold = 5;  // r_max, compared with the pod count
  double pod_cost = 0.1;
  double stress_fail_weight = 5.0;
  double stress_latency_weight = 2.0;
  double latency_threshold_s = 2.0;
  double heal_penalty = -10.0;
  double t_cap = 10.0;
  int p_cap = 10;
  int steps_per_episode = 20;
  int recovery_cap = 10;
  double settle_margin_s = 0.5;
  int initial_replicas = 1;
  /// Hard cap (max_replicas) and cooldown window live here.
  sim::SimConfig cluster;

  int max_pods() const { return cluster.max_replicas; }
  void validate() const;
};

/// Eq-style reward terms.
double reward_base(double t, int pod_count, double pod_cost = 0.1);
double penalty_resource(int current, int threshold);
double penalty_stress(double success_rate, double avg_response, double fail_weight = 5.0,
                      double latency_weight = 2.0, double latency_threshold = 2.0);
/// r <- min(r + max(1, floor(penalty / 2)), cap)
int recovery_target(int r, double stress_penalty, int cap = 10);

struct Observation {
  double t = 0.0;  // [0, t_cap]
  int p = 1;       // [1, p_cap]

  /// (t / t_cap, p / p_cap) as fed to the policy.
  std::array<double, 2> normalized(double t_cap = 10.0, int p_cap = 10) const {
    return {t / t_cap, static_cast<double>(p) / p_cap};
  }
  bool operator==(const Observation&) const = default;
};

struct RewardBreakdown {
  double reward_base = 0.0;
  double penalty_stress = 0.0;
  double penalty_resource = 0.0;
  double heal_penalty_applied = 0.0;  // <= 0
  double total = 0.0;
};

struct StepInfo {
  int step_index = 0;  // 1-based within the episode
  Action action = Action::NoOp;
  int requested_target = 1;
  int applied_target = 1;
  int overshoot = 0;
  double response_time_s = 0.0;
  sim::RequestStatus probe_status = sim::RequestStatus::Ok200;
  int pod_count = 0;       // measured this step, unclamped
  int replica_target = 1;  // after recovery
  bool stress_ran = false;
  std::optional<sim::StressResult> stress;
  bool recovery_applied = false;
  bool healed = false;
  double virtual_time_s = 0.0;
};

struct StepResult {
  Observation observation;
  RewardBreakdown reward;
  StepInfo info;
  bool done = false;  // episode step limit reached
};

/// One deployment under the scaling policy. A stress test runs on every step
/// whose 1-based index is a multiple of stress_interval.
class ScalingEnv {
 public:
  explicit ScalingEnv(EnvConfig config);

  const EnvConfig& config() const { return config_; }

  Observation reset(std::uint64_t seed);
  StepResult step(Action action);
  StepResult step(int action);

  /// Normalized policy input for an observation.
  std::array<double, 2> state_vector(const Observation& o) const {
    return o.normalized(config_.t_cap, config_.p_cap);
  }

  bool done() const { return step_index_ >= config_.steps_per_episode; }
  int step_index() const { return step_index_; }
  int replica_target() const { return r_; }
  const sim::Cluster& cluster() const { return *cluster_; }
  sim::Cluster& cluster() { return *cluster_; }
  int heal_count() const { return heals_; }

 private:
  Observation observe(double t) const;
  void stabilize();
  bool heal_allowed() const;

  EnvConfig config_;
  std::optional<sim::Cluster> cluster_;
  Rng stress_rng_;
  int r_ = 1;
  int step_index_ = 0;
  int heals_ = 0;
};

}  // namespace fhescale::env
