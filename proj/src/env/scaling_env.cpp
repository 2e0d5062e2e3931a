#include "fhescale/env/scaling_env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fhescale::env {

void EnvConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
  if (stress_interval < 1) fail("stress_interval must be >= 1");
  if (soft_pod_threshold < 1) fail("soft_pod_threshold must be >= 1");
  if (soft_pod_threshold > max_pods()) fail("soft_pod_threshold must not exceed max_replicas");
  if (pod_cost < 0.0) fail("pod_cost must be >= 0");
  if (stress_fail_weight < 0.0) fail("stress_fail_weight must be >= 0");
  if (stress_latency_weight < 0.0) fail("stress_latency_weight must be >= 0");
  if (!(latency_threshold_s >= 0.0)) fail("latency_threshold_s must be >= 0");
  if (heal_penalty > 0.0) fail("heal_penalty must be <= 0");
  if (!(t_cap > 0.0)) fail("t_cap must be positive");
  if (p_cap < 1) fail("p_cap must be >= 1");
  if (steps_per_episode < 1) fail("steps_per_episode must be >= 1");
  if (recovery_cap < 1) fail("recovery_cap must be >= 1");
  if (!(settle_margin_s >= 0.0)) fail("settle_margin_s must be >= 0");
  if (initial_replicas < 1) fail("initial_replicas must be >= 1");
  cluster.validate();
}

double reward_base(double t, int pod_count, double pod_cost) { return -t - pod_cost * pod_count; }

double penalty_resource(int current, int threshold) {
  return current <= threshold ? 0.0 : 2.0 * (current - threshold);
}

double penalty_stress(double success_rate, double avg_response, double fail_weight,
                      double latency_weight, double latency_threshold) {
  return fail_weight * (1.0 - success_rate) +
         latency_weight * std::max(0.0, avg_response - latency_threshold);
}

int recovery_target(int r, double stress_penalty, int cap) {
  const int bump = std::max(1, static_cast<int>(std::floor(stress_penalty / 2.0)));
  return std::min(r + bump, cap);
}

ScalingEnv::ScalingEnv(EnvConfig config) : config_(std::move(config)) {
  config_.validate();
  reset(config_.cluster.seed);
}

Observation ScalingEnv::observe(double t) const {
  return {std::clamp(t, 0.0, config_.t_cap), std::clamp(cluster_->pod_count(), 1, config_.p_cap)};
}

void ScalingEnv::stabilize() {
  cluster_->advance(config_.cluster.pod_startup_delay_s + config_.settle_margin_s);
}

bool ScalingEnv::heal_allowed() const {
  const auto last = cluster_->last_heal_time();
  return !last || cluster_->now_seconds() - *last >= config_.cluster.cooldown_window_s;
}

Observation ScalingEnv::reset(std::uint64_t seed) {
  sim::SimConfig sc = config_.cluster;
  sc.seed = mix_seed(seed, 1);
  stress_rng_.seed(mix_seed(seed, 2));
  r_ = std::clamp(config_.initial_replicas, 1, config_.max_pods());
  cluster_.emplace(sc, r_);
  step_index_ = 0;
  heals_ = 0;
  stabilize();
  return observe(cluster_->measure_response().response_time);
}

StepResult ScalingEnv::step(int action) {
  if (action < 0 || action >= kActionCount)
    throw std::invalid_argument("action must be 0, 1 or 2");
  return step(static_cast<Action>(action));
}

StepResult ScalingEnv::step(Action action) {
  if (done()) throw std::logic_error("step after episode end; call reset");
  StepResult out;
  StepInfo& info = out.info;
  RewardBreakdown& rw = out.reward;

  info.step_index = ++step_index_;
  info.action = action;
  info.requested_target = r_ + static_cast<int>(action) - 1;
  const auto scale = cluster_->set_replicas(info.requested_target);
  r_ = scale.applied;
  info.applied_target = scale.applied;
  info.overshoot = scale.overshoot;

  stabilize();
  const auto probe = cluster_->measure_response();
  info.response_time_s = probe.response_time;
  info.probe_status = probe.status;
  info.pod_count = cluster_->pod_count();
  rw.reward_base = reward_base(probe.response_time, info.pod_count, config_.pod_cost);

  if (step_index_ % config_.stress_interval == 0) {
    info.stress_ran = true;
    info.stress = cluster_->stress_test(stress_rng_);
    rw.penalty_stress =
        penalty_stress(info.stress->success_rate, info.stress->avg_response, config_.stress_fail_weight,
                       config_.stress_latency_weight, config_.latency_threshold_s);
  }

  rw.penalty_resource = penalty_resource(info.pod_count, config_.soft_pod_threshold) +
                        penalty_resource(info.requested_target, config_.max_pods());

  if (rw.penalty_stress > 0.0) {
    r_ = recovery_target(r_, rw.penalty_stress, config_.recovery_cap);
    r_ = cluster_->set_replicas(r_).applied;
    info.recovery_applied = true;
  }

  if (probe.status != sim::RequestStatus::Ok200) {
    bool still_failing = true;
    if (heal_allowed()) {
      cluster_->self_heal();
      ++heals_;
      info.healed = true;
      stabilize();
      still_failing = cluster_->measure_response().status != sim::RequestStatus::Ok200;
    }
    if (still_failing) rw.heal_penalty_applied = config_.heal_penalty;
  }

  rw.total = rw.reward_base - rw.penalty_stress - rw.penalty_resource + rw.heal_penalty_applied;
  info.replica_target = r_;
  info.virtual_time_s = cluster_->now_seconds();
  out.observation = observe(probe.response_time);
  out.done = done();
  return out;
}

}  // namespace fhescale::env
