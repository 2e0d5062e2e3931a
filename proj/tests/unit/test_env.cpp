#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fhescale/env/scaling_env.hpp"

using namespace fhescale;
using namespace fhescale::env;

namespace {

EnvConfig quiet_config() {
  EnvConfig c;
  c.cluster.service_jitter_s = 0.0;
  c.cluster.failure_probability = 0.0;
  return c;
}

}  // namespace

TEST_CASE("reward_base") {
  CHECK(reward_base(1.0, 3) == doctest::Approx(-1.3).epsilon(1e-12));
  CHECK(reward_base(0.0, 0) == 0.0);
  CHECK(reward_base(2.5, 10) == doctest::Approx(-3.5).epsilon(1e-12));
  // Strictly decreasing in pod count at fixed t.
  for (int p = 0; p < 20; ++p) CHECK(reward_base(1.7, p + 1) < reward_base(1.7, p));
}

TEST_CASE("penalty_resource") {
  CHECK(penalty_resource(100, 100) == 0.0);
  CHECK(penalty_resource(103, 100) == 6.0);
  CHECK(penalty_resource(6, 5) == 2.0);
  CHECK(penalty_resource(0, 5) == 0.0);
}

TEST_CASE("penalty_stress") {
  CHECK(penalty_stress(1.0, 1.5) == 0.0);
  CHECK(std::abs(penalty_stress(0.5, 3.0) - 4.5) <= 1e-12);
  CHECK(std::abs(penalty_stress(0.0, 2.0) - 5.0) <= 1e-12);
  CHECK(std::abs(penalty_stress(0.6, 9.0) - 16.0) <= 1e-12);
}

TEST_CASE("recovery rule") {
  CHECK(recovery_target(1, 16.0) == 9);
  CHECK(recovery_target(3, 16.0) == 10);
  CHECK(recovery_target(2, 0.3) == 3);  // at least one replica
  CHECK(recovery_target(2, 4.5) == 4);  // floor(2.25)
  CHECK(recovery_target(10, 50.0) == 10);
  CHECK(recovery_target(14, 1.0) == 10);  // applied literally
}

TEST_CASE("config validation") {
  EnvConfig c;
  CHECK_NOTHROW(c.validate());
  c.stress_interval = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = EnvConfig{};
  c.soft_pod_threshold = 200;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = EnvConfig{};
  c.heal_penalty = 1.0;
  CHECK_THROWS_AS(ScalingEnv{c}, std::invalid_argument);
}

TEST_CASE("reset gives one stable pod and is deterministic") {
  ScalingEnv env(EnvConfig{});
  const auto a = env.reset(11);
  CHECK(a.p == 1);
  CHECK(env.step_index() == 0);
  CHECK(env.replica_target() == 1);
  const auto b = env.reset(11);
  CHECK(a == b);
}

TEST_CASE("no-op step on a stable pod") {
  ScalingEnv env(quiet_config());
  env.reset(1);
  const auto s = env.step(Action::NoOp);
  CHECK(s.info.step_index == 1);
  CHECK_FALSE(s.info.stress_ran);
  CHECK(s.info.response_time_s == 0.8);
  CHECK(s.info.pod_count == 1);
  CHECK(std::abs(s.reward.total - (-0.9)) <= 1e-9);
  CHECK(s.observation.p == 1);
  CHECK(s.observation.t == 0.8);
}

TEST_CASE("scaling actions move the target by one and clamp at 1") {
  ScalingEnv env(quiet_config());
  env.reset(2);
  auto s = env.step(Action::ScaleDown);
  CHECK(s.info.requested_target == 0);
  CHECK(s.info.applied_target == 1);
  s = env.step(Action::ScaleUp);
  CHECK(s.info.applied_target == 2);
  CHECK(s.info.pod_count == 2);
  CHECK_THROWS_AS(env.step(3), std::invalid_argument);
}

TEST_CASE("hard cap penalty on the requested target") {
  auto c = quiet_config();
  c.cluster.max_replicas = 6;
  c.soft_pod_threshold = 6;
  c.initial_replicas = 6;
  ScalingEnv env(c);
  env.reset(3);
  const auto s = env.step(Action::ScaleUp);
  CHECK(s.info.requested_target == 7);
  CHECK(s.info.applied_target == 6);
  CHECK(s.info.overshoot == 1);
  CHECK(s.reward.penalty_resource == 2.0);
}

TEST_CASE("stress cadence and recovery") {
  auto c = quiet_config();
  c.cluster.base_service_s = 3.0;
  c.steps_per_episode = 30;
  c.stress_interval = 3;
  ScalingEnv env(c);
  env.reset(4);
  for (int i = 1; i <= 30; ++i) {
    const int before = env.replica_target();
    const auto s = env.step(Action::ScaleDown);
    CHECK(s.info.stress_ran == (i % 3 == 0));
    if (!s.info.stress_ran) CHECK(s.reward.penalty_stress == 0.0);
    if (s.reward.penalty_stress > 0.0) {
      CHECK(s.info.recovery_applied);
      const int applied = std::max(1, before - 1);
      CHECK(s.info.replica_target == recovery_target(applied, s.reward.penalty_stress));
    }
    CHECK(env.replica_target() <= 10);
  }
  CHECK(env.done());
  CHECK_THROWS_AS(env.step(Action::NoOp), std::logic_error);
}

TEST_CASE("heal once per cooldown window, -10 on a repeat failure") {
  ScalingEnv env(quiet_config());
  env.reset(5);

  env.cluster().inject_failures(1);
  auto s = env.step(Action::NoOp);
  CHECK(s.info.probe_status == sim::RequestStatus::Failure);
  CHECK(s.info.healed);
  CHECK(s.reward.heal_penalty_applied == 0.0);  // re-probe after heal succeeded

  env.cluster().inject_failures(1);
  s = env.step(Action::NoOp);
  CHECK_FALSE(s.info.healed);
  CHECK(s.reward.heal_penalty_applied == -10.0);
  CHECK(env.heal_count() == 1);
}

TEST_CASE("persistent failure heals and still pays -10") {
  ScalingEnv env(quiet_config());
  env.reset(6);
  env.cluster().inject_failures(2);
  const auto s = env.step(Action::NoOp);
  CHECK(s.info.healed);
  CHECK(s.reward.heal_penalty_applied == -10.0);
}

TEST_CASE("heals are spaced by at least the cooldown window") {
  auto c = quiet_config();
  c.cluster.failure_probability = 1.0;
  c.steps_per_episode = 60;
  ScalingEnv env(c);
  env.reset(7);
  double last_heal = -1e9;
  int heals = 0;
  for (int i = 0; i < 60; ++i) {
    const double before = env.cluster().now_seconds();
    const auto s = env.step(Action::NoOp);
    CHECK(s.reward.heal_penalty_applied == -10.0);
    if (s.info.healed) {
      const double t = *env.cluster().last_heal_time();
      CHECK(t >= before);
      CHECK(t - last_heal >= 30.0);
      last_heal = t;
      ++heals;
    }
  }
  CHECK(heals >= 2);
  CHECK(heals == env.heal_count());
}

TEST_CASE("observation bounds and reward identity over random play") {
  EnvConfig c;
  c.steps_per_episode = 200;
  c.cluster.failure_probability = 0.1;
  ScalingEnv env(c);
  env.reset(8);
  Rng rng(8);
  while (!env.done()) {
    const auto s = env.step(static_cast<int>(uniform_int(rng, 0, 2)));
    CHECK(s.observation.t >= 0.0);
    CHECK(s.observation.t <= 10.0);
    CHECK(s.observation.p >= 1);
    CHECK(s.observation.p <= 10);
    CHECK(s.reward.heal_penalty_applied <= 0.0);
    const auto& r = s.reward;
    CHECK(r.total == r.reward_base - r.penalty_stress - r.penalty_resource + r.heal_penalty_applied);
  }
}

TEST_CASE("observation clamps p while the deployment grows past 10") {
  auto c = quiet_config();
  c.steps_per_episode = 15;
  ScalingEnv env(c);
  env.reset(9);
  StepResult s;
  for (int i = 0; i < 15; ++i) s = env.step(Action::ScaleUp);
  CHECK(s.info.pod_count > 10);
  CHECK(s.observation.p == 10);
}
