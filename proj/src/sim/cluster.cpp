#include "fhescale/sim/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace fhescale::sim {

Duration from_seconds(double seconds) {
  return Duration{static_cast<Duration::rep>(std::llround(seconds * 1e6))};
}

double to_seconds(Duration d) { return static_cast<double>(d.count()) / 1e6; }

void SimConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string(name) + " must be positive");
  };
  auto probability = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument(std::string(name) + " must be in [0, 1]");
  };
  positive(base_service_s, "base_service_s");
  if (!(service_jitter_s >= 0.0) || service_jitter_s >= base_service_s)
    throw std::invalid_argument("service_jitter_s must be in [0, base_service_s)");
  positive(pod_startup_delay_s, "pod_startup_delay_s");
  positive(request_timeout_s, "request_timeout_s");
  probability(failure_probability, "failure_probability");
  probability(cache_hit_probability, "cache_hit_probability");
  positive(cache_hit_service_s, "cache_hit_service_s");
  positive(cooldown_window_s, "cooldown_window_s");
  if (max_replicas < 1) throw std::invalid_argument("max_replicas must be >= 1");
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::PodCreated: return "pod_created";
    case EventKind::PodReady: return "pod_ready";
    case EventKind::PodDraining: return "pod_draining";
    case EventKind::PodTerminated: return "pod_terminated";
    case EventKind::RequestSubmitted: return "request_submitted";
    case EventKind::RequestDispatched: return "request_dispatched";
    case EventKind::RequestCompleted: return "request_completed";
    case EventKind::RequestFailed: return "request_failed";
    case EventKind::RequestTimedOut: return "request_timed_out";
    case EventKind::DeploymentRestarted: return "deployment_restarted";
  }
  return "unknown";
}

Cluster::Cluster(SimConfig config, int initial_replicas)
    : config_(std::move(config)),
      startup_delay_(from_seconds(config_.pod_startup_delay_s)),
      timeout_(from_seconds(config_.request_timeout_s)),
      rng_(config_.seed) {
  config_.validate();
  replica_target_ = std::clamp(initial_replicas, 1, config_.max_replicas);
  for (int i = 0; i < replica_target_; ++i) create_pod();
}

int Cluster::pod_count() const {
  return static_cast<int>(std::count_if(pods_.begin(), pods_.end(), [](const Pod& p) {
    return p.phase != PodPhase::Terminated;
  }));
}

int Cluster::ready_count() const {
  return static_cast<int>(std::count_if(pods_.begin(), pods_.end(), [](const Pod& p) {
    return p.phase == PodPhase::Ready && !p.draining;
  }));
}

int Cluster::terminated_count() const {
  return static_cast<int>(pods_.size()) - pod_count();
}

void Cluster::record(EventKind kind, int pod_id, int request_id) {
  trace_.push_back({now_, kind, pod_id, request_id});
}

void Cluster::schedule(Duration time, Pending kind, int id) {
  events_.push({time, seq_++, kind, id});
}

Pod* Cluster::find_pod(int id) {
  auto it = std::find_if(pods_.begin(), pods_.end(), [id](const Pod& p) { return p.id == id; });
  return it == pods_.end() ? nullptr : &*it;
}

int Cluster::create_pod() {
  Pod pod;
  pod.id = next_pod_id_++;
  pod.ready_at = now_ + startup_delay_;
  pods_.push_back(pod);
  record(EventKind::PodCreated, pod.id);
  schedule(pod.ready_at, Pending::PodReady, pod.id);
  return pod.id;
}

void Cluster::terminate_pod(Pod& pod) {
  pod.phase = PodPhase::Terminated;
  pod.draining = false;
  pod.queue.clear();
  record(EventKind::PodTerminated, pod.id);
}

void Cluster::drain_pod(Pod& pod) {
  if (pod.queue.empty()) {
    terminate_pod(pod);
    return;
  }
  pod.draining = true;
  record(EventKind::PodDraining, pod.id);
}

std::vector<Pod*> Cluster::rotation() {
  std::vector<Pod*> out;
  for (auto& p : pods_)
    if (p.phase == PodPhase::Ready && !p.draining) out.push_back(&p);
  return out;
}

ScaleResult Cluster::set_replicas(int target) {
  ScaleResult result;
  result.requested = target;
  result.applied = std::clamp(target, 1, config_.max_replicas);
  result.overshoot = std::max(0, target - config_.max_replicas);
  replica_target_ = result.applied;

  std::vector<Pod*> live;
  for (auto& p : pods_)
    if (p.phase != PodPhase::Terminated && !p.draining) live.push_back(&p);
  int have = static_cast<int>(live.size());

  if (have < replica_target_) {
    // create_pod may reallocate pods_, so live is not used past this point.
    for (int i = have; i < replica_target_; ++i) create_pod();
  } else if (have > replica_target_) {
    // Starting pods go first, then the newest Ready ones.
    std::stable_sort(live.begin(), live.end(), [](const Pod* a, const Pod* b) {
      const bool sa = a->phase == PodPhase::Starting, sb = b->phase == PodPhase::Starting;
      if (sa != sb) return sa;
      return a->id > b->id;
    });
    for (int i = 0; i < have - replica_target_; ++i) drain_pod(*live[static_cast<std::size_t>(i)]);
  }
  return result;
}

Duration Cluster::draw_service_time() {
  double s = config_.base_service_s;
  if (config_.cache_hit_probability > 0.0 && bernoulli(rng_, config_.cache_hit_probability))
    s = config_.cache_hit_service_s;
  else if (config_.service_jitter_s > 0.0)
    s += uniform_real(rng_, -config_.service_jitter_s, config_.service_jitter_s);
  return std::max(Duration{1}, from_seconds(s));
}

void Cluster::dispatch(int request_id, Pod& pod) {
  Request& r = requests_[static_cast<std::size_t>(request_id)];
  const Duration service = draw_service_time();
  r.fails = config_.failure_probability > 0.0 && bernoulli(rng_, config_.failure_probability);
  if (forced_failures_ > 0) {
    r.fails = true;
    --forced_failures_;
  }
  r.dispatched = true;
  r.pod_id = pod.id;
  r.completes = std::max(now_, pod.busy_until) + service;
  pod.busy_until = r.completes;
  pod.queue.push_back(request_id);
  record(EventKind::RequestDispatched, pod.id, request_id);
  schedule(r.completes, Pending::RequestDone, request_id);
}

void Cluster::dispatch_waiting() {
  while (!waiting_.empty()) {
    auto ready = rotation();
    if (ready.empty()) return;
    const int id = waiting_.front();
    waiting_.pop_front();
    cursor_ %= ready.size();
    dispatch(id, *ready[cursor_]);
    cursor_ = (cursor_ + 1) % ready.size();
  }
}

int Cluster::submit() {
  const int id = static_cast<int>(requests_.size());
  Request r;
  r.submitted = now_;
  requests_.push_back(r);
  record(EventKind::RequestSubmitted, -1, id);
  schedule(now_ + timeout_, Pending::RequestDeadline, id);
  waiting_.push_back(id);
  return id;
}

void Cluster::resolve(Request& r, RequestStatus status, Duration response) {
  r.resolved = true;
  r.outcome.status = status;
  r.outcome.response_time = to_seconds(response);
  r.outcome.pod_id = r.pod_id;
}

void Cluster::process_next() {
  const Scheduled ev = events_.top();
  events_.pop();
  now_ = std::max(now_, ev.time);

  switch (ev.kind) {
    case Pending::PodReady: {
      Pod* pod = find_pod(ev.id);
      if (!pod || pod->phase != PodPhase::Starting) return;
      pod->phase = PodPhase::Ready;
      record(EventKind::PodReady, pod->id);
      if (pod->draining && pod->queue.empty()) terminate_pod(*pod);
      dispatch_waiting();
      return;
    }
    case Pending::RequestDone: {
      Request& r = requests_[static_cast<std::size_t>(ev.id)];
      if (r.lost) return;
      Pod* pod = find_pod(r.pod_id);
      if (pod && !pod->queue.empty() && pod->queue.front() == ev.id) pod->queue.pop_front();
      record(r.fails ? EventKind::RequestFailed : EventKind::RequestCompleted, r.pod_id, ev.id);
      if (!r.resolved)
        resolve(r, r.fails ? RequestStatus::Failure : RequestStatus::Ok200, r.completes - r.submitted);
      if (pod && pod->draining && pod->queue.empty()) terminate_pod(*pod);
      return;
    }
    case Pending::RequestDeadline: {
      Request& r = requests_[static_cast<std::size_t>(ev.id)];
      if (r.resolved) return;
      if (!r.dispatched) waiting_.erase(std::find(waiting_.begin(), waiting_.end(), ev.id));
      // A dispatched request keeps its pod busy after the client gives up.
      record(EventKind::RequestTimedOut, r.pod_id, ev.id);
      resolve(r, RequestStatus::Timeout, timeout_);
      return;
    }
  }
}

void Cluster::run_until(Duration limit) {
  while (!events_.empty() && events_.top().time <= limit) process_next();
  now_ = std::max(now_, limit);
}

void Cluster::advance(Duration duration) {
  if (duration.count() < 0) throw std::invalid_argument("advance: negative duration");
  run_until(now_ + duration);
}

void Cluster::wait_for(const std::vector<int>& request_ids) {
  auto pending = [&] {
    return std::any_of(request_ids.begin(), request_ids.end(), [&](int id) {
      return !requests_[static_cast<std::size_t>(id)].resolved;
    });
  };
  // Every request has a deadline event, so the queue cannot run dry first.
  while (pending()) process_next();
}

RequestOutcome Cluster::measure_response() {
  const int id = submit();
  dispatch_waiting();
  wait_for({id});
  return requests_[static_cast<std::size_t>(id)].outcome;
}

StressResult Cluster::run_burst(int n) {
  if (n < 1) throw std::invalid_argument("run_burst: n must be >= 1");
  std::vector<int> ids;
  ids.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ids.push_back(submit());
  dispatch_waiting();
  wait_for(ids);

  StressResult result;
  result.n_requests = n;
  int ok = 0;
  double total = 0.0;
  for (int id : ids) {
    const auto& o = requests_[static_cast<std::size_t>(id)].outcome;
    result.outcomes.push_back(o);
    ok += o.status == RequestStatus::Ok200;
    total += o.response_time;
  }
  result.success_rate = static_cast<double>(ok) / n;
  result.avg_response = total / n;
  return result;
}

StressResult Cluster::stress_test(Rng& rng) {
  return run_burst(static_cast<int>(uniform_int(rng, 5, 10)));
}

HealReport Cluster::self_heal() {
  HealReport report;
  report.time = now_seconds();
  report.terminated_removed = terminated_count();
  report.pods_restarted = pod_count();

  for (auto& p : pods_) {
    for (int id : p.queue) requests_[static_cast<std::size_t>(id)].lost = true;
    if (p.phase != PodPhase::Terminated) record(EventKind::PodTerminated, p.id);
  }
  pods_.clear();
  cursor_ = 0;
  record(EventKind::DeploymentRestarted, -1);
  for (int i = 0; i < replica_target_; ++i) create_pod();
  last_heal_ = report.time;
  return report;
}

void Cluster::write_trace(std::ostream& out) const {
  for (const auto& e : trace_)
    out << fmt::format("{:.6f} {} {}\n", to_seconds(e.time), to_string(e.kind), e.pod_id);
}

}  // namespace fhescale::sim
