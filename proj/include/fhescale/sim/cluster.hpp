#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <queue>
#include <string_view>
#include <vector>

#include "fhescale/common/random.hpp"

namespace fhescale::sim {

/// Virtual time, integral microseconds since cluster creation.
using Duration = std::chrono::microseconds;

Duration from_seconds(double seconds);
double to_seconds(Duration d);

struct SimConfig {
  double base_service_s = 0.8;
  double service_jitter_s = 0.1;  // uniform in [-jitter, +jitter]
  double pod_startup_delay_s = 2.0;
  double request_timeout_s = 10.0;
  double failure_probability = 0.02;
  double cache_hit_probability = 0.0;
  double cache_hit_service_s = 0.05;
  int max_replicas = 100;
  double cooldown_window_s = 30.0;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
};

enum class PodPhase { Starting, Ready, Terminated };

struct Pod {
  int id = 0;
  PodPhase phase = PodPhase::Starting;
  bool draining = false;  // out of rotation, finishing its queue
  Duration ready_at{0};
  Duration busy_until{0};
  std::deque<int> queue;  // request ids, FIFO
};

enum class RequestStatus { Ok200, Failure, Timeout };

struct RequestOutcome {
  RequestStatus status = RequestStatus::Ok200;
  double response_time = 0.0;  // seconds; equals the timeout for Timeout
  int pod_id = -1;             // -1 when never dispatched
};

struct StressResult {
  double success_rate = 1.0;
  double avg_response = 0.0;
  int n_requests = 0;
  std::vector<RequestOutcome> outcomes;
};

struct ScaleResult {
  int requested = 0;
  int applied = 0;
  int overshoot = 0;  // requested - max_replicas when above the cap
};

struct HealReport {
  double time = 0.0;
  int pods_restarted = 0;
  int terminated_removed = 0;
};

enum class EventKind {
  PodCreated,
  PodReady,
  PodDraining,
  PodTerminated,
  RequestSubmitted,
  RequestDispatched,
  RequestCompleted,
  RequestFailed,
  RequestTimedOut,
  DeploymentRestarted,
};

std::string_view to_string(EventKind kind);

struct TraceEvent {
  Duration time{0};
  EventKind kind = EventKind::PodCreated;
  int pod_id = -1;
  int request_id = -1;

  bool operator==(const TraceEvent&) const = default;
};

/// Deterministic discrete-event model of one deployment: pods behind a
/// round-robin balancer, each serving its queue FIFO. Requests that find no
/// ready pod wait at the balancer until one becomes ready or the client
/// timeout fires. Single-threaded; independent instances share nothing.
class Cluster {
 public:
  explicit Cluster(SimConfig config, int initial_replicas = 1);

  const SimConfig& config() const { return config_; }
  Duration now() const { return now_; }
  double now_seconds() const { return to_seconds(now_); }
  int replica_target() const { return replica_target_; }
  const std::vector<Pod>& pods() const { return pods_; }

  /// Pods not Terminated (Starting, Ready, or draining).
  int pod_count() const;
  int ready_count() const;
  int terminated_count() const;

  /// Clamps to [1, max_replicas]; surplus pods drain then terminate, missing
  /// pods start after the startup delay.
  ScaleResult set_replicas(int target);

  /// Processes every event up to now + duration.
  void advance(Duration duration);
  void advance(double seconds) { advance(from_seconds(seconds)); }

  /// One probe request; returns once it completed or timed out.
  RequestOutcome measure_response();

  /// n simultaneous requests dispatched in creation order.
  StressResult run_burst(int n);
  /// Burst of uniform size in [5, 10] drawn from `rng`.
  StressResult stress_test(Rng& rng);

  /// Restarts every pod (fresh pods in Starting), drops in-flight work and
  /// garbage-collects Terminated pods. Keeps the replica target.
  HealReport self_heal();
  std::optional<double> last_heal_time() const { return last_heal_; }

  /// The next n dispatched requests fail regardless of failure_probability.
  void inject_failures(int n) { forced_failures_ += n; }

  const std::vector<TraceEvent>& trace() const { return trace_; }
  void write_trace(std::ostream& out) const;

 private:
  enum class Pending { PodReady, RequestDone, RequestDeadline };
  struct Scheduled {
    Duration time;
    std::uint64_t seq;
    Pending kind;
    int id;  // pod or request id
    bool operator>(const Scheduled& o) const {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };
  struct Request {
    Duration submitted{0};
    Duration completes{0};
    int pod_id = -1;
    bool dispatched = false;
    bool fails = false;
    bool lost = false;  // its pod was restarted
    bool resolved = false;
    RequestOutcome outcome;
  };

  void schedule(Duration time, Pending kind, int id);
  void process_next();
  void run_until(Duration limit);
  void record(EventKind kind, int pod_id, int request_id = -1);

  Pod* find_pod(int id);
  int create_pod();
  void drain_pod(Pod& pod);
  void terminate_pod(Pod& pod);
  std::vector<Pod*> rotation();

  int submit();
  void dispatch(int request_id, Pod& pod);
  void dispatch_waiting();
  Duration draw_service_time();
  void resolve(Request& r, RequestStatus status, Duration response);
  void wait_for(const std::vector<int>& request_ids);

  SimConfig config_;
  Duration now_{0};
  Duration startup_delay_;
  Duration timeout_;
  int replica_target_ = 1;
  int next_pod_id_ = 0;
  std::size_t cursor_ = 0;
  std::uint64_t seq_ = 0;
  Rng rng_;
  std::vector<Pod> pods_;
  std::vector<Request> requests_;
  std::deque<int> waiting_;  // submitted, not yet dispatched
  std::priority_queue<Scheduled, std::vector<Scheduled>, std::greater<>> events_;
  std::vector<TraceEvent> trace_;
  std::optional<double> last_heal_;
  int forced_failures_ = 0;
};

}  // namespace fhescale::sim
