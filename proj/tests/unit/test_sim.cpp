#include <doctest.h>

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "fhescale/sim/cluster.hpp"

using namespace fhescale;
using namespace fhescale::sim;

namespace {

SimConfig deterministic(double service = 0.8) {
  SimConfig c;
  c.base_service_s = service;
  c.service_jitter_s = 0.0;
  c.failure_probability = 0.0;
  return c;
}

Cluster ready_cluster(const SimConfig& c, int replicas) {
  Cluster cl(c, replicas);
  cl.advance(c.pod_startup_delay_s);
  return cl;
}

}  // namespace

TEST_CASE("config validation") {
  SimConfig c;
  CHECK_NOTHROW(c.validate());
  c.failure_probability = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SimConfig{};
  c.request_timeout_s = 0.0;
  CHECK_THROWS_AS(Cluster{c}, std::invalid_argument);
  c = SimConfig{};
  c.max_replicas = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("new cluster starts pods after the startup delay") {
  Cluster cl(SimConfig{});
  CHECK(cl.now().count() == 0);
  CHECK(cl.pod_count() == 1);
  CHECK(cl.ready_count() == 0);
  cl.advance(1.999999);
  CHECK(cl.ready_count() == 0);
  cl.advance(0.000001);
  CHECK(cl.ready_count() == 1);

  Cluster three(SimConfig{}, 3);
  three.advance(10.0);
  CHECK(three.ready_count() == 3);
}

TEST_CASE("set_replicas clamps and reports overshoot") {
  Cluster cl(SimConfig{});
  auto r = cl.set_replicas(0);
  CHECK(r.applied == 1);
  CHECK(r.overshoot == 0);
  r = cl.set_replicas(103);
  CHECK(r.applied == 100);
  CHECK(r.overshoot == 3);
  CHECK(cl.pod_count() == 100);
  CHECK(cl.replica_target() == 100);
  r = cl.set_replicas(-4);
  CHECK(r.applied == 1);
  CHECK(cl.pod_count() <= 100);
}

TEST_CASE("scale up converges, scale down drains") {
  auto c = deterministic();
  Cluster cl = ready_cluster(c, 1);
  cl.set_replicas(5);
  CHECK(cl.pod_count() == 5);  // Starting pods count
  CHECK(cl.ready_count() == 1);
  cl.advance(c.pod_startup_delay_s);
  CHECK(cl.ready_count() == 5);

  cl.set_replicas(2);
  cl.advance(0.0);
  CHECK(cl.pod_count() == 2);
  CHECK(cl.terminated_count() == 3);
}

TEST_CASE("draining pod finishes its in-flight work first") {
  // Two pods, service 6 s, four requests: the second request on each pod
  // times out at 10 s while the pods stay busy until 12 s.
  Cluster cl = ready_cluster(deterministic(6.0), 2);
  auto r = cl.run_burst(4);
  CHECK(r.success_rate == doctest::Approx(0.5));
  CHECK(cl.now_seconds() == doctest::Approx(12.0));  // 2 s startup + 10 s timeout

  cl.set_replicas(1);
  CHECK(cl.pod_count() == 2);
  CHECK(cl.ready_count() == 1);
  cl.advance(2.0);
  CHECK(cl.pod_count() == 1);
  CHECK(cl.terminated_count() == 1);
}

TEST_CASE("measure_response on an idle pod is the service time") {
  Cluster cl = ready_cluster(deterministic(), 1);
  const double t0 = cl.now_seconds();
  auto o = cl.measure_response();
  CHECK(o.status == RequestStatus::Ok200);
  CHECK(o.response_time == 0.8);
  CHECK(cl.now_seconds() == doctest::Approx(t0 + 0.8));
}

TEST_CASE("no ready pod for the whole window times out at 10 s") {
  auto c = deterministic();
  c.pod_startup_delay_s = 60.0;
  Cluster cl(c);
  auto o = cl.measure_response();
  CHECK(o.status == RequestStatus::Timeout);
  CHECK(o.response_time == 10.0);
  CHECK(o.pod_id == -1);
  CHECK(cl.now_seconds() == 10.0);
}

TEST_CASE("waiting request is served once a pod becomes ready") {
  Cluster cl(deterministic());  // pod ready at 2 s
  auto o = cl.measure_response();
  CHECK(o.status == RequestStatus::Ok200);
  CHECK(o.response_time == doctest::Approx(2.8));
}

TEST_CASE("back-to-back probes on one slow pod") {
  Cluster cl = ready_cluster(deterministic(6.0), 1);
  auto a = cl.measure_response();
  auto b = cl.measure_response();
  CHECK(a.response_time == 6.0);
  CHECK((b.response_time >= 6.0 || b.status == RequestStatus::Timeout));
}

TEST_CASE("single-server queue with timeouts") {
  // Completions at 3, 6, 9, 12, 15; the last two exceed the 10 s timeout.
  Cluster cl = ready_cluster(deterministic(3.0), 1);
  auto r = cl.run_burst(5);
  REQUIRE(r.outcomes.size() == 5);
  CHECK(r.outcomes[0].response_time == 3.0);
  CHECK(r.outcomes[1].response_time == 6.0);
  CHECK(r.outcomes[2].response_time == 9.0);
  CHECK(r.outcomes[3].status == RequestStatus::Timeout);
  CHECK(r.outcomes[4].status == RequestStatus::Timeout);
  CHECK(r.outcomes[4].response_time == 10.0);
  CHECK(r.success_rate == doctest::Approx(0.6));
  CHECK(r.avg_response == doctest::Approx(7.6));
}

TEST_CASE("one request per pod when pods equal requests") {
  Cluster cl = ready_cluster(deterministic(), 10);
  auto r = cl.run_burst(10);
  CHECK(r.success_rate == 1.0);
  CHECK(r.avg_response == doctest::Approx(0.8));
}

TEST_CASE("round-robin fairness") {
  for (int p = 1; p <= 10; ++p) {
    for (int n = 5; n <= 10; ++n) {
      Cluster cl = ready_cluster(deterministic(), p);
      auto r = cl.run_burst(n);
      std::vector<int> per_pod(static_cast<std::size_t>(p), 0);
      for (const auto& o : r.outcomes) {
        REQUIRE(o.pod_id >= 0);
        REQUIRE(o.pod_id < p);
        ++per_pod[static_cast<std::size_t>(o.pod_id)];
      }
      const int lo = n / p, hi = (n + p - 1) / p;
      for (int k : per_pod) {
        CHECK(k >= lo);
        CHECK(k <= hi);
      }
    }
  }
}

TEST_CASE("stress burst size stays in [5, 10]") {
  Rng rng(99);
  std::vector<int> seen(11, 0);
  for (int i = 0; i < 10000; ++i) {
    const auto n = uniform_int(rng, 5, 10);
    REQUIRE(n >= 5);
    REQUIRE(n <= 10);
    ++seen[static_cast<std::size_t>(n)];
  }
  for (int n = 5; n <= 10; ++n) CHECK(seen[static_cast<std::size_t>(n)] > 0);

  Cluster cl = ready_cluster(SimConfig{}, 3);
  Rng stress(5);
  for (int i = 0; i < 50; ++i) {
    auto r = cl.stress_test(stress);
    CHECK(r.n_requests >= 5);
    CHECK(r.n_requests <= 10);
    CHECK(r.success_rate >= 0.0);
    CHECK(r.success_rate <= 1.0);
  }
}

TEST_CASE("failures count against success rate") {
  auto c = deterministic();
  c.failure_probability = 1.0;
  Cluster cl = ready_cluster(c, 2);
  auto r = cl.run_burst(4);
  CHECK(r.success_rate == 0.0);
  for (const auto& o : r.outcomes) CHECK(o.status == RequestStatus::Failure);
}

TEST_CASE("cache hits shorten service") {
  auto c = deterministic();
  c.cache_hit_probability = 1.0;
  c.cache_hit_service_s = 0.05;
  Cluster cl = ready_cluster(c, 1);
  CHECK(cl.measure_response().response_time == doctest::Approx(0.05));
}

TEST_CASE("self_heal collects terminated pods and keeps the target") {
  Cluster cl = ready_cluster(deterministic(), 5);
  cl.set_replicas(3);
  cl.advance(0.0);
  CHECK(cl.terminated_count() == 2);
  CHECK(cl.ready_count() == 3);

  auto rep = cl.self_heal();
  CHECK(rep.terminated_removed == 2);
  CHECK(rep.pods_restarted == 3);
  CHECK(cl.terminated_count() == 0);
  CHECK(cl.replica_target() == 3);
  CHECK(cl.pod_count() == 3);
  CHECK(cl.ready_count() == 0);
  REQUIRE(cl.last_heal_time().has_value());
  CHECK(*cl.last_heal_time() == cl.now_seconds());
  cl.advance(2.0);
  CHECK(cl.ready_count() == 3);
}

TEST_CASE("heal drops in-flight work") {
  Cluster cl = ready_cluster(deterministic(6.0), 1);
  auto r = cl.run_burst(2);  // second request abandoned at 10 s, pod busy to 14 s
  CHECK(r.outcomes[1].status == RequestStatus::Timeout);
  cl.self_heal();
  auto o = cl.measure_response();
  CHECK(o.status == RequestStatus::Ok200);
  CHECK(o.response_time == doctest::Approx(8.0));  // 2 s restart + 6 s service
  const auto completions = std::count_if(cl.trace().begin(), cl.trace().end(), [](const TraceEvent& e) {
    return e.kind == EventKind::RequestCompleted;
  });
  CHECK(completions == 2);
}

TEST_CASE("advance(0) changes nothing") {
  Cluster cl = ready_cluster(SimConfig{}, 2);
  const auto trace = cl.trace();
  const auto now = cl.now();
  cl.advance(0.0);
  CHECK(cl.trace() == trace);
  CHECK(cl.now() == now);
  CHECK_THROWS_AS(cl.advance(-1.0), std::invalid_argument);
}

TEST_CASE("advance is independent of call granularity") {
  Rng fuzz(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint64_t seed = fuzz();
    const int target = static_cast<int>(uniform_int(fuzz, 1, 8));
    const Duration a{uniform_int(fuzz, 0, 5'000'000)};
    const Duration b{uniform_int(fuzz, 0, 5'000'000)};

    SimConfig c;
    c.seed = seed;
    Cluster x(c), y(c);
    for (Cluster* cl : {&x, &y}) {
      cl->advance(2.5);
      cl->set_replicas(target);
      Rng s(seed);
      cl->stress_test(s);
      cl->set_replicas(std::max(1, target - 2));
    }
    x.advance(a + b);
    y.advance(a);
    y.advance(b);
    REQUIRE(x.now() == y.now());
    REQUIRE(x.trace() == y.trace());
    CHECK(x.pod_count() == y.pod_count());
    CHECK(x.ready_count() == y.ready_count());
  }
}

TEST_CASE("virtual time is monotone and the run is deterministic") {
  auto run = [](std::uint64_t seed) {
    SimConfig c;
    c.seed = seed;
    Cluster cl(c);
    Rng stress(seed + 1);
    Duration last{0};
    for (int step = 0; step < 40; ++step) {
      cl.set_replicas(1 + step % 6);
      cl.advance(2.5);
      cl.measure_response();
      if (step % 5 == 4) cl.stress_test(stress);
      if (step % 13 == 12) cl.self_heal();
      REQUIRE(cl.now() >= last);
      last = cl.now();
    }
    for (std::size_t i = 1; i < cl.trace().size(); ++i)
      REQUIRE(cl.trace()[i].time >= cl.trace()[i - 1].time);
    std::ostringstream out;
    cl.write_trace(out);
    return out.str();
  };
  const auto a = run(7), b = run(7), c = run(8);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(a.find("pod_ready") != std::string::npos);
}
