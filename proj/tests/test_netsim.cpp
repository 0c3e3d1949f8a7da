#include <doctest.h>

#include <sstream>

#include "qkdnet/netsim.hpp"

using namespace qkdnet;

namespace {

Frame fresh(double t_f, double t_g) {
  Frame f;
  f.t_f = t_f;
  f.t_g = t_g;
  return f;
}

NetworkTopology line_network() {
  // A - R1 - R2 - B
  std::vector<NodeSpec> nodes = {{"R1", NodeKind::Router, {}}, {"R2", NodeKind::Router, {}},
                                 {"A", NodeKind::Sender, "R1"}, {"B", NodeKind::Receiver, "R2"}};
  std::vector<LinkSpec> links = {{"A", "R1", 5, 0.2}, {"R1", "R2", 20, 0.2}, {"B", "R2", 5, 0.2}};
  return NetworkTopology(nodes, links);
}

}  // namespace

TEST_CASE("no storage spends guard time and payload together") {
  Frame f = fresh(2e-3, 8e-4);
  CHECK(apply_router_delay(f, 1e-4, RoutingProtocol::no_storage()) == 0.0);
  CHECK(f.t_f == doctest::Approx(1.9e-3));
  CHECK(f.t_g == doctest::Approx(7e-4));
  CHECK(f.status == FrameStatus::InTransit);

  Frame g = fresh(2e-4, 0);
  apply_router_delay(g, 2e-4, RoutingProtocol::no_storage());
  CHECK(g.status == FrameStatus::Discarded);
  CHECK(g.reason == DiscardReason::ZeroLength);
}

TEST_CASE("unlimited storage uses the guard before the delay line") {
  Frame f = fresh(2e-3, 5e-5);
  const double ts = apply_router_delay(f, 1.5e-4, RoutingProtocol::storage_unlimited());
  CHECK(ts == doctest::Approx(1e-4));
  CHECK(f.t_f == doctest::Approx(1.95e-3));
  CHECK(f.t_g == 0.0);
  CHECK(f.cum_storage == doctest::Approx(1e-4));
  CHECK(f.payload() == doctest::Approx(1.95e-3));
}

TEST_CASE("limited storage discards only on strict exceedance") {
  Frame f = fresh(2e-3, 0);
  apply_router_delay(f, 3e-4, RoutingProtocol::storage_limited(3e-4));
  CHECK(f.status == FrameStatus::InTransit);
  apply_router_delay(f, 1e-6, RoutingProtocol::storage_limited(3e-4));
  CHECK(f.status == FrameStatus::Discarded);
  CHECK(f.reason == DiscardReason::StorageLimit);
}

TEST_CASE("negative delay is rejected") {
  Frame f = fresh(1e-3, 0);
  CHECK_THROWS_AS(apply_router_delay(f, -1e-9, RoutingProtocol::no_storage()), NegativeDelay);
}

TEST_CASE("delivered pulses floor the payload") {
  Frame f = fresh(1.5e-6 + 1e-12, 0);
  f.status = FrameStatus::Arrived;
  CHECK(delivered_pulses(f, 1e9) == 1500);
  f.status = FrameStatus::Discarded;
  CHECK_THROWS_AS(delivered_pulses(f, 1e9), NotDelivered);
}

TEST_CASE("uncongested line delivers every frame with two header delays") {
  const auto topo = line_network();
  SimConfig c;
  c.protocol = RoutingProtocol::no_storage();
  c.frames_per_sender = 50;
  c.mean_interarrival = 1.0;  // far apart: no queueing
  const SimRecord r = run(c, topo);
  CHECK(r.generated == 50);
  CHECK(r.delivered == 50);
  for (const auto& f : r.frames) {
    REQUIRE(f.hops.size() == 2);
    CHECK(f.hops[0].d_queue == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(f.t_f == doctest::Approx(2e-3 - 2e-4));
    // transmissions, fiber, and three header stages (two routers, receiver)
    const double expected = 2e-3 + 1.9e-3 + 1.8e-3 + 30.0 / 2e5 + 3e-4;
    CHECK(f.resolved_at - f.created_at == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("identical seeds give identical records") {
  const auto topo = build_default_topology();
  SimConfig c;
  c.protocol = RoutingProtocol::storage_unlimited();
  c.frames_per_sender = 200;
  c.mean_interarrival = 3e-3;
  c.initial_frame_length = 2e-4;
  c.seed = 77;
  const SimRecord a = run(c, topo);
  const SimRecord b = run(c, topo);
  CHECK(a == b);
  c.seed = 78;
  CHECK_FALSE(run(c, topo) == a);
}

TEST_CASE("every generated frame is resolved and tallied") {
  const auto topo = build_default_topology();
  SimConfig c;
  c.protocol = RoutingProtocol::storage_limited(1.5e-4);
  c.frames_per_sender = 300;
  c.mean_interarrival = 3e-3;
  c.initial_frame_length = 2e-4;
  const SimRecord r = run(c, topo);
  CHECK(r.in_transit == 0);
  CHECK(r.generated == 8 * 300);
  CHECK(r.delivered + r.discarded == r.generated);
  std::uint64_t gen = 0, del = 0;
  for (const auto& [key, t] : r.pairs) {
    gen += t.generated;
    del += t.delivered;
  }
  CHECK(gen == r.generated);
  CHECK(del == r.delivered);
  for (const auto& f : r.frames)
    if (f.status == FrameStatus::Arrived) CHECK(f.cum_storage <= 1.5e-4);
}

TEST_CASE("bounded queue drops overflow") {
  const auto topo = build_default_topology();
  SimConfig c;
  c.protocol = RoutingProtocol::storage_unlimited();
  c.frames_per_sender = 200;
  c.mean_interarrival = 1e-4;
  c.queue_capacity = 1;
  const SimRecord r = run(c, topo);
  std::uint64_t full = 0;
  for (const auto& f : r.frames) full += f.reason == DiscardReason::QueueFull;
  CHECK(full > 0);
}

TEST_CASE("invalid configuration names the field") {
  SimConfig c;
  c.d_proc = -1;
  try {
    c.validate();
    FAIL("expected ConfigInvalid");
  } catch (const ConfigInvalid& e) {
    CHECK(std::string(e.what()).find("sim.d_proc") != std::string::npos);
  }
}

TEST_CASE("trace has one line per hop") {
  const auto topo = line_network();
  SimConfig c;
  c.frames_per_sender = 3;
  const SimRecord r = run(c, topo);
  std::ostringstream os;
  write_trace(os, r, topo);
  const std::string s = os.str();
  CHECK(std::count(s.begin(), s.end(), '\n') == 1 + 3 * 2);
  CHECK(s.rfind("frame_id,src,dst,hop,d_queue_s,T_s_s,t_f_after_s,status\n", 0) == 0);
}
