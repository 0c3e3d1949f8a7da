#include <doctest.h>

#include <map>
#include <set>

#include "qkdnet/topology.hpp"

using namespace qkdnet;

namespace {

NetworkTopology square_with_spurs() {
  // R1-R2-R4-R3-R1 ring, one sender on R1 and one receiver on R4: two
  // equal-length router paths.
  std::vector<NodeSpec> nodes = {{"R1", NodeKind::Router, {}}, {"R2", NodeKind::Router, {}},
                                 {"R3", NodeKind::Router, {}}, {"R4", NodeKind::Router, {}},
                                 {"A", NodeKind::Sender, "R1"}, {"B", NodeKind::Receiver, "R4"}};
  std::vector<LinkSpec> links = {{"R1", "R2", 10, 0.2}, {"R2", "R4", 10, 0.2}, {"R4", "R3", 10, 0.2},
                                 {"R3", "R1", 10, 0.2}, {"A", "R1", 1, 0.2},   {"B", "R4", 1, 0.2}};
  return NetworkTopology(nodes, links);
}

}  // namespace

TEST_CASE("default network has sixteen users on four routers") {
  const auto t = build_default_topology();
  CHECK(t.routers().size() == 4);
  CHECK(t.senders().size() == 8);
  CHECK(t.receivers().size() == 8);
  for (NodeIndex r : t.routers()) CHECK(t.degree(r) == 6);
}

TEST_CASE("named pairs sit one, two and three routers apart") {
  const auto t = build_default_topology();
  std::mt19937_64 rng(3);
  auto routers = [&](const char* a, const char* b) {
    return t.routers_on(least_cost_path(t, t.index_of(a), t.index_of(b), rng));
  };
  CHECK(routers("A31", "B32") == 1);
  CHECK(routers("A42", "B22") == 2);
  CHECK(routers("A22", "B31") == 3);
  CHECK(t.shortest_distance(t.index_of("A31"), t.index_of("B32")).value() == doctest::Approx(10.0));
  CHECK(t.shortest_distance(t.index_of("A42"), t.index_of("B22")).value() == doctest::Approx(30.0));
  CHECK(t.shortest_distance(t.index_of("A22"), t.index_of("B31")).value() == doctest::Approx(50.0));
  CHECK(t.shortest_path_count(t.index_of("A22"), t.index_of("B31")) == 2);
}

TEST_CASE("tie breaking is uniform over whole paths") {
  const auto t = square_with_spurs();
  const NodeIndex a = t.index_of("A"), b = t.index_of("B");
  CHECK(t.shortest_path_count(a, b) == 2);
  std::mt19937_64 rng(11);
  std::map<Path, int> seen;
  const int n = 20000;
  for (int i = 0; i < n; ++i) ++seen[least_cost_path(t, a, b, rng)];
  REQUIRE(seen.size() == 2);
  for (const auto& [path, count] : seen) {
    CHECK(path.size() == 5);
    CHECK(std::abs(count - n / 2) < 4 * std::sqrt(n * 0.25));
  }
}

TEST_CASE("paths never transit user nodes") {
  const auto t = build_default_topology();
  std::mt19937_64 rng(5);
  for (NodeIndex s : t.senders())
    for (NodeIndex r : t.receivers()) {
      const Path p = least_cost_path(t, s, r, rng);
      CHECK(p.front() == s);
      CHECK(p.back() == r);
      for (std::size_t i = 1; i + 1 < p.size(); ++i) CHECK(t.node(p[i]).kind == NodeKind::Router);
    }
}

TEST_CASE("fiber loss of a path sums its links") {
  const auto t = build_default_topology();
  std::mt19937_64 rng(1);
  const Path p = least_cost_path(t, t.index_of("A42"), t.index_of("B22"), rng);
  CHECK(t.path_length_km(p) == doctest::Approx(30.0));
  CHECK(t.path_fiber_loss_db(p) == doctest::Approx(6.0));
}

TEST_CASE("structural violations are rejected") {
  SUBCASE("user attached to two links") {
    std::vector<NodeSpec> nodes = {{"R1", NodeKind::Router, {}}, {"R2", NodeKind::Router, {}},
                                   {"A", NodeKind::Sender, "R1"}};
    std::vector<LinkSpec> links = {{"R1", "R2", 1, 0.2}, {"A", "R1", 1, 0.2}, {"A", "R2", 1, 0.2}};
    CHECK_THROWS_AS(NetworkTopology(nodes, links), TopologyError);
  }
  SUBCASE("non-positive length") {
    std::vector<NodeSpec> nodes = {{"R1", NodeKind::Router, {}}, {"R2", NodeKind::Router, {}}};
    CHECK_THROWS_AS(NetworkTopology(nodes, {{"R1", "R2", 0, 0.2}}), TopologyError);
  }
  SUBCASE("duplicate id") {
    std::vector<NodeSpec> nodes = {{"R1", NodeKind::Router, {}}, {"R1", NodeKind::Router, {}}};
    CHECK_THROWS_AS(NetworkTopology(nodes, {}), TopologyError);
  }
  SUBCASE("disconnected") {
    std::vector<NodeSpec> nodes = {{"R1", NodeKind::Router, {}}, {"R2", NodeKind::Router, {}}};
    CHECK_THROWS_AS(NetworkTopology(nodes, {}), TopologyError);
  }
}

TEST_CASE("json round trip preserves the graph") {
  const auto t = build_default_topology();
  const auto j = topology_to_json(t);
  const auto u = topology_from_json(j);
  CHECK(topology_to_json(u) == j);
  CHECK(u.size() == t.size());
}
