#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace qkdnet {

class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoPathError : public TopologyError {
 public:
  using TopologyError::TopologyError;
};

enum class NodeKind { Sender, Receiver, Router };

const char* to_string(NodeKind kind);

struct NodeSpec {
  std::string id;
  NodeKind kind = NodeKind::Router;
  // Set iff kind != Router.
  std::optional<std::string> attached_router;
};

struct LinkSpec {
  std::string a;
  std::string b;
  double length_km = 0.0;
  double attenuation_db_per_km = 0.0;
};

using NodeIndex = std::uint32_t;
using Path = std::vector<NodeIndex>;

/// Network graph of users, routers and fiber links. Immutable once built;
/// construction validates the structural invariants and precomputes the
/// shortest-path DAG of every node so path draws are cheap and thread-safe.
class NetworkTopology {
 public:
  NetworkTopology(std::vector<NodeSpec> nodes, std::vector<LinkSpec> links);

  const std::vector<NodeSpec>& nodes() const { return nodes_; }
  const std::vector<LinkSpec>& links() const { return links_; }
  std::size_t size() const { return nodes_.size(); }

  const NodeSpec& node(NodeIndex i) const { return nodes_.at(i); }
  NodeIndex index_of(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  std::vector<NodeIndex> senders() const { return of_kind(NodeKind::Sender); }
  std::vector<NodeIndex> receivers() const { return of_kind(NodeKind::Receiver); }
  std::vector<NodeIndex> routers() const { return of_kind(NodeKind::Router); }

  std::size_t degree(NodeIndex i) const { return adjacency_.at(i).size(); }

  /// Link joining two adjacent nodes; throws TopologyError if they are not adjacent.
  const LinkSpec& link_between(NodeIndex a, NodeIndex b) const;

  double path_length_km(const Path& path) const;
  double path_fiber_loss_db(const Path& path) const;
  std::size_t routers_on(const Path& path) const;

  /// Minimum total length from src to dst, or nullopt if unreachable.
  std::optional<double> shortest_distance(NodeIndex src, NodeIndex dst) const;

  /// Number of distinct minimum-length paths from src to dst.
  std::uint64_t shortest_path_count(NodeIndex src, NodeIndex dst) const;

 private:
  friend Path least_cost_path(const NetworkTopology&, NodeIndex, NodeIndex, std::mt19937_64&);

  struct Edge {
    NodeIndex to;
    std::size_t link;
  };
  // Shortest-path DAG rooted at one source: distances, path counts and the
  // predecessors lying on some shortest path.
  struct ShortestPathTree {
    std::vector<double> dist;
    std::vector<std::uint64_t> count;
    std::vector<std::vector<NodeIndex>> preds;
  };

  std::vector<NodeIndex> of_kind(NodeKind kind) const;
  void validate() const;
  ShortestPathTree dijkstra(NodeIndex src) const;

  std::vector<NodeSpec> nodes_;
  std::vector<LinkSpec> links_;
  std::unordered_map<std::string, NodeIndex> index_;
  std::vector<std::vector<Edge>> adjacency_;
  std::vector<ShortestPathTree> trees_;
};

/// Default router ring order. Router "R<i>" hosts senders A<i>1, A<i>2 and
/// receivers B<i>1, B<i>2. With the ring R1-R2-R4-R3 the pair (A31, B32)
/// shares a router, (A42, B22) spans two routers and (A22, B31) three.
inline const std::vector<int> kDefaultRouterRing = {1, 2, 4, 3};

struct DefaultTopologyOptions {
  double user_link_km = 5.0;
  double router_link_km = 20.0;
  double attenuation_db_per_km = 0.2;
  std::vector<int> router_ring = kDefaultRouterRing;
};

/// Sixteen users on four routers: each router carries two senders and two
/// receivers on 5 km spurs, routers form a ring of 20 km spans, 0.2 dB/km.
NetworkTopology build_default_topology(const DefaultTopologyOptions& options = {});

/// Minimum-length path src -> dst. Ties between equal-length paths are
/// broken uniformly at random over whole paths.
Path least_cost_path(const NetworkTopology& topology, NodeIndex src, NodeIndex dst,
                     std::mt19937_64& rng);

NetworkTopology topology_from_json(const nlohmann::json& j);
nlohmann::json topology_to_json(const NetworkTopology& topology);

}  // namespace qkdnet
