#include "qkdnet/topology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

namespace qkdnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Path lengths are sums of a handful of doubles; treat them as equal when
// they agree to a relative 1e-9.
bool same_length(double a, double b) {
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

NodeKind parse_kind(const std::string& s) {
  if (s == "Sender" || s == "sender") return NodeKind::Sender;
  if (s == "Receiver" || s == "receiver") return NodeKind::Receiver;
  if (s == "Router" || s == "router") return NodeKind::Router;
  throw TopologyError("unknown node kind '" + s + "'");
}

}  // namespace

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Sender: return "Sender";
    case NodeKind::Receiver: return "Receiver";
    case NodeKind::Router: return "Router";
  }
  return "?";
}

NetworkTopology::NetworkTopology(std::vector<NodeSpec> nodes, std::vector<LinkSpec> links)
    : nodes_(std::move(nodes)), links_(std::move(links)) {
  for (NodeIndex i = 0; i < nodes_.size(); ++i) {
    if (!index_.emplace(nodes_[i].id, i).second)
      throw TopologyError("duplicate node id '" + nodes_[i].id + "'");
  }
  adjacency_.resize(nodes_.size());
  for (std::size_t l = 0; l < links_.size(); ++l) {
    const auto& link = links_[l];
    if (!contains(link.a) || !contains(link.b))
      throw TopologyError("link " + link.a + "-" + link.b + " references an unknown node");
    if (link.a == link.b) throw TopologyError("self-loop on node '" + link.a + "'");
    if (!(link.length_km > 0.0))
      throw TopologyError("link " + link.a + "-" + link.b + " must have positive length");
    if (!(link.attenuation_db_per_km >= 0.0))
      throw TopologyError("link " + link.a + "-" + link.b + " has negative attenuation");
    const NodeIndex a = index_.at(link.a);
    const NodeIndex b = index_.at(link.b);
    for (const auto& e : adjacency_[a]) {
      if (e.to == b) throw TopologyError("parallel links between " + link.a + " and " + link.b);
    }
    adjacency_[a].push_back({b, l});
    adjacency_[b].push_back({a, l});
  }
  validate();
  trees_.reserve(nodes_.size());
  for (NodeIndex i = 0; i < nodes_.size(); ++i) trees_.push_back(dijkstra(i));
}

void NetworkTopology::validate() const {
  if (nodes_.empty()) throw TopologyError("topology has no nodes");
  for (NodeIndex i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.kind == NodeKind::Router) {
      if (n.attached_router)
        throw TopologyError("router '" + n.id + "' must not name an attached router");
      continue;
    }
    if (!n.attached_router)
      throw TopologyError("user node '" + n.id + "' has no attached router");
    if (!contains(*n.attached_router) ||
        nodes_[index_.at(*n.attached_router)].kind != NodeKind::Router)
      throw TopologyError("user node '" + n.id + "' is attached to a non-router");
    if (adjacency_[i].size() != 1)
      throw TopologyError("user node '" + n.id + "' must have exactly one link");
    if (adjacency_[i].front().to != index_.at(*n.attached_router))
      throw TopologyError("user node '" + n.id + "' is not linked to its attached router");
  }

  std::vector<bool> seen(nodes_.size(), false);
  std::vector<NodeIndex> stack{0};
  seen[0] = true;
  std::size_t reached = 1;
  while (!stack.empty()) {
    const NodeIndex v = stack.back();
    stack.pop_back();
    for (const auto& e : adjacency_[v]) {
      if (!seen[e.to]) {
        seen[e.to] = true;
        ++reached;
        stack.push_back(e.to);
      }
    }
  }
  if (reached != nodes_.size()) throw TopologyError("topology is not connected");
}

NodeIndex NetworkTopology::index_of(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw TopologyError("unknown node '" + id + "'");
  return it->second;
}

std::vector<NodeIndex> NetworkTopology::of_kind(NodeKind kind) const {
  std::vector<NodeIndex> out;
  for (NodeIndex i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].kind == kind) out.push_back(i);
  return out;
}

const LinkSpec& NetworkTopology::link_between(NodeIndex a, NodeIndex b) const {
  for (const auto& e : adjacency_.at(a))
    if (e.to == b) return links_[e.link];
  throw TopologyError("nodes '" + nodes_.at(a).id + "' and '" + nodes_.at(b).id +
                      "' are not adjacent");
}

double NetworkTopology::path_length_km(const Path& path) const {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) total += link_between(path[i - 1], path[i]).length_km;
  return total;
}

double NetworkTopology::path_fiber_loss_db(const Path& path) const {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const auto& l = link_between(path[i - 1], path[i]);
    total += l.length_km * l.attenuation_db_per_km;
  }
  return total;
}

std::size_t NetworkTopology::routers_on(const Path& path) const {
  return static_cast<std::size_t>(std::count_if(path.begin(), path.end(), [&](NodeIndex v) {
    return nodes_[v].kind == NodeKind::Router;
  }));
}

std::optional<double> NetworkTopology::shortest_distance(NodeIndex src, NodeIndex dst) const {
  const double d = trees_.at(src).dist.at(dst);
  if (d == kInf) return std::nullopt;
  return d;
}

std::uint64_t NetworkTopology::shortest_path_count(NodeIndex src, NodeIndex dst) const {
  return trees_.at(src).count.at(dst);
}

// Users are leaves: a shortest path never transits a sender or receiver, so
// relaxation only continues through routers (and the source itself).
NetworkTopology::ShortestPathTree NetworkTopology::dijkstra(NodeIndex src) const {
  const std::size_t n = nodes_.size();
  ShortestPathTree t{std::vector<double>(n, kInf), std::vector<std::uint64_t>(n, 0),
                     std::vector<std::vector<NodeIndex>>(n)};
  t.dist[src] = 0.0;
  t.count[src] = 1;

  using Item = std::pair<double, NodeIndex>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  pq.push({0.0, src});
  std::vector<bool> settled(n, false);
  std::vector<NodeIndex> order;
  while (!pq.empty()) {
    auto [d, v] = pq.top();
    pq.pop();
    if (settled[v]) continue;
    settled[v] = true;
    order.push_back(v);
    if (v != src && nodes_[v].kind != NodeKind::Router) continue;
    for (const auto& e : adjacency_[v]) {
      const double nd = d + links_[e.link].length_km;
      if (nd < t.dist[e.to] && !same_length(nd, t.dist[e.to])) {
        t.dist[e.to] = nd;
        pq.push({nd, e.to});
      }
    }
  }
  // Predecessors and path counts in settle order, so every predecessor's
  // count is final before it is consumed.
  for (NodeIndex v : order) {
    if (v == src) continue;
    for (const auto& e : adjacency_[v]) {
      const NodeIndex u = e.to;
      if (!settled[u] || t.dist[u] == kInf) continue;
      if (u != src && nodes_[u].kind != NodeKind::Router) continue;
      if (same_length(t.dist[u] + links_[e.link].length_km, t.dist[v]) && t.dist[u] < t.dist[v]) {
        t.preds[v].push_back(u);
        t.count[v] += t.count[u];
      }
    }
    std::sort(t.preds[v].begin(), t.preds[v].end());
  }
  return t;
}

Path least_cost_path(const NetworkTopology& topology, NodeIndex src, NodeIndex dst,
                     std::mt19937_64& rng) {
  if (src >= topology.size() || dst >= topology.size())
    throw TopologyError("path endpoint out of range");
  if (src == dst) throw TopologyError("path endpoints must differ");
  const auto& tree = topology.trees_[src];
  if (tree.count[dst] == 0)
    throw NoPathError("no path from '" + topology.node(src).id + "' to '" +
                      topology.node(dst).id + "'");

  // Walk back from dst picking each predecessor with weight equal to its
  // shortest-path count; this samples uniformly over complete paths.
  Path reversed{dst};
  NodeIndex v = dst;
  while (v != src) {
    const auto& preds = tree.preds[v];
    NodeIndex pick = preds.front();
    if (preds.size() > 1) {
      std::uniform_int_distribution<std::uint64_t> draw(0, tree.count[v] - 1);
      std::uint64_t r = draw(rng);
      for (NodeIndex p : preds) {
        if (r < tree.count[p]) {
          pick = p;
          break;
        }
        r -= tree.count[p];
      }
    }
    reversed.push_back(pick);
    v = pick;
  }
  return Path(reversed.rbegin(), reversed.rend());
}

NetworkTopology build_default_topology(const DefaultTopologyOptions& options) {
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
  const auto& ring = options.router_ring;
  std::set<int> ids(ring.begin(), ring.end());
  if (ring.size() < 2 || ids.size() != ring.size())
    throw TopologyError("router ring must list at least two distinct routers");

  for (int r : std::set<int>(ring.begin(), ring.end())) {
    const std::string router = "R" + std::to_string(r);
    nodes.push_back({router, NodeKind::Router, std::nullopt});
  }
  for (int r : std::set<int>(ring.begin(), ring.end())) {
    const std::string router = "R" + std::to_string(r);
    for (int u = 1; u <= 2; ++u) {
      const std::string a = "A" + std::to_string(r) + std::to_string(u);
      const std::string b = "B" + std::to_string(r) + std::to_string(u);
      nodes.push_back({a, NodeKind::Sender, router});
      nodes.push_back({b, NodeKind::Receiver, router});
      links.push_back({a, router, options.user_link_km, options.attenuation_db_per_km});
      links.push_back({b, router, options.user_link_km, options.attenuation_db_per_km});
    }
  }
  const std::size_t spans = ring.size() == 2 ? 1 : ring.size();
  for (std::size_t i = 0; i < spans; ++i) {
    links.push_back({"R" + std::to_string(ring[i]), "R" + std::to_string(ring[(i + 1) % ring.size()]),
                     options.router_link_km, options.attenuation_db_per_km});
  }
  return NetworkTopology(std::move(nodes), std::move(links));
}

NetworkTopology topology_from_json(const nlohmann::json& j) {
  std::vector<NodeSpec> nodes;
  std::vector<LinkSpec> links;
  try {
    for (const auto& n : j.at("nodes")) {
      NodeSpec spec;
      spec.id = n.at("id").get<std::string>();
      spec.kind = parse_kind(n.at("kind").get<std::string>());
      if (n.contains("attached_router") && !n.at("attached_router").is_null())
        spec.attached_router = n.at("attached_router").get<std::string>();
      nodes.push_back(std::move(spec));
    }
    for (const auto& l : j.at("links")) {
      links.push_back({l.at("a").get<std::string>(), l.at("b").get<std::string>(),
                       l.at("length_km").get<double>(),
                       l.at("attenuation_db_per_km").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw TopologyError(std::string("malformed topology JSON: ") + e.what());
  }
  return NetworkTopology(std::move(nodes), std::move(links));
}

nlohmann::json topology_to_json(const NetworkTopology& topology) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : topology.nodes()) {
    nlohmann::json o{{"id", n.id}, {"kind", to_string(n.kind)}};
    if (n.attached_router) o["attached_router"] = *n.attached_router;
    nodes.push_back(std::move(o));
  }
  nlohmann::json links = nlohmann::json::array();
  for (const auto& l : topology.links()) {
    links.push_back({{"a", l.a}, {"b", l.b}, {"length_km", l.length_km},
                     {"attenuation_db_per_km", l.attenuation_db_per_km}});
  }
  return {{"nodes", nodes}, {"links", links}};
}

}  // namespace qkdnet
