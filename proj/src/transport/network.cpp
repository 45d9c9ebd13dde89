#include "mess/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>

#include <fmt/format.h>

#include "mess/error.hpp"

namespace mess::transport {

std::int64_t km_to_m(double km) { return std::llround(km * 1000.0); }

TransportNetwork::TransportNetwork(std::vector<Road> roads, std::vector<Site> sites)
    : roads_(std::move(roads)), sites_(std::move(sites)) {
  std::set<NodeId> ids;
  for (const auto& r : roads_) {
    ids.insert(r.a);
    ids.insert(r.b);
  }
  nodes_.assign(ids.begin(), ids.end());
  adjacency_.resize(nodes_.size());

  std::set<std::pair<NodeId, NodeId>> seen;
  for (std::size_t k = 0; k < roads_.size(); ++k) {
    const auto& r = roads_[k];
    if (r.a == r.b) throw ValidationError(fmt::format("road {}-{} is a self loop", r.a, r.b));
    if (r.length_m <= 0) throw ValidationError(fmt::format("road {}-{} has nonpositive length", r.a, r.b));
    auto key = std::minmax(r.a, r.b);
    if (!seen.insert({key.first, key.second}).second)
      throw ValidationError(fmt::format("duplicate road {}-{}", r.a, r.b));
    adjacency_[node_index(r.a)].push_back({node_index(r.b), k});
    adjacency_[node_index(r.b)].push_back({node_index(r.a), k});
  }

  std::set<std::string> site_ids;
  for (const auto& s : sites_) {
    if (!has_node(s.node)) throw ValidationError(fmt::format("site {} maps to unknown node {}", s.id, s.node));
    if (!site_ids.insert(s.id).second) throw ValidationError(fmt::format("duplicate site id {}", s.id));
  }

  if (!nodes_.empty()) {
    std::vector<char> seen_node(nodes_.size(), 0);
    std::vector<std::size_t> stack{0};
    seen_node[0] = 1;
    while (!stack.empty()) {
      auto u = stack.back();
      stack.pop_back();
      for (const auto& inc : adjacency_[u]) {
        if (!seen_node[inc.neighbor]) {
          seen_node[inc.neighbor] = 1;
          stack.push_back(inc.neighbor);
        }
      }
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (!seen_node[i]) throw ValidationError(fmt::format("road graph is disconnected at node {}", nodes_[i]));
  } else if (!sites_.empty()) {
    throw ValidationError("sites given but the road graph is empty");
  }
}

bool TransportNetwork::has_node(NodeId id) const { return std::binary_search(nodes_.begin(), nodes_.end(), id); }

std::size_t TransportNetwork::node_index(NodeId id) const {
  auto it = std::lower_bound(nodes_.begin(), nodes_.end(), id);
  if (it == nodes_.end() || *it != id) throw ValidationError(fmt::format("unknown road node {}", id));
  return static_cast<std::size_t>(it - nodes_.begin());
}

std::optional<std::size_t> TransportNetwork::find_road(NodeId a, NodeId b) const {
  if (!has_node(a) || !has_node(b)) return std::nullopt;
  for (const auto& inc : adjacency_[node_index(a)])
    if (nodes_[inc.neighbor] == b) return inc.road;
  return std::nullopt;
}

std::optional<std::size_t> TransportNetwork::site_at(NodeId node) const {
  for (std::size_t i = 0; i < sites_.size(); ++i)
    if (sites_[i].node == node) return i;
  return std::nullopt;
}

std::size_t TransportNetwork::site_index(std::string_view id) const {
  for (std::size_t i = 0; i < sites_.size(); ++i)
    if (sites_[i].id == id) return i;
  throw ValidationError(fmt::format("unknown site '{}'", id));
}

std::vector<NodeId> TransportNetwork::site_nodes() const {
  std::vector<NodeId> out;
  out.reserve(sites_.size());
  for (const auto& s : sites_) out.push_back(s.node);
  return out;
}

namespace {

struct SingleSource {
  std::vector<std::int64_t> dist;
  std::vector<std::vector<NodeId>> path;  // lexicographically smallest shortest path
};

SingleSource dijkstra(const TransportNetwork& net, const RoadMask& mask, std::size_t src) {
  const auto n = net.nodes().size();
  SingleSource out;
  out.dist.assign(n, kUnreachable);
  out.path.assign(n, {});
  using Item = std::pair<std::int64_t, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  out.dist[src] = 0;
  pq.push({0, src});
  std::vector<std::size_t> order;
  std::vector<char> done(n, 0);
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (done[u]) continue;
    done[u] = 1;
    order.push_back(u);
    for (const auto& inc : net.incident(u)) {
      if (!mask[inc.road]) continue;
      auto nd = d + net.roads()[inc.road].length_m;
      if (nd < out.dist[inc.neighbor]) {
        out.dist[inc.neighbor] = nd;
        pq.push({nd, inc.neighbor});
      }
    }
  }
  // Lengths are strictly positive, so every predecessor on a shortest path is
  // finalized before its successor and the lexicographic minimum is built greedily.
  const auto& ids = net.nodes();
  out.path[src] = {ids[src]};
  for (auto v : order) {
    if (v == src) continue;
    // Compare whole candidates: a predecessor path that is a prefix of another
    // does not make the extended path smaller.
    std::vector<NodeId> best, candidate;
    for (const auto& inc : net.incident(v)) {
      if (!mask[inc.road]) continue;
      auto u = inc.neighbor;
      if (out.dist[u] == kUnreachable) continue;
      if (out.dist[u] + net.roads()[inc.road].length_m != out.dist[v]) continue;
      candidate = out.path[u];
      candidate.push_back(ids[v]);
      if (best.empty() || candidate < best) best.swap(candidate);
    }
    out.path[v] = std::move(best);
  }
  return out;
}

}  // namespace

TravelMatrices shortest_paths(const TransportNetwork& net, const RoadMask& mask, std::span<const NodeId> terminals) {
  if (mask.size() != net.roads().size()) throw ConsistencyError("road mask size does not match the network");
  TravelMatrices m;
  m.terminals.assign(terminals.begin(), terminals.end());
  const auto k = terminals.size();
  m.paths.assign(k, std::vector<std::vector<NodeId>>(k));
  m.distance_m.assign(k, std::vector<std::int64_t>(k, kUnreachable));
  m.intervals.assign(k, std::vector<int>(k, kNoTrip));
  for (std::size_t i = 0; i < k; ++i) {
    auto src = net.node_index(terminals[i]);
    auto ss = dijkstra(net, mask, src);
    for (std::size_t j = 0; j < k; ++j) {
      auto dst = net.node_index(terminals[j]);
      m.distance_m[i][j] = ss.dist[dst];
      m.paths[i][j] = ss.path[dst];
    }
  }
  return m;
}

TravelMatrices shortest_paths(const TransportNetwork& net, const RoadMask& mask) {
  auto t = net.site_nodes();
  return shortest_paths(net, mask, t);
}

TravelMatrices shortest_paths(const TransportNetwork& net, const RoadStatus& status, std::size_t t) {
  return shortest_paths(net, status.at(t));
}

std::vector<NodeId> shortest_route(const TransportNetwork& net, const RoadMask& mask, NodeId from, NodeId to) {
  auto ss = dijkstra(net, mask, net.node_index(from));
  return ss.path[net.node_index(to)];
}

std::int64_t route_length_m(const TransportNetwork& net, std::span<const NodeId> route) {
  std::int64_t total = 0;
  for (std::size_t i = 0; i + 1 < route.size(); ++i) {
    auto r = net.find_road(route[i], route[i + 1]);
    if (!r) throw ConsistencyError(fmt::format("route uses missing road {}-{}", route[i], route[i + 1]));
    total += net.roads()[*r].length_m;
  }
  return total;
}

int travel_intervals(std::int64_t distance_m, double speed_kmh, double dt_h) {
  if (!(speed_kmh > 0.0)) throw ConfigError(fmt::format("average speed must be positive, got {}", speed_kmh));
  if (!(dt_h > 0.0)) throw ConfigError(fmt::format("interval length must be positive, got {}", dt_h));
  if (distance_m == kUnreachable) return kNoTrip;
  if (distance_m == 0) return 0;
  const double x = static_cast<double>(distance_m) / 1000.0 / speed_kmh / dt_h;
  // A relative slack keeps exact multiples (35 km at 17.5 km/h) from rounding up.
  return static_cast<int>(std::ceil(x * (1.0 - 1e-12)));
}

std::vector<std::vector<int>> travel_time_matrix(const std::vector<std::vector<std::int64_t>>& distance_m,
                                                 double speed_kmh, double dt_h) {
  std::vector<std::vector<int>> out(distance_m.size());
  for (std::size_t i = 0; i < distance_m.size(); ++i) {
    out[i].resize(distance_m[i].size());
    for (std::size_t j = 0; j < distance_m[i].size(); ++j)
      out[i][j] = i == j ? 0 : travel_intervals(distance_m[i][j], speed_kmh, dt_h);
  }
  if (distance_m.empty()) travel_intervals(0, speed_kmh, dt_h);  // still validate parameters
  return out;
}

TravelMatrices& with_travel_times(TravelMatrices& m, double speed_kmh, double dt_h) {
  m.intervals = travel_time_matrix(m.distance_m, speed_kmh, dt_h);
  return m;
}

std::shared_ptr<const TravelMatrices> TravelCache::paths(const RoadMask& mask, std::span<const NodeId> terminals) {
  auto key = std::make_pair(mask, std::vector<NodeId>(terminals.begin(), terminals.end()));
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  auto value = std::make_shared<const TravelMatrices>(shortest_paths(*net_, mask, terminals));
  cache_.emplace(std::move(key), value);
  return value;
}

}  // namespace mess::transport
