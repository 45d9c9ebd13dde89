#pragma once

// Road network, shortest paths among sites, travel-time matrices and the
// interval-by-interval movement of a mobile storage unit along roads.

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mess::transport {

using NodeId = int;

inline constexpr std::int64_t kUnreachable = std::numeric_limits<std::int64_t>::max();
inline constexpr int kNoTrip = std::numeric_limits<int>::max();

enum class SiteKind { Microgrid, Depot };

/// Undirected road segment. Lengths are integer meters.
struct Road {
  NodeId a{};
  NodeId b{};
  std::int64_t length_m{};
};

struct Site {
  std::string id;
  SiteKind kind{SiteKind::Microgrid};
  NodeId node{};
};

/// One availability flag per road (1 = passable), indexed like TransportNetwork::roads().
using RoadMask = std::vector<std::uint8_t>;

/// km with up to millimetre precision -> integer meters.
std::int64_t km_to_m(double km);

class TransportNetwork {
 public:
  struct Incidence {
    std::size_t neighbor;  // node index
    std::size_t road;      // road index
  };

  /// Validates: positive lengths, no self loops or duplicate roads, every
  /// site on an existing node, graph connected with all roads up.
  TransportNetwork(std::vector<Road> roads, std::vector<Site> sites);

  const std::vector<Road>& roads() const { return roads_; }
  const std::vector<Site>& sites() const { return sites_; }
  /// Sorted node ids.
  const std::vector<NodeId>& nodes() const { return nodes_; }

  std::size_t node_index(NodeId id) const;
  bool has_node(NodeId id) const;
  std::optional<std::size_t> find_road(NodeId a, NodeId b) const;
  /// First site (by index) located at `node`.
  std::optional<std::size_t> site_at(NodeId node) const;
  std::size_t site_index(std::string_view id) const;
  const std::vector<Incidence>& incident(std::size_t node_idx) const { return adjacency_[node_idx]; }

  RoadMask all_up() const { return RoadMask(roads_.size(), 1); }
  std::vector<NodeId> site_nodes() const;

 private:
  std::vector<Road> roads_;
  std::vector<Site> sites_;
  std::vector<NodeId> nodes_;
  std::vector<std::vector<Incidence>> adjacency_;
};

/// Road availability for each interval of a horizon.
struct RoadStatus {
  std::vector<RoadMask> per_interval;

  const RoadMask& at(std::size_t t) const { return per_interval.at(t); }
  std::size_t horizon() const { return per_interval.size(); }
};

/// Pairwise route data among a list of terminal nodes (normally the sites).
/// Unreachable pairs have an empty path, kUnreachable distance and kNoTrip intervals.
struct TravelMatrices {
  std::vector<NodeId> terminals;
  std::vector<std::vector<std::vector<NodeId>>> paths;
  std::vector<std::vector<std::int64_t>> distance_m;
  std::vector<std::vector<int>> intervals;

  std::size_t size() const { return terminals.size(); }
  bool reachable(std::size_t i, std::size_t j) const { return distance_m[i][j] != kUnreachable; }
};

/// Dijkstra from every terminal over the available roads. Among equal-length
/// routes the lexicographically smallest node sequence wins.
TravelMatrices shortest_paths(const TransportNetwork& net, const RoadMask& mask,
                              std::span<const NodeId> terminals);
TravelMatrices shortest_paths(const TransportNetwork& net, const RoadMask& mask);
TravelMatrices shortest_paths(const TransportNetwork& net, const RoadStatus& status, std::size_t t);

/// Shortest route between two nodes; empty when unreachable.
std::vector<NodeId> shortest_route(const TransportNetwork& net, const RoadMask& mask, NodeId from, NodeId to);
std::int64_t route_length_m(const TransportNetwork& net, std::span<const NodeId> route);

/// ceil(d / v / dt) with d in meters; 0 for d == 0, kNoTrip for unreachable.
int travel_intervals(std::int64_t distance_m, double speed_kmh, double dt_h);
std::vector<std::vector<int>> travel_time_matrix(const std::vector<std::vector<std::int64_t>>& distance_m,
                                                 double speed_kmh, double dt_h);
/// Fills `m.intervals` in place and returns it.
TravelMatrices& with_travel_times(TravelMatrices& m, double speed_kmh, double dt_h);

/// Memoizes shortest_paths by (mask, terminals). Not thread safe.
class TravelCache {
 public:
  explicit TravelCache(const TransportNetwork& net) : net_(&net) {}
  std::shared_ptr<const TravelMatrices> paths(const RoadMask& mask, std::span<const NodeId> terminals);
  std::size_t size() const { return cache_.size(); }

 private:
  const TransportNetwork* net_;
  std::map<std::pair<RoadMask, std::vector<NodeId>>, std::shared_ptr<const TravelMatrices>> cache_;
};

// ---------------------------------------------------------------------------
// Vehicle location and movement.

struct AtSite {
  std::size_t site{};
  bool operator==(const AtSite&) const = default;
};

/// Parked on a road node that is not a site (after falling back from a damaged road).
struct AtNode {
  NodeId node{};
  bool operator==(const AtNode&) const = default;
};

/// Moving along `route`; route[0]-route[1] is the edge being traversed and
/// route[0] its origin-side node. `progress_m` is the distance already covered
/// on that edge; 0 means the vehicle sits on route[0].
struct InTransit {
  std::vector<NodeId> route;
  double progress_m{0.0};
  int remaining{1};
  bool operator==(const InTransit&) const = default;
};

using MessLocation = std::variant<AtSite, AtNode, InTransit>;

struct Hold {};
struct MoveTo {
  std::size_t site{};
};
struct Continue {};
using MessStep = std::variant<Hold, MoveTo, Continue>;

struct Motion {
  double speed_kmh{};
  double dt_h{};
  double step_m() const { return speed_kmh * 1000.0 * dt_h; }
};

/// Where a vehicle that is already travelling will be, and when, if left to
/// continue under `mask`. A vehicle on a damaged edge heads back to the
/// edge's origin-side node, which takes one interval.
struct Arrival {
  NodeId node{};
  int intervals{};
};

NodeId anchor_node(const TransportNetwork& net, const MessLocation& loc);
std::optional<Arrival> committed_arrival(const TransportNetwork& net, const MessLocation& loc,
                                         const RoadMask& mask, const Motion& motion);

/// Location after one interval. Throws ConsistencyError when the step does
/// not fit the location (e.g. MoveTo while in transit).
MessLocation advance_mess(const TransportNetwork& net, const MessLocation& loc, const MessStep& step,
                          const RoadMask& mask, const Motion& motion);

std::string describe(const TransportNetwork& net, const MessLocation& loc);

}  // namespace mess::transport
