#pragma once

// Time-space network of one mobile storage unit in one scenario: nodes are
// (site, time point) pairs, arcs are moves, holds and the committed remainder
// of a trip already under way. A schedule is a source-to-sink path.

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mess/transport.hpp"

namespace mess::tsn {

/// Row i, column j: intervals needed to travel from layer site i to j
/// (transport::kNoTrip when unreachable).
using TravelTimes = std::vector<std::vector<int>>;

enum class SiteRole {
  Microgrid,  // can hold and exchange power
  Depot,      // can hold; final destination
  Waypoint,   // road node where a vehicle got stranded; can hold, never a destination
};

struct LayerSite {
  std::string label;
  transport::NodeId node{};
  SiteRole role{SiteRole::Microgrid};
};

struct LayerStart {
  std::size_t site{};
  /// Intervals until the vehicle reaches `site` on a trip it cannot abandon;
  /// 0 means it is parked there now.
  int arrival{0};
};

struct LayerRules {
  /// Only depots may terminate the layer (final rolls of the whole horizon).
  bool depot_sinks_only{false};
  /// false restricts moving arcs: the start may depart at time 0 toward a
  /// microgrid when `initial_departure` is set, and depot-bound moves are
  /// allowed when `depot_sinks_only` is set. Everything else holds.
  bool free_departures{true};
  bool initial_departure{true};
};

struct LayerInput {
  std::vector<LayerSite> sites;
  int horizon{1};
  /// One matrix per departure interval, or a single matrix used for all.
  std::vector<TravelTimes> travel;
  LayerStart start;
  LayerRules rules;
  std::size_t vehicle{0};
  std::size_t scenario{0};
};

enum class ArcKind { Moving, Holding, Committed };

struct TsNode {
  /// Layer site, or kEnRoute for the source of a committed trip.
  std::size_t site{};
  int time{};
  bool source{false};
  bool sink{false};
};

inline constexpr std::size_t kEnRoute = static_cast<std::size_t>(-1);

struct Arc {
  std::size_t tail{};
  std::size_t head{};
  ArcKind kind{ArcKind::Holding};
  std::size_t from_site{};  // kEnRoute for committed arcs
  std::size_t to_site{};
  int depart{};
  int arrive{};
  bool from_source{false};
  bool to_sink{false};

  int span() const { return arrive - depart; }
  /// True when the arc occupies interval t.
  bool covers(int t) const { return depart <= t && t < arrive; }
};

class TimeSpaceNetwork {
 public:
  TimeSpaceNetwork() = default;

  std::size_t vehicle() const { return vehicle_; }
  std::size_t scenario() const { return scenario_; }
  int horizon() const { return horizon_; }
  const std::vector<LayerSite>& sites() const { return sites_; }
  const std::vector<TsNode>& nodes() const { return nodes_; }
  const std::vector<Arc>& arcs() const { return arcs_; }
  std::size_t source() const { return source_; }

  const std::vector<std::size_t>& in_arcs(std::size_t node) const { return in_[node]; }
  const std::vector<std::size_t>& out_arcs(std::size_t node) const { return out_[node]; }

  /// Arcs occupying interval t. Throws std::out_of_range outside [0, horizon).
  std::vector<std::size_t> cut_set(int t) const;
  /// Holding arc at layer site `site` during interval t, if present.
  std::optional<std::size_t> holding_arc(std::size_t site, int t) const;
  /// Nodes that are neither source nor sink: flow conservation applies there.
  std::vector<std::size_t> interior_nodes() const;

  std::size_t count(ArcKind kind) const;

  friend TimeSpaceNetwork build_tsn(const LayerInput& in);

 private:
  std::size_t vehicle_{0};
  std::size_t scenario_{0};
  int horizon_{0};
  std::vector<LayerSite> sites_;
  std::vector<TsNode> nodes_;
  std::vector<Arc> arcs_;
  std::vector<std::vector<std::size_t>> in_;
  std::vector<std::vector<std::size_t>> out_;
  std::size_t source_{0};
};

/// Builds and prunes the layer: nodes that cannot lie on a source-to-sink
/// path are removed together with their arcs. Throws InfeasibleLayer when no
/// such path exists.
TimeSpaceNetwork build_tsn(const LayerInput& in);

/// Route-variable counts of this formulation against the virtual-node
/// formulation that splits every multi-interval trip into unit hops.
struct FormulationCount {
  long long binaries_proposed{0};
  long long binaries_virtualnode{0};
  long long constraints_proposed{0};
  long long constraints_virtualnode{0};
  long long virtual_nodes{0};
  /// Set when the virtual-node binary formula turns negative on a tiny instance.
  bool negative_virtual_count{false};
};

/// Virtual nodes needed by the split formulation: one per extra interval of
/// every reachable ordered site pair.
long long virtual_node_count(const TravelTimes& travel);

/// Per layer: binaries |E_S| vs |E_S| + (dN_V + 1) * 2|T|, constraints |N_S|
/// vs |N_S| + dN_V * |T|; then P(2, sites) * scenarios is removed once from
/// the virtual-node binaries.
FormulationCount count_formulation(std::span<const TimeSpaceNetwork* const> layers,
                                   std::span<const TravelTimes> travel, std::size_t site_count,
                                   std::size_t scenario_count);
FormulationCount count_formulation(const TimeSpaceNetwork& layer, const TravelTimes& travel);

/// Plain-text node/arc listing of a layer.
void dump(std::ostream& os, const TimeSpaceNetwork& layer);

const char* to_string(ArcKind kind);

}  // namespace mess::tsn
