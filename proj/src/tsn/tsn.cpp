#include "mess/tsn.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

#include "mess/error.hpp"

namespace mess::tsn {

const char* to_string(ArcKind kind) {
  switch (kind) {
    case ArcKind::Moving:
      return "moving";
    case ArcKind::Holding:
      return "holding";
    case ArcKind::Committed:
      return "committed";
  }
  return "?";
}

std::vector<std::size_t> TimeSpaceNetwork::cut_set(int t) const {
  if (t < 0 || t >= horizon_) throw std::out_of_range(fmt::format("cut interval {} outside [0, {})", t, horizon_));
  std::vector<std::size_t> out;
  for (std::size_t a = 0; a < arcs_.size(); ++a)
    if (arcs_[a].covers(t)) out.push_back(a);
  return out;
}

std::optional<std::size_t> TimeSpaceNetwork::holding_arc(std::size_t site, int t) const {
  for (std::size_t a = 0; a < arcs_.size(); ++a) {
    const auto& arc = arcs_[a];
    if (arc.kind == ArcKind::Holding && arc.from_site == site && arc.depart == t) return a;
  }
  return std::nullopt;
}

std::vector<std::size_t> TimeSpaceNetwork::interior_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < nodes_.size(); ++n)
    if (!nodes_[n].source && !nodes_[n].sink) out.push_back(n);
  return out;
}

std::size_t TimeSpaceNetwork::count(ArcKind kind) const {
  return static_cast<std::size_t>(std::count_if(arcs_.begin(), arcs_.end(), [&](const Arc& a) { return a.kind == kind; }));
}

namespace {

void check_input(const LayerInput& in) {
  if (in.horizon < 1) throw ConfigError("time-space layer needs a horizon of at least one interval");
  if (in.sites.empty()) throw ConfigError("time-space layer needs at least one site");
  if (in.travel.size() != 1 && in.travel.size() != static_cast<std::size_t>(in.horizon))
    throw ConfigError(fmt::format("expected 1 or {} travel matrices, got {}", in.horizon, in.travel.size()));
  for (const auto& m : in.travel) {
    if (m.size() != in.sites.size()) throw ConfigError("travel matrix does not match the layer sites");
    for (const auto& row : m)
      if (row.size() != in.sites.size()) throw ConfigError("travel matrix does not match the layer sites");
  }
  if (in.start.site >= in.sites.size()) throw ConfigError("layer start site out of range");
  if (in.start.arrival < 0) throw ConfigError("negative arrival time for a committed trip");
}

}  // namespace

TimeSpaceNetwork build_tsn(const LayerInput& in) {
  check_input(in);
  const int H = in.horizon;
  const std::size_t S = in.sites.size();
  const bool committed = in.start.arrival > 0;

  // Candidate nodes: optional en-route source, then (time, site) grid.
  std::vector<TsNode> nodes;
  std::size_t enroute = kEnRoute;
  if (committed) {
    enroute = nodes.size();
    nodes.push_back({kEnRoute, 0, true, false});
  }
  auto grid = [&](std::size_t site, int time) { return (committed ? 1 : 0) + static_cast<std::size_t>(time) * S + site; };
  for (int time = 0; time <= H; ++time)
    for (std::size_t i = 0; i < S; ++i) {
      // A stranded vehicle may end a non-final horizon where it waits.
      bool sink = time == H;
      if (in.rules.depot_sinks_only && in.sites[i].role != SiteRole::Depot) sink = false;
      nodes.push_back({i, time, false, sink});
    }
  const std::size_t source = committed ? enroute : grid(in.start.site, 0);
  nodes[source].source = true;

  auto travel = [&](int tau, std::size_t i, std::size_t j) {
    const auto& m = in.travel.size() == 1 ? in.travel[0] : in.travel[static_cast<std::size_t>(tau)];
    return m[i][j];
  };
  auto move_allowed = [&](std::size_t i, std::size_t j, int tau) {
    if (in.sites[j].role == SiteRole::Waypoint) return false;
    if (in.rules.free_departures) return true;
    if (in.rules.depot_sinks_only && in.sites[j].role == SiteRole::Depot) return true;
    return in.rules.initial_departure && !committed && tau == 0 && i == in.start.site &&
           in.sites[j].role == SiteRole::Microgrid;
  };

  std::vector<Arc> arcs;
  if (committed) {
    const int arrive = std::min(in.start.arrival, H);
    arcs.push_back({enroute, grid(in.start.site, arrive), ArcKind::Committed, kEnRoute, in.start.site, 0, arrive});
  }
  for (int tau = 0; tau < H; ++tau)
    for (std::size_t i = 0; i < S; ++i)
      for (std::size_t j = 0; j < S; ++j) {
        if (i == j) {
          arcs.push_back({grid(i, tau), grid(i, tau + 1), ArcKind::Holding, i, i, tau, tau + 1});
          continue;
        }
        const int t = travel(tau, i, j);
        if (t == transport::kNoTrip) continue;
        const int span = std::max(1, t);
        if (tau + span > H) continue;  // beyond the horizon
        if (!move_allowed(i, j, tau)) continue;
        arcs.push_back({grid(i, tau), grid(j, tau + span), ArcKind::Moving, i, j, tau, tau + span});
      }

  // Keep only nodes on some source-to-sink path.
  std::vector<std::vector<std::size_t>> fwd(nodes.size()), bwd(nodes.size());
  for (std::size_t a = 0; a < arcs.size(); ++a) {
    fwd[arcs[a].tail].push_back(a);
    bwd[arcs[a].head].push_back(a);
  }
  std::vector<char> from_src(nodes.size(), 0), to_sink(nodes.size(), 0);
  std::vector<std::size_t> stack{source};
  from_src[source] = 1;
  while (!stack.empty()) {
    auto u = stack.back();
    stack.pop_back();
    for (auto a : fwd[u])
      if (!from_src[arcs[a].head]) {
        from_src[arcs[a].head] = 1;
        stack.push_back(arcs[a].head);
      }
  }
  for (std::size_t n = 0; n < nodes.size(); ++n)
    if (nodes[n].sink) {
      to_sink[n] = 1;
      stack.push_back(n);
    }
  while (!stack.empty()) {
    auto u = stack.back();
    stack.pop_back();
    for (auto a : bwd[u])
      if (!to_sink[arcs[a].tail]) {
        to_sink[arcs[a].tail] = 1;
        stack.push_back(arcs[a].tail);
      }
  }
  if (!to_sink[source])
    throw InfeasibleLayer(fmt::format("vehicle {} scenario {}: no feasible schedule from {} over {} intervals",
                                      in.vehicle, in.scenario, in.sites[in.start.site].label, H));

  TimeSpaceNetwork out;
  out.vehicle_ = in.vehicle;
  out.scenario_ = in.scenario;
  out.horizon_ = H;
  out.sites_ = in.sites;
  std::vector<std::size_t> remap(nodes.size(), kEnRoute);
  for (std::size_t n = 0; n < nodes.size(); ++n)
    if (from_src[n] && to_sink[n]) {
      remap[n] = out.nodes_.size();
      out.nodes_.push_back(nodes[n]);
    }
  out.source_ = remap[source];
  out.in_.assign(out.nodes_.size(), {});
  out.out_.assign(out.nodes_.size(), {});
  for (auto arc : arcs) {
    if (remap[arc.tail] == kEnRoute || remap[arc.head] == kEnRoute) continue;
    arc.tail = remap[arc.tail];
    arc.head = remap[arc.head];
    arc.from_source = arc.tail == out.source_;
    arc.to_sink = out.nodes_[arc.head].sink;
    out.out_[arc.tail].push_back(out.arcs_.size());
    out.in_[arc.head].push_back(out.arcs_.size());
    out.arcs_.push_back(arc);
  }
  return out;
}

long long virtual_node_count(const TravelTimes& travel) {
  long long total = 0;
  for (std::size_t i = 0; i < travel.size(); ++i)
    for (std::size_t j = 0; j < travel[i].size(); ++j) {
      if (i == j || travel[i][j] == transport::kNoTrip) continue;
      total += std::max(0, travel[i][j] - 1);
    }
  return total;
}

FormulationCount count_formulation(std::span<const TimeSpaceNetwork* const> layers, std::span<const TravelTimes> travel,
                                   std::size_t site_count, std::size_t scenario_count) {
  if (layers.size() != travel.size()) throw ConfigError("one travel matrix per layer is required");
  FormulationCount c;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& layer = *layers[k];
    const long long arcs = static_cast<long long>(layer.arcs().size());
    const long long nodes = static_cast<long long>(layer.nodes().size());
    const long long dnv = virtual_node_count(travel[k]);
    const long long T = layer.horizon();
    c.virtual_nodes += dnv;
    c.binaries_proposed += arcs;
    c.constraints_proposed += nodes;
    c.binaries_virtualnode += arcs + (dnv + 1) * 2 * T;
    c.constraints_virtualnode += nodes + dnv * T;
  }
  const long long n = static_cast<long long>(site_count);
  c.binaries_virtualnode -= n * (n - 1) * static_cast<long long>(scenario_count);
  c.negative_virtual_count = c.binaries_virtualnode < 0;
  return c;
}

FormulationCount count_formulation(const TimeSpaceNetwork& layer, const TravelTimes& travel) {
  const TimeSpaceNetwork* layers[] = {&layer};
  const TravelTimes matrices[] = {travel};
  return count_formulation(layers, matrices, layer.sites().size(), 1);
}

void dump(std::ostream& os, const TimeSpaceNetwork& layer) {
  os << fmt::format("# layer vehicle={} scenario={} horizon={}\n", layer.vehicle(), layer.scenario(), layer.horizon());
  auto label = [&](std::size_t site) { return site == kEnRoute ? std::string("en-route") : layer.sites()[site].label; };
  for (std::size_t n = 0; n < layer.nodes().size(); ++n) {
    const auto& node = layer.nodes()[n];
    os << fmt::format("node {} {} t{}{}{}\n", n, label(node.site), node.time, node.source ? " source" : "",
                      node.sink ? " sink" : "");
  }
  for (std::size_t a = 0; a < layer.arcs().size(); ++a) {
    const auto& arc = layer.arcs()[a];
    os << fmt::format("arc {} {} -> {} {} {}@t{} -> {}@t{}\n", a, arc.tail, arc.head, to_string(arc.kind),
                      label(arc.from_site), arc.depart, label(arc.to_site), arc.arrive);
  }
}

}  // namespace mess::tsn
