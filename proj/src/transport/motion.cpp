#include <cmath>

#include <fmt/format.h>

#include "mess/error.hpp"
#include "mess/transport.hpp"

namespace mess::transport {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

int intervals_for(double distance_m, const Motion& motion) {
  if (distance_m <= 0.0) return 0;
  return static_cast<int>(std::ceil(distance_m / motion.step_m() * (1.0 - 1e-12)));
}

bool route_up(const TransportNetwork& net, const RoadMask& mask, std::span<const NodeId> route) {
  for (std::size_t i = 0; i + 1 < route.size(); ++i) {
    auto r = net.find_road(route[i], route[i + 1]);
    if (!r || !mask[*r]) return false;
  }
  return true;
}

MessLocation parked_at(const TransportNetwork& net, NodeId node) {
  if (auto s = net.site_at(node)) return AtSite{*s};
  return AtNode{node};
}

double edge_length(const TransportNetwork& net, NodeId a, NodeId b) {
  auto r = net.find_road(a, b);
  if (!r) throw ConsistencyError(fmt::format("vehicle route uses missing road {}-{}", a, b));
  return static_cast<double>(net.roads()[*r].length_m);
}

enum class PlanKind { Returning, Stuck, Moving };

struct Plan {
  PlanKind kind{PlanKind::Moving};
  InTransit transit;  // valid for Moving
};

// Re-derives the rest of a trip under `mask`: turn back if the current edge is
// down, detour around downstream damage, or stop at the next node when the
// destination is cut off.
Plan replan(const TransportNetwork& net, const InTransit& in, const RoadMask& mask, const Motion& motion) {
  if (in.route.size() < 2) throw ConsistencyError("in-transit route needs at least two nodes");
  const bool on_edge = in.progress_m > 0.0;
  if (on_edge) {
    auto r = net.find_road(in.route[0], in.route[1]);
    if (!r) throw ConsistencyError("in-transit edge missing from network");
    if (!mask[*r]) return {PlanKind::Returning, {}};
  }
  Plan plan;
  plan.transit = in;
  auto& route = plan.transit.route;
  const std::size_t anchor = on_edge ? 1 : 0;
  std::span<const NodeId> tail(route.data() + anchor, route.size() - anchor);
  if (!route_up(net, mask, tail)) {
    auto detour = shortest_route(net, mask, route[anchor], route.back());
    if (detour.empty()) {
      if (!on_edge) return {PlanKind::Stuck, {}};
      route.resize(2);
    } else {
      route.resize(anchor);
      route.insert(route.end(), detour.begin(), detour.end());
    }
  }
  const double head = on_edge ? edge_length(net, route[0], route[1]) - in.progress_m : 0.0;
  std::span<const NodeId> rest(route.data() + anchor, route.size() - anchor);
  const double total = head + static_cast<double>(route_length_m(net, rest));
  plan.transit.remaining = std::max(1, intervals_for(total, motion));
  return plan;
}

MessLocation travel(const TransportNetwork& net, InTransit in, double step_m) {
  double budget = step_m;
  while (in.route.size() >= 2) {
    const double left = edge_length(net, in.route[0], in.route[1]) - in.progress_m;
    // Sub-millimetre leftovers count as arrival at the node.
    if (budget + 1e-6 >= left) {
      budget -= left;
      in.route.erase(in.route.begin());
      in.progress_m = 0.0;
      if (budget <= 1e-6) break;
    } else {
      in.progress_m += budget;
      budget = 0.0;
      break;
    }
  }
  if (in.route.size() == 1) return parked_at(net, in.route.front());
  return in;
}

}  // namespace

NodeId anchor_node(const TransportNetwork& net, const MessLocation& loc) {
  return std::visit(overloaded{[&](const AtSite& s) { return net.sites().at(s.site).node; },
                               [](const AtNode& n) { return n.node; },
                               [](const InTransit& t) { return t.route.front(); }},
                    loc);
}

std::optional<Arrival> committed_arrival(const TransportNetwork& net, const MessLocation& loc,
                                         const RoadMask& mask, const Motion& motion) {
  const auto* in = std::get_if<InTransit>(&loc);
  if (!in) return std::nullopt;
  auto plan = replan(net, *in, mask, motion);
  switch (plan.kind) {
    case PlanKind::Returning:
      return Arrival{in->route.front(), 1};
    case PlanKind::Stuck:
      return Arrival{in->route.front(), 0};
    case PlanKind::Moving:
      return Arrival{plan.transit.route.back(), plan.transit.remaining};
  }
  return std::nullopt;
}

MessLocation advance_mess(const TransportNetwork& net, const MessLocation& loc, const MessStep& step,
                          const RoadMask& mask, const Motion& motion) {
  if (mask.size() != net.roads().size()) throw ConsistencyError("road mask size does not match the network");
  if (!(motion.step_m() > 0.0)) throw ConfigError("vehicle speed and interval length must be positive");

  if (const auto* in = std::get_if<InTransit>(&loc)) {
    if (!std::holds_alternative<Continue>(step))
      throw ConsistencyError("a vehicle in transit can only continue its committed trip");
    auto plan = replan(net, *in, mask, motion);
    if (plan.kind == PlanKind::Returning || plan.kind == PlanKind::Stuck) return parked_at(net, in->route.front());
    auto next = travel(net, plan.transit, motion.step_m());
    if (auto* moving = std::get_if<InTransit>(&next)) moving->remaining = std::max(1, plan.transit.remaining - 1);
    return next;
  }

  const NodeId here = anchor_node(net, loc);
  return std::visit(
      overloaded{
          [&](const Hold&) -> MessLocation { return loc; },
          [&](const Continue&) -> MessLocation {
            throw ConsistencyError("a parked vehicle has no trip to continue");
          },
          [&](const MoveTo& m) -> MessLocation {
            if (m.site >= net.sites().size()) throw ConsistencyError("move targets an unknown site");
            const NodeId dest = net.sites()[m.site].node;
            if (dest == here) return AtSite{m.site};
            auto route = shortest_route(net, mask, here, dest);
            if (route.empty())
              throw ConsistencyError(
                  fmt::format("no available road from node {} to site {}", here, net.sites()[m.site].id));
            InTransit in{route, 0.0, 1};
            in.remaining = std::max(1, intervals_for(static_cast<double>(route_length_m(net, route)), motion));
            auto next = travel(net, in, motion.step_m());
            if (auto* moving = std::get_if<InTransit>(&next)) {
              moving->remaining = in.remaining - 1;
              return next;
            }
            // A vehicle that reaches a node shared by several sites parks at the requested one.
            return AtSite{m.site};
          }},
      step);
}

std::string describe(const TransportNetwork& net, const MessLocation& loc) {
  return std::visit(overloaded{[&](const AtSite& s) { return net.sites().at(s.site).id; },
                               [](const AtNode& n) { return fmt::format("node {}", n.node); },
                               [](const InTransit& t) {
                                 return fmt::format("road {}-{} ({} to go)", t.route[0], t.route[1], t.remaining);
                               }},
                    loc);
}

}  // namespace mess::transport
