#include <algorithm>
#include <random>

#include "doctest.h"
#include "mess/error.hpp"
#include "mess/transport.hpp"

using namespace mess::transport;

namespace {

// Depot at node 1, microgrid #3 at node 5. The direct route 1-4-5 is 40 km,
// the detour 1-2-3-6-5 is 80 km.
TransportNetwork detour_net() {
  std::vector<Road> roads{{1, 4, 20000}, {4, 5, 20000}, {1, 2, 20000}, {2, 3, 20000}, {3, 6, 20000}, {6, 5, 20000}};
  std::vector<Site> sites{{"d1", SiteKind::Depot, 1}, {"m3", SiteKind::Microgrid, 5}};
  return TransportNetwork(roads, sites);
}

RoadMask without(const TransportNetwork& net, NodeId a, NodeId b) {
  auto mask = net.all_up();
  mask[*net.find_road(a, b)] = 0;
  return mask;
}

struct Graph {
  std::vector<Road> roads;
  int n;
};

Graph random_graph(std::mt19937& rng, int n, double density) {
  Graph g{{}, n};
  std::uniform_int_distribution<int> len(1, 6);
  // spanning chain keeps the full graph connected
  for (int i = 1; i < n; ++i) g.roads.push_back({i - 1, i, len(rng) * 1000});
  std::bernoulli_distribution extra(density);
  for (int i = 0; i < n; ++i)
    for (int j = i + 2; j < n; ++j)
      if (extra(rng)) g.roads.push_back({i, j, len(rng) * 1000});
  return g;
}

std::vector<std::vector<std::int64_t>> floyd_warshall(const Graph& g, const RoadMask& mask) {
  std::vector<std::vector<std::int64_t>> d(g.n, std::vector<std::int64_t>(g.n, kUnreachable));
  for (int i = 0; i < g.n; ++i) d[i][i] = 0;
  for (std::size_t k = 0; k < g.roads.size(); ++k) {
    if (!mask[k]) continue;
    const auto& r = g.roads[k];
    d[r.a][r.b] = std::min(d[r.a][r.b], r.length_m);
    d[r.b][r.a] = std::min(d[r.b][r.a], r.length_m);
  }
  for (int k = 0; k < g.n; ++k)
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j)
        if (d[i][k] != kUnreachable && d[k][j] != kUnreachable) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

// Enumerates all simple paths; keeps the shortest, then lexicographically smallest.
void enumerate(const Graph& g, const RoadMask& mask, int at, int goal, std::vector<int>& path, std::int64_t len,
               std::vector<char>& used, std::int64_t& best_len, std::vector<int>& best) {
  if (at == goal) {
    if (len < best_len || (len == best_len && path < best)) {
      best_len = len;
      best = path;
    }
    return;
  }
  for (std::size_t k = 0; k < g.roads.size(); ++k) {
    if (!mask[k]) continue;
    const auto& r = g.roads[k];
    int next = r.a == at ? r.b : r.b == at ? r.a : -1;
    if (next < 0 || used[next]) continue;
    used[next] = 1;
    path.push_back(next);
    enumerate(g, mask, next, goal, path, len + r.length_m, used, best_len, best);
    path.pop_back();
    used[next] = 0;
  }
}

std::vector<Site> all_sites(int n) {
  std::vector<Site> sites;
  for (int i = 0; i < n; ++i) sites.push_back({"s" + std::to_string(i), SiteKind::Microgrid, i});
  return sites;
}

}  // namespace

TEST_CASE("damaged road lengthens the depot to microgrid trip from two to four intervals") {
  auto net = detour_net();
  auto before = shortest_paths(net, net.all_up());
  with_travel_times(before, 20.0, 1.0);
  CHECK(before.intervals[0][1] == 2);
  CHECK(before.paths[0][1] == std::vector<NodeId>{1, 4, 5});

  auto after = shortest_paths(net, without(net, 4, 5));
  with_travel_times(after, 20.0, 1.0);
  CHECK(after.intervals[0][1] == 4);
  CHECK(after.paths[0][1] == std::vector<NodeId>{1, 2, 3, 6, 5});
  CHECK(after.distance_m[0][1] == 80000);
}

TEST_CASE("single site gives a zero distance matrix") {
  TransportNetwork net({{1, 2, 5000}}, {{"m1", SiteKind::Microgrid, 1}});
  auto m = shortest_paths(net, net.all_up());
  REQUIRE(m.size() == 1);
  CHECK(m.distance_m[0][0] == 0);
  CHECK(m.paths[0][0] == std::vector<NodeId>{1});
}

TEST_CASE("unreachable pairs are encoded, not thrown") {
  auto net = detour_net();
  auto mask = without(net, 4, 5);
  mask[*net.find_road(1, 2)] = 0;
  auto m = shortest_paths(net, mask);
  with_travel_times(m, 20.0, 1.0);
  CHECK_FALSE(m.reachable(0, 1));
  CHECK(m.intervals[0][1] == kNoTrip);
  CHECK(m.paths[0][1].empty());
}

TEST_CASE("travel intervals round up") {
  CHECK(travel_intervals(35000, 20.0, 1.0) == 2);
  CHECK(travel_intervals(0, 20.0, 1.0) == 0);
  CHECK(travel_intervals(41000, 20.0, 1.0) == 3);
  CHECK(travel_intervals(40000, 20.0, 1.0) == 2);
  CHECK(travel_intervals(35000, 17.5, 1.0) == 2);
  CHECK(travel_intervals(kUnreachable, 20.0, 1.0) == kNoTrip);
  CHECK_THROWS_AS(travel_intervals(1000, 0.0, 1.0), mess::ConfigError);
  CHECK_THROWS_AS(travel_intervals(1000, 20.0, -1.0), mess::ConfigError);
  CHECK_THROWS_AS(travel_time_matrix({}, -3.0, 1.0), mess::ConfigError);
}

TEST_CASE("network validation") {
  CHECK_THROWS_AS(TransportNetwork({{1, 1, 10}}, {}), mess::ValidationError);
  CHECK_THROWS_AS(TransportNetwork({{1, 2, 0}}, {}), mess::ValidationError);
  CHECK_THROWS_AS(TransportNetwork({{1, 2, 10}, {2, 1, 10}}, {}), mess::ValidationError);
  CHECK_THROWS_AS(TransportNetwork({{1, 2, 10}}, {{"m", SiteKind::Microgrid, 7}}), mess::ValidationError);
  CHECK_THROWS_AS(TransportNetwork({{1, 2, 10}, {3, 4, 10}}, {}), mess::ValidationError);
}

TEST_CASE("shortest paths match Floyd-Warshall and path enumeration on random graphs") {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 3 + trial % 6;  // up to 8 nodes
    auto g = random_graph(rng, n, 0.4);
    TransportNetwork net(g.roads, all_sites(n));
    RoadMask mask(g.roads.size(), 1);
    std::bernoulli_distribution down(0.25);
    for (auto& f : mask) f = down(rng) ? 0 : 1;

    auto m = shortest_paths(net, mask);
    auto fw = floyd_warshall(g, mask);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        REQUIRE(m.distance_m[i][j] == fw[i][j]);
        std::vector<int> path{i}, best;
        std::vector<char> used(n, 0);
        used[i] = 1;
        std::int64_t best_len = kUnreachable;
        enumerate(g, mask, i, j, path, 0, used, best_len, best);
        CHECK(m.paths[i][j] == best);
        if (!best.empty()) CHECK(route_length_m(net, m.paths[i][j]) == m.distance_m[i][j]);
      }
  }
}

TEST_CASE("damage never shortens a trip and repair never lengthens one") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    auto g = random_graph(rng, 7, 0.35);
    TransportNetwork net(g.roads, all_sites(7));
    auto full = shortest_paths(net, net.all_up());
    with_travel_times(full, 20.0, 1.0);
    for (std::size_t k = 0; k < g.roads.size(); ++k) {
      auto mask = net.all_up();
      mask[k] = 0;
      auto cut = shortest_paths(net, mask);
      with_travel_times(cut, 20.0, 1.0);
      for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) {
          CHECK(cut.distance_m[i][j] >= full.distance_m[i][j]);
          CHECK(cut.distance_m[i][j] == cut.distance_m[j][i]);
          if (i != j && cut.reachable(i, j)) CHECK(cut.intervals[i][j] >= 1);
        }
    }
  }
}

TEST_CASE("travel cache returns the same matrices for the same mask") {
  auto net = detour_net();
  TravelCache cache(net);
  auto nodes = net.site_nodes();
  auto a = cache.paths(net.all_up(), nodes);
  auto b = cache.paths(net.all_up(), nodes);
  auto c = cache.paths(without(net, 4, 5), nodes);
  CHECK(a == b);
  CHECK(a != c);
  CHECK(cache.size() == 2);
}

TEST_CASE("advance: a three-interval trip leaves two intervals to go") {
  // m4 at node 10, m3 at node 8, 10-9-8 is 50 km at 20 km/h.
  TransportNetwork net({{10, 9, 25000}, {9, 8, 25000}}, {{"m4", SiteKind::Microgrid, 10}, {"m3", SiteKind::Microgrid, 8}});
  Motion motion{20.0, 1.0};
  auto m = shortest_paths(net, net.all_up());
  with_travel_times(m, motion.speed_kmh, motion.dt_h);
  REQUIRE(m.intervals[0][1] == 3);

  MessLocation loc = AtSite{0};
  auto next = advance_mess(net, loc, MoveTo{1}, net.all_up(), motion);
  auto* in = std::get_if<InTransit>(&next);
  REQUIRE(in);
  CHECK(in->remaining == 2);
  CHECK(in->route == std::vector<NodeId>{10, 9, 8});
  CHECK(in->progress_m == doctest::Approx(20000));

  next = advance_mess(net, next, Continue{}, net.all_up(), motion);
  in = std::get_if<InTransit>(&next);
  REQUIRE(in);
  CHECK(in->remaining == 1);
  CHECK(in->route == std::vector<NodeId>{9, 8});
  CHECK(in->progress_m == doctest::Approx(15000));

  next = advance_mess(net, next, Continue{}, net.all_up(), motion);
  CHECK(next == MessLocation{AtSite{1}});
}

TEST_CASE("advance: failure of the edge being traversed sends the vehicle back to its origin side") {
  TransportNetwork net({{10, 9, 25000}, {9, 8, 25000}}, {{"m4", SiteKind::Microgrid, 10}, {"m3", SiteKind::Microgrid, 8}});
  Motion motion{20.0, 1.0};
  MessLocation on_9_8 = InTransit{{9, 8}, 15000.0, 1};
  auto mask = without(net, 9, 8);

  auto arrival = committed_arrival(net, on_9_8, mask, motion);
  REQUIRE(arrival);
  CHECK(arrival->node == 9);
  CHECK(arrival->intervals == 1);

  auto next = advance_mess(net, on_9_8, Continue{}, mask, motion);
  CHECK(next == MessLocation{AtNode{9}});
  // re-dispatchable: holding is allowed and so is a move that avoids the failed road
  CHECK(advance_mess(net, next, Hold{}, mask, motion) == next);
  CHECK_THROWS_AS(advance_mess(net, next, MoveTo{1}, mask, motion), mess::ConsistencyError);
  auto back = advance_mess(net, next, MoveTo{0}, mask, motion);
  auto* in = std::get_if<InTransit>(&back);
  REQUIRE(in);
  CHECK(in->route == std::vector<NodeId>{9, 10});
}

TEST_CASE("advance: downstream damage reroutes toward the destination") {
  auto net = detour_net();
  Motion motion{20.0, 1.0};
  // sitting on node 4 on the way to node 5; 4-5 fails but the vehicle is not on it yet
  MessLocation at4 = InTransit{{4, 5}, 0.0, 1};
  auto mask = without(net, 4, 5);
  auto arrival = committed_arrival(net, at4, mask, motion);
  REQUIRE(arrival);
  CHECK(arrival->node == 5);
  CHECK(arrival->intervals == 5);  // 4-1-2-3-6-5 is 100 km
  auto next = advance_mess(net, at4, Continue{}, mask, motion);
  auto* in = std::get_if<InTransit>(&next);
  REQUIRE(in);
  CHECK(in->route == std::vector<NodeId>{1, 2, 3, 6, 5});
  CHECK(in->progress_m == 0.0);
  CHECK(in->remaining == 4);
}

TEST_CASE("advance: holding stays put and mismatched steps are rejected") {
  auto net = detour_net();
  Motion motion{20.0, 1.0};
  MessLocation at = AtSite{1};
  CHECK(advance_mess(net, at, Hold{}, net.all_up(), motion) == at);
  CHECK_THROWS_AS(advance_mess(net, at, Continue{}, net.all_up(), motion), mess::ConsistencyError);
  MessLocation moving = InTransit{{1, 4, 5}, 1000.0, 2};
  CHECK_THROWS_AS(advance_mess(net, moving, Hold{}, net.all_up(), motion), mess::ConsistencyError);
  CHECK_THROWS_AS(advance_mess(net, moving, MoveTo{0}, net.all_up(), motion), mess::ConsistencyError);
}

TEST_CASE("advance is total over random feasible steps") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    auto g = random_graph(rng, 6, 0.4);
    TransportNetwork net(g.roads, all_sites(6));
    Motion motion{20.0, 0.25};
    MessLocation loc = AtSite{0};
    for (int step = 0; step < 40; ++step) {
      RoadMask mask(g.roads.size(), 1);
      std::bernoulli_distribution down(0.2);
      for (auto& f : mask) f = down(rng) ? 0 : 1;
      MessStep s = Hold{};
      if (std::holds_alternative<InTransit>(loc)) {
        s = Continue{};
      } else {
        auto here = anchor_node(net, loc);
        std::uniform_int_distribution<std::size_t> pick(0, 5);
        auto target = pick(rng);
        if (!shortest_route(net, mask, here, net.sites()[target].node).empty()) s = MoveTo{target};
      }
      MessLocation next;
      REQUIRE_NOTHROW(next = advance_mess(net, loc, s, mask, motion));
      if (auto* in = std::get_if<InTransit>(&next)) CHECK(in->remaining >= 1);
      loc = next;
    }
  }
}
