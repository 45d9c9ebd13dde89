#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "lp_oracle.hpp"
#include "mess/error.hpp"
#include "mess/formulation.hpp"

using namespace mess;
using namespace mess::milp;

namespace {

SolveOptions exact() {
  SolveOptions o;
  o.rel_gap = 1e-9;
  return o;
}

// Power-flow state of one interval for the residual check.
grid::PowerFlowState flow_state(const grid::DistributionSystem& ds, const IntervalDispatch& d) {
  grid::PowerFlowState st;
  st.p_g.assign(ds.buses.size(), 0.0);
  st.q_g = st.p_g;
  for (std::size_t m = 0; m < ds.microgrids.size(); ++m) {
    st.p_g[ds.microgrids[m].bus] = d.p_g[m];
    st.q_g[ds.microgrids[m].bus] = d.q_g[m];
  }
  st.p_r = d.p_r;
  st.q_r = d.q_r;
  st.p = d.p;
  st.q = d.q;
  st.v = d.v;
  return st;
}

}  // namespace

TEST_CASE("routing rows match the closed form") {
  auto h = fixtures::toy_horizon(3, {1.0, 1.2});
  auto bm = build_model(h.in);
  auto counts = bm.model.marker_counts();
  std::size_t nodes = 0, cuts = 0;
  for (const auto& layer : h.in.layers[0]) {
    cuts += static_cast<std::size_t>(layer.horizon());
    for (const auto& n : layer.nodes()) nodes += !n.sink;
  }
  CHECK(counts["route.cut"] == cuts);
  CHECK(counts["route.source"] + counts["route.flow"] == nodes);
  CHECK(counts["route.source"] == 2);
  // every arc of every layer is one binary
  std::size_t arcs = 0;
  for (const auto& layer : h.in.layers[0]) arcs += layer.arcs().size();
  std::size_t zetas = 0;
  for (const auto& v : bm.model.vars()) zetas += v.name.rfind("z_", 0) == 0;
  CHECK(zetas == arcs);
}

TEST_CASE("nonanticipativity ties each first-interval arc to the weighted average") {
  auto h = fixtures::toy_horizon(2, {0.9, 1.0, 1.3}, {0.2, 0.5, 0.3});
  auto bm = build_model(h.in);
  const auto& model = bm.model;
  for (std::size_t s = 0; s < 3; ++s) {
    const auto& layer = h.in.layers[0][s];
    for (auto a : layer.cut_set(0)) {
      const auto z = bm.vars[s].zeta[0][a];
      int rows = 0;
      for (const auto& r : model.rows()) {
        if (r.marker != "na.route") continue;
        for (const auto& t : r.terms)
          if (t.var == z) {
            ++rows;
            CHECK(r.sense == Sense::Eq);
            const bool own = r.name.back() == static_cast<char>('0' + s);
            const double g = h.in.scenarios.scenarios[s].probability;
            CHECK(t.coef == doctest::Approx(own ? 1.0 - g : -g));
          }
      }
      CHECK(rows == 3);
    }
  }
  // branch statuses likewise
  CHECK(model.marker_counts().at("na.alpha") == 3 * 3);
  auto pair = h;
  pair.in.options.pairwise_nonanticipativity = true;
  auto pm = build_model(pair.in);
  CHECK(pm.model.marker_counts().at("na.alpha") == 3 * 2);
  auto a = solve(bm.model, exact()), b = solve(pm.model, exact());
  REQUIRE(a.has_solution());
  REQUIRE(b.has_solution());
  CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-7));
}

TEST_CASE("single scenario with the vehicle parked reduces to interruption and generation") {
  tsn::LayerRules parked;
  parked.free_departures = false;
  parked.initial_departure = false;
  auto h = fixtures::toy_horizon(1, {1.0}, {}, parked);
  auto bm = build_model(h.in);
  CHECK(bm.model.marker_counts().count("mess.charge_arc") == 0);
  auto sol = solve(bm.model, exact());
  REQUIRE(sol.status == Status::Optimal);
  auto c = cost_breakdown(h.in, bm, sol.x);
  CHECK(c.battery == 0.0);
  CHECK(c.transport == 0.0);
  CHECK(sol.objective == doctest::Approx(c.interruption + c.generation).epsilon(1e-9));
}

TEST_CASE("bundled solve equals pruned enumeration on a two-scenario window") {
  auto h = fixtures::toy_horizon(2, {1.0, 1.4});
  auto bm = build_model(h.in);
  long leaves = 0;
  auto truth = oracle::enumerate_pruned(bm.model, &leaves);
  REQUIRE(truth.outcome == oracle::Outcome::Optimal);
  auto sol = solve(bm.model, exact());
  REQUIRE(sol.status == Status::Optimal);
  CHECK(leaves > 10);
  CHECK(sol.objective == doctest::Approx(truth.objective).epsilon(1e-6));
  CHECK(audit(bm.model, sol.x).ok(1e-6));
}

TEST_CASE("solution audit, routing paths and power flow") {
  auto h = fixtures::toy_horizon(3, {1.0, 1.25});
  auto bm = build_model(h.in);
  auto sol = solve(bm.model, exact());
  REQUIRE(sol.status == Status::Optimal);
  CHECK(audit(bm.model, sol.x).ok(1e-6));
  const auto& ds = *h.in.grid;
  for (std::size_t s = 0; s < 2; ++s) {
    const auto& layer = h.in.layers[0][s];
    // one arc per interval and a connected path
    std::size_t at = layer.source();
    int t = 0;
    while (t < layer.horizon()) {
      int on = 0;
      for (auto a : layer.cut_set(t)) on += sol.x[bm.vars[s].zeta[0][a]] > 0.5;
      CHECK(on == 1);
      std::size_t next = static_cast<std::size_t>(-1);
      for (auto a : layer.out_arcs(at))
        if (sol.x[bm.vars[s].zeta[0][a]] > 0.5) next = a;
      REQUIRE(next != static_cast<std::size_t>(-1));
      t = layer.arcs()[next].arrive;
      at = layer.arcs()[next].head;
    }
    CHECK(layer.nodes()[at].sink);
    for (int k = 0; k < 3; ++k) {
      auto d = extract(h.in, bm, sol.x, s, k);
      auto report = grid::validate_radial(ds, d.alpha);
      CHECK(report.ok);
      CHECK(grid::lindistflow_residual(ds, d.alpha, flow_state(ds, d)).max() <= 1e-6);
      // storage only where the vehicle holds at a microgrid
      const auto& arc = layer.arcs()[d.arc[0]];
      for (std::size_t m = 0; m < 2; ++m) {
        const bool there = arc.kind == tsn::ArcKind::Holding &&
                           h.in.microgrid_of_site.count(layer.sites()[arc.from_site].label) &&
                           h.in.microgrid_of_site.at(layer.sites()[arc.from_site].label) == m;
        if (!there) {
          CHECK(d.p_ch[0][m] == 0.0);
          CHECK(d.p_dch[0][m] == 0.0);
        }
        CHECK(d.p_ch[0][m] * d.p_dch[0][m] <= 1e-12);
      }
    }
  }
}

TEST_CASE("objective decomposes into its four terms") {
  auto h = fixtures::toy_horizon(3, {1.0, 1.25, 0.8});
  for (auto weighting : {TransportWeighting::Expected, TransportWeighting::Nominal}) {
    h.in.options.transport = weighting;
    auto bm = build_model(h.in);
    auto sol = solve(bm.model, exact());
    REQUIRE(sol.has_solution());
    auto c = cost_breakdown(h.in, bm, sol.x);
    CHECK(c.total() == doctest::Approx(sol.objective).epsilon(1e-9));
    CHECK(c.interruption > 0.0);
    CHECK(c.generation > 0.0);
    CHECK(c.battery > 0.0);
    CHECK(c.transport > 0.0);
  }
}

TEST_CASE("permuting scenarios leaves the optimum unchanged") {
  auto h = fixtures::toy_horizon(2, {0.8, 1.0, 1.5}, {0.5, 0.3, 0.2});
  auto a = solve(build_model(h.in).model, exact());
  auto p = h;
  p.in.grid = h.in.grid;
  std::reverse(p.in.scenarios.scenarios.begin(), p.in.scenarios.scenarios.end());
  std::reverse(p.in.layers[0].begin(), p.in.layers[0].end());
  auto b = solve(build_model(p.in).model, exact());
  REQUIRE(a.has_solution());
  REQUIRE(b.has_solution());
  CHECK(a.objective == doctest::Approx(b.objective).epsilon(1e-7));
}

TEST_CASE("re-optimizing the identical single scenario reproduces the plan") {
  auto h = fixtures::toy_horizon(3, {1.1});
  auto bm = build_model(h.in);
  auto sol = solve(bm.model, exact());
  REQUIRE(sol.status == Status::Optimal);
  auto first = extract(h.in, bm, sol.x, 0, 0);
  std::vector<ArcKey> keys{arc_key(h.in.layers[0][0], first.arc[0])};
  auto r = deterministic_reopt(h.in, first.alpha, keys, exact());
  REQUIRE_FALSE(r.shed_all);
  CHECK(r.solution.objective == doctest::Approx(sol.objective).epsilon(1e-7));
  CHECK(r.dispatch.alpha == first.alpha);
  double restored_a = 0.0, restored_b = 0.0;
  for (double v : r.dispatch.p_r) restored_a += v;
  for (double v : first.p_r) restored_b += v;
  CHECK(restored_a == doctest::Approx(restored_b).epsilon(1e-6));
}

TEST_CASE("re-optimization matches enumeration with fixed first-stage decisions") {
  auto h = fixtures::toy_horizon(2, {1.0, 1.3});
  auto bm = build_model(h.in);
  auto sol = solve(bm.model, exact());
  REQUIRE(sol.has_solution());
  auto first = extract(h.in, bm, sol.x, 0, 0);
  auto realized = h.in.scenarios.scenarios[1];
  auto single = h;
  single.in.grid = h.in.grid;
  single.in.scenarios.scenarios = {expected_scenario(h.in.scenarios, realized)};
  single.in.layers[0].resize(1);
  std::vector<ArcKey> keys{arc_key(h.in.layers[0][0], first.arc[0])};
  auto r = deterministic_reopt(single.in, first.alpha, keys, exact());
  REQUIRE_FALSE(r.shed_all);
  auto fixed = single.in;
  fixed.fixed_alpha = first.alpha;
  fixed.fixed_first_arc = {keys[0]};
  auto truth = oracle::enumerate_pruned(build_model(fixed).model);
  REQUIRE(truth.outcome == oracle::Outcome::Optimal);
  CHECK(r.solution.objective == doctest::Approx(truth.objective).epsilon(1e-6));
}

TEST_CASE("realized load beyond every scenario is shed down to what generation covers") {
  auto h = fixtures::toy_horizon(2, {1.0});
  auto bm = build_model(h.in);
  auto sol = solve(bm.model, exact());
  REQUIRE(sol.has_solution());
  auto first = extract(h.in, bm, sol.x, 0, 0);
  auto heavy = h;
  heavy.in.grid = h.in.grid;
  for (auto& row : heavy.in.scenarios.scenarios[0].load_p)
    for (auto& p : row) p *= 20.0;
  std::vector<ArcKey> keys{arc_key(h.in.layers[0][0], first.arc[0])};
  auto r = deterministic_reopt(heavy.in, first.alpha, keys, exact());
  REQUIRE_FALSE(r.shed_all);
  const auto& ds = *h.in.grid;
  double restored = 0.0, demand = 0.0, supply = 0.0;
  for (std::size_t i = 0; i < ds.buses.size(); ++i) {
    restored += r.dispatch.p_r[i];
    demand += heavy.in.scenarios.scenarios[0].load_p[0][i] / grid::kBaseKva;
    CHECK(r.dispatch.p_r[i] <= heavy.in.scenarios.scenarios[0].load_p[0][i] / grid::kBaseKva + 1e-9);
  }
  for (std::size_t m = 0; m < ds.microgrids.size(); ++m) {
    supply += ds.microgrids[m].p_dg_max + r.dispatch.p_dch[0][m];
    restored += r.dispatch.local[m];
  }
  CHECK(restored <= supply + 1e-7);
  CHECK(restored < demand);
}

TEST_CASE("infeasible fixed topology falls back to shedding everything") {
  auto h = fixtures::toy_horizon(1, {1.0});
  std::vector<std::uint8_t> open(h.in.grid->branches.size(), 0);  // leaves load buses unfed
  auto r = deterministic_reopt(h.in, open, {}, exact());
  CHECK(r.shed_all);
  for (double v : r.dispatch.p_r) CHECK(v == 0.0);
  CHECK(r.dispatch.e_mess == h.in.mess_energy);
}

TEST_CASE("damaged branches stay open and dead buses drop out") {
  auto h = fixtures::toy_horizon(2, {1.0});
  // cut bus 2 off: both of its branches fail in interval 1
  h.in.scenarios.scenarios[0].branch_up[1][1] = 0;
  h.in.scenarios.scenarios[0].branch_up[1][2] = 0;
  auto bm = build_model(h.in);
  CHECK(bm.damaged == std::vector<std::uint8_t>{0, 1, 1, 0, 0});
  CHECK(bm.dead == std::vector<std::uint8_t>{0, 0, 1, 0, 0});
  CHECK(bm.alpha_fixed[1] == 0);
  CHECK(bm.alpha_fixed[2] == 0);
  auto sol = solve(bm.model, exact());
  REQUIRE(sol.has_solution());
  auto d = extract(h.in, bm, sol.x, 0, 0);
  CHECK(d.p_r[2] == 0.0);
  auto report = grid::validate_radial(*h.in.grid, d.alpha, std::vector<std::uint8_t>{1, 0, 0, 1, 1});
  CHECK(report.ok);
  CHECK(report.closed == 2);  // four live buses, two microgrids
}

TEST_CASE("input errors") {
  auto h = fixtures::toy_horizon(2, {1.0});
  auto bad = h;
  bad.in.grid = h.in.grid;
  bad.in.scenarios.scenarios.clear();
  CHECK_THROWS_AS(build_model(bad.in), ConfigError);
  bad = h;
  bad.in.grid = h.in.grid;
  bad.in.mess_energy.clear();
  CHECK_THROWS_AS(build_model(bad.in), ConsistencyError);
  bad = h;
  bad.in.grid = h.in.grid;
  bad.in.horizon = 3;
  CHECK_THROWS_AS(build_model(bad.in), ConsistencyError);
  bad = h;
  bad.in.grid = h.in.grid;
  bad.in.fixed_first_arc = {ArcKey{"A", "B", 0, 1, tsn::ArcKind::Moving}};
  CHECK_THROWS_AS(build_model(bad.in), InfeasibleLayer);
}
