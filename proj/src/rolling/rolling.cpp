#include "mess/rolling.hpp"

#include <algorithm>
#include <cmath>
#include <variant>

#include <fmt/format.h>

#include "mess/error.hpp"

namespace mess::rolling {

namespace {

constexpr double kKw = grid::kBaseKva;
constexpr std::uint64_t kBranchElementBase = 1000000;

std::string waypoint_label(transport::NodeId node) { return fmt::format("node{}", node); }

transport::MessLocation parked(const transport::TransportNetwork& net, transport::NodeId node) {
  if (auto s = net.site_at(node)) return transport::AtSite{*s};
  return transport::AtNode{node};
}

std::string label(const transport::TransportNetwork& net, const transport::MessLocation& loc) {
  if (const auto* s = std::get_if<transport::AtSite>(&loc)) return net.sites()[s->site].id;
  if (const auto* n = std::get_if<transport::AtNode>(&loc)) return waypoint_label(n->node);
  return "~";
}

transport::Motion motion_of(const io::Case& c, std::size_t w) { return {c.fleet[w].speed_kmh, c.dt_h}; }

scenario::AvailabilityModel conditioned(scenario::AvailabilityModel m, bool up) {
  m.initially_up = up;
  return m;
}

// A trip that can neither go on nor turn back leaves the vehicle where it is.
void settle(const io::Case& c, RollingState& state, const Realization& real) {
  for (std::size_t w = 0; w < state.fleet.size(); ++w) {
    auto& loc = state.fleet[w].loc;
    if (!std::holds_alternative<transport::InTransit>(loc)) continue;
    auto arr = transport::committed_arrival(c.net(), loc, real.road_up[state.t], motion_of(c, w));
    if (arr && arr->intervals == 0) loc = parked(c.net(), arr->node);
  }
}

struct LayerPlan {
  std::vector<tsn::LayerSite> sites;
  tsn::LayerStart start;
};

LayerPlan layer_plan(const io::Case& c, const VehicleState& v, const transport::RoadMask& mask_now,
                     const transport::Motion& motion) {
  const auto& net = c.net();
  LayerPlan p;
  for (const auto& s : net.sites())
    p.sites.push_back({s.id, s.node,
                       s.kind == transport::SiteKind::Microgrid ? tsn::SiteRole::Microgrid : tsn::SiteRole::Depot});
  auto site_of_node = [&](transport::NodeId node) -> std::size_t {
    if (auto s = net.site_at(node)) return *s;
    p.sites.push_back({waypoint_label(node), node, tsn::SiteRole::Waypoint});
    return p.sites.size() - 1;
  };
  if (const auto* s = std::get_if<transport::AtSite>(&v.loc)) {
    p.start = {s->site, 0};
  } else if (const auto* n = std::get_if<transport::AtNode>(&v.loc)) {
    p.start = {site_of_node(n->node), 0};
  } else {
    auto arr = transport::committed_arrival(net, v.loc, mask_now, motion);
    if (!arr) throw ConsistencyError("vehicle in transit without a committed arrival");
    p.start = {site_of_node(arr->node), arr->intervals};
  }
  return p;
}

tsn::TimeSpaceNetwork layer_for(const io::Case& c, const LayerPlan& plan, const scenario::Scenario& sc, int length,
                                const tsn::LayerRules& rules, std::size_t w, std::size_t s,
                                transport::TravelCache& cache) {
  std::vector<transport::NodeId> terminals;
  for (const auto& site : plan.sites) terminals.push_back(site.node);
  tsn::LayerInput li;
  li.sites = plan.sites;
  li.horizon = length;
  li.start = plan.start;
  li.rules = rules;
  li.vehicle = w;
  li.scenario = s;
  for (int tau = 0; tau < length; ++tau) {
    auto paths = cache.paths(sc.road_up[static_cast<std::size_t>(tau)], terminals);
    li.travel.push_back(transport::travel_time_matrix(paths->distance_m, c.fleet[w].speed_kmh, c.dt_h));
  }
  return tsn::build_tsn(li);
}

tsn::LayerRules rules_for(Mode mode, int t, bool depot_sinks) {
  tsn::LayerRules r;
  r.depot_sinks_only = depot_sinks;
  r.free_departures = mode == Mode::Dynamic;
  r.initial_departure = mode == Mode::Dynamic || t == 0;
  return r;
}

// Layers for every vehicle and scenario; a final roll that cannot reach a
// depot in time falls back to free sinks.
std::vector<std::vector<tsn::TimeSpaceNetwork>> build_layers(const io::Case& c, const RollingState& state,
                                                             const scenario::ScenarioSet& set, int length, Mode mode,
                                                             bool depot_sinks, const transport::RoadMask& mask_now,
                                                             transport::TravelCache& cache) {
  std::vector<std::vector<tsn::TimeSpaceNetwork>> layers(state.fleet.size());
  for (std::size_t w = 0; w < state.fleet.size(); ++w) {
    const auto plan = layer_plan(c, state.fleet[w], mask_now, motion_of(c, w));
    for (std::size_t s = 0; s < set.size(); ++s) {
      try {
        layers[w].push_back(
            layer_for(c, plan, set.scenarios[s], length, rules_for(mode, state.t, depot_sinks), w, s, cache));
      } catch (const InfeasibleLayer&) {
        if (!depot_sinks) throw;
        layers[w].push_back(
            layer_for(c, plan, set.scenarios[s], length, rules_for(mode, state.t, false), w, s, cache));
      }
    }
  }
  return layers;
}

milp::HorizonInput base_input(const io::Case& c, const RollingState& state, int length) {
  milp::HorizonInput in;
  in.grid = &c.grid;
  for (std::size_t w = 0; w < state.fleet.size(); ++w) {
    in.fleet.push_back(c.fleet[w]);
    in.mess_energy.push_back(state.fleet[w].energy);
  }
  in.microgrid_of_site = c.microgrid_of_site();
  in.horizon = length;
  in.dt_h = c.dt_h;
  in.mg_energy = state.mg_energy;
  in.options = c.formulation;
  return in;
}

scenario::Scenario realized_slice(const Realization& real, int t) {
  scenario::Scenario s;
  s.load_p = {real.load_p[t]};
  s.load_q = {real.load_q[t]};
  s.road_up = {real.road_up[t]};
  s.branch_up = {real.branch_up[t]};
  return s;
}

scenario::Scenario truncate(scenario::Scenario s, int n) {
  s.load_p.resize(n);
  s.load_q.resize(n);
  s.road_up.resize(n);
  s.branch_up.resize(n);
  return s;
}

// Export-only solving writes one MPS per model; the external solution is
// looked for next to it.
milp::SolveOptions roll_options(milp::SolveOptions o, int t, const char* tag) {
  if (o.mode != milp::SolverMode::ExportOnly) return o;
  const std::string stem = fmt::format("{}_t{:02d}_{}", o.export_path, t, tag);
  o.export_path = stem + ".mps";
  o.solution_path = stem + ".sol";
  return o;
}

}  // namespace

Mode parse_mode(const std::string& s) {
  if (s == "dynamic") return Mode::Dynamic;
  if (s == "allocation") return Mode::Allocation;
  if (s == "no-mess") return Mode::NoMess;
  throw ConfigError("mode must be dynamic, allocation or no-mess, got '" + s + "'");
}

const char* to_string(Mode m) {
  switch (m) {
    case Mode::Dynamic:
      return "dynamic";
    case Mode::Allocation:
      return "allocation";
    case Mode::NoMess:
      return "no-mess";
  }
  return "?";
}

Realization realize(const io::Case& c, std::uint64_t seed) {
  const int H = c.horizon;
  Realization r;
  const auto base = scenario::mix_seed(seed, static_cast<std::uint64_t>(scenario::Stream::Realization));
  auto loads = scenario::sample_load(c.forecast(0, H), base, 0, c.load_sd, 0);
  r.load_p = std::move(loads.p_kw);
  r.load_q = std::move(loads.q_kvar);
  r.road_up.assign(H, transport::RoadMask(c.road_outage.size(), 1));
  r.branch_up.assign(H, std::vector<std::uint8_t>(c.branch_outage.size(), 1));
  for (std::size_t k = 0; k < c.road_outage.size(); ++k) {
    auto rng = scenario::substream(seed, scenario::Stream::Realization, 0, k);
    auto traj = scenario::sample_availability(c.road_outage[k], H, c.dt_h, rng);
    for (int t = 0; t < H; ++t) r.road_up[t][k] = traj[t];
  }
  for (std::size_t k = 0; k < c.branch_outage.size(); ++k) {
    auto rng = scenario::substream(seed, scenario::Stream::Realization, 0, kBranchElementBase + k);
    auto traj = scenario::sample_availability(c.branch_outage[k], H, c.dt_h, rng);
    for (int t = 0; t < H; ++t) r.branch_up[t][k] = traj[t];
  }
  auto events = c.events;
  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.interval < b.interval; });
  for (const auto& e : events)
    for (int t = e.interval; t < H; ++t) (e.kind == io::ElementKind::Road ? r.road_up[t] : r.branch_up[t])[e.index] = e.up;
  return r;
}

RollingState initial_state(const io::Case& c, Mode mode) {
  RollingState s;
  if (mode != Mode::NoMess)
    for (std::size_t w = 0; w < c.fleet.size(); ++w)
      s.fleet.push_back({transport::AtSite{c.fleet_depot[w]}, c.fleet[w].soc_init * c.fleet[w].capacity});
  for (const auto& m : c.grid.microgrids) s.mg_energy.push_back(m.e_init);
  s.alpha.assign(c.grid.branches.size(), 0);
  return s;
}

Window prepare_window(const io::Case& c, const RollingState& state, const Realization& real, Mode mode,
                      std::uint64_t seed, transport::TravelCache& cache) {
  const int t = state.t;
  Window win;
  win.t = t;
  win.length = std::min(c.prediction, c.horizon - t);
  win.depot_sinks = t + c.prediction > c.horizon;

  scenario::UncertaintyModel um;
  um.loads = c.forecast(t, win.length);
  for (std::size_t k = 0; k < c.road_outage.size(); ++k)
    um.roads.push_back(conditioned(c.road_outage[k], real.road_up[t][k]));
  for (std::size_t k = 0; k < c.branch_outage.size(); ++k)
    um.branches.push_back(conditioned(c.branch_outage[k], real.branch_up[t][k]));
  um.dt_h = c.dt_h;
  um.sd_ratio = c.load_sd;
  um.exact_intervals = 1;
  auto all = scenario::generate_scenarios(um, c.scenarios_generated, scenario::mix_seed(seed, 1000 + t));
  win.scenarios = scenario::reduce_scenarios(all, c.scenarios_kept, scenario::default_weights(um));

  win.input = base_input(c, state, win.length);
  win.input.scenarios = win.scenarios;
  win.input.layers =
      build_layers(c, state, win.scenarios, win.length, mode, win.depot_sinks, real.road_up[t], cache);
  return win;
}

TimelineReport run(const io::Case& c, const RunOptions& opts) {
  io::validate(c);
  const auto& net = c.net();
  const auto real = realize(c, opts.seed);
  transport::TravelCache cache(net);
  auto state = initial_state(c, opts.mode);
  const std::size_t W = state.fleet.size(), M = c.grid.microgrids.size();

  TimelineReport report;
  report.case_name = c.name;
  report.mode = opts.mode;
  report.seed = opts.seed;

  for (int t = 0; t < c.horizon; ++t) {
    state.t = t;
    settle(c, state, real);
    IntervalRecord rec;
    rec.t = t;
    rec.branch_up = real.branch_up[t];
    rec.load_p = real.load_p[t];
    rec.mg_energy_start = state.mg_energy;

    auto win = prepare_window(c, state, real, opts.mode, opts.seed, cache);
    rec.window = win.length;
    rec.scenarios = win.scenarios.size();

    std::vector<std::uint8_t> alpha = state.alpha;
    std::vector<milp::ArcKey> keys(W);
    milp::IntervalDispatch dispatch;
    bool planned = false;
    try {
      auto bm = milp::build_model(win.input);
      auto plan_opts = roll_options(c.solver, t, "plan");
      plan_opts.heuristic = milp::topology_heuristic(win.input, bm);
      auto sol = milp::solve(bm.model, plan_opts);
      rec.status = sol.status;
      rec.nodes = sol.nodes;
      if (sol.has_solution()) {
        planned = true;
        rec.gap = sol.gap;
        rec.plan_objective = sol.objective;
        rec.routing_violations = milp::routing_violations(win.input, bm, sol.x);
        rec.damaged = bm.damaged;
        auto first = milp::extract(win.input, bm, sol.x, 0, 0);
        alpha = first.alpha;
        for (std::size_t w = 0; w < W; ++w) keys[w] = milp::arc_key(win.input.layers[w][0], first.arc[w]);

        // dispatch against the realized interval
        const int len = c.reopt == io::ReoptPolicy::RemainingHorizon ? win.length : 1;
        auto expected = truncate(milp::expected_scenario(win.scenarios, realized_slice(real, t)), len);
        scenario::ScenarioSet single;
        single.scenarios = {expected};
        auto in = base_input(c, state, len);
        in.scenarios = single;
        in.layers = build_layers(c, state, single, len, opts.mode, win.depot_sinks && len == win.length,
                                 real.road_up[t], cache);
        in.extra_damaged = bm.damaged;
        auto r = milp::deterministic_reopt(in, alpha, keys, roll_options(c.solver, t, "dispatch"));
        rec.shed_all = r.shed_all;
        dispatch = r.dispatch;
      }
    } catch (const InfeasibleLayer&) {
      rec.status = milp::Status::Infeasible;
    }
    if (!planned) {
      rec.hard_infeasible = true;
      rec.shed_all = true;
      auto in = base_input(c, state, 1);
      dispatch = milp::shed_all_dispatch(in, alpha, std::vector<std::size_t>(W, milp::kNone));
      for (std::size_t w = 0; w < W; ++w) {
        keys[w].kind = std::holds_alternative<transport::InTransit>(state.fleet[w].loc) ? tsn::ArcKind::Committed
                                                                                         : tsn::ArcKind::Holding;
        keys[w].from = label(net, state.fleet[w].loc);
        keys[w].to = keys[w].from;
        keys[w].depart = 0;
        keys[w].arrive = 1;
      }
    }

    // implement
    for (std::size_t k = 0; k < alpha.size(); ++k)
      if (alpha[k] != state.alpha[k]) report.topology.push_back({t, c.grid.branches[k].id, alpha[k] != 0});
    state.alpha = alpha;
    rec.dispatch = dispatch;
    for (std::size_t w = 0; w < W; ++w) {
      const auto& spec = c.fleet[w];
      auto& v = state.fleet[w];
      VehicleRecord vr;
      vr.start = label(net, v.loc);
      vr.arc = keys[w];
      vr.energy_start = v.energy;
      transport::MessStep step = transport::Hold{};
      if (keys[w].kind == tsn::ArcKind::Moving) step = transport::MoveTo{net.site_index(keys[w].to)};
      if (keys[w].kind == tsn::ArcKind::Committed) step = transport::Continue{};
      vr.moving = keys[w].kind != tsn::ArcKind::Holding;
      v.loc = transport::advance_mess(net, v.loc, step, real.road_up[t], motion_of(c, w));
      double ch = 0.0, dch = 0.0;
      for (std::size_t m = 0; m < M; ++m) {
        ch += dispatch.p_ch[w][m];
        dch += dispatch.p_dch[w][m];
      }
      v.energy = v.energy + c.dt_h * (spec.eta_ch * ch - dch / spec.eta_dch);
      vr.energy_end = v.energy;
      vr.end = label(net, v.loc);
      if (const auto* in = std::get_if<transport::InTransit>(&v.loc)) vr.road_end = net.find_road(in->route[0], in->route[1]);
      rec.cost.battery += spec.cost_bat_per_kwh * (ch + dch) * kKw * c.dt_h;
      if (vr.moving) rec.cost.transport += spec.cost_tran_per_h * c.dt_h;
      rec.vehicles.push_back(vr);
    }
    for (std::size_t m = 0; m < M; ++m) {
      const auto& mg = c.grid.microgrids[m];
      state.mg_energy[m] -= c.dt_h * dispatch.p_dg[m];
      rec.cost.generation += mg.cost_gen_per_kwh * dispatch.p_dg[m] * kKw * c.dt_h;
      const double pl = real.load_p[t][c.grid.local_load_index(m)];
      rec.cost.interruption += mg.local_cost_per_kwh * (pl - dispatch.local[m] * kKw) * c.dt_h;
    }
    for (std::size_t i = 0; i < c.grid.buses.size(); ++i) {
      const auto& bus = c.grid.buses[i];
      const double pd = real.load_p[t][i], pr = dispatch.p_r[i] * kKw;
      rec.cost.interruption += bus.cost_per_kwh * (pd - pr) * c.dt_h;
      rec.demand_kw += pd;
      rec.restored_kw += pr;
      if (bus.critical) {
        rec.critical_demand_kw += pd;
        rec.critical_restored_kw += pr;
      }
    }
    report.intervals.push_back(std::move(rec));
  }
  return report;
}

Metrics compute_metrics(const TimelineReport& report) {
  Metrics m;
  double d = 0.0, r = 0.0, cd = 0.0, cr = 0.0;
  for (const auto& rec : report.intervals) {
    m.cost.interruption += rec.cost.interruption;
    m.cost.generation += rec.cost.generation;
    m.cost.battery += rec.cost.battery;
    m.cost.transport += rec.cost.transport;
    d += rec.demand_kw;
    r += rec.restored_kw;
    cd += rec.critical_demand_kw;
    cr += rec.critical_restored_kw;
    m.fallbacks += rec.shed_all;
  }
  auto pct = [](double num, double den) { return den > 0.0 ? std::clamp(100.0 * num / den, 0.0, 100.0) : 100.0; };
  m.restoration_total = pct(r, d);
  m.restoration_critical = pct(cr, cd);
  m.restoration_noncritical = pct(r - cr, d - cd);
  return m;
}

}  // namespace mess::rolling
