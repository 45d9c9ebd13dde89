#pragma once

#include <string>
#include <vector>

#include "mess/grid.hpp"

namespace fixtures {

// 33-bus radial test feeder (Baran & Wu), 12.66 kV, with its five tie lines
// as the last five branches.
struct Line {
  int from, to;
  double r_ohm, x_ohm;
};

inline const std::vector<Line>& lines33() {
  static const std::vector<Line> lines{
      {1, 2, 0.0922, 0.0470},  {2, 3, 0.4930, 0.2511},  {3, 4, 0.3660, 0.1864},  {4, 5, 0.3811, 0.1941},
      {5, 6, 0.8190, 0.7070},  {6, 7, 0.1872, 0.6188},  {7, 8, 0.7114, 0.2351},  {8, 9, 1.0300, 0.7400},
      {9, 10, 1.0440, 0.7400}, {10, 11, 0.1966, 0.0650}, {11, 12, 0.3744, 0.1238}, {12, 13, 1.4680, 1.1550},
      {13, 14, 0.5416, 0.7129}, {14, 15, 0.5910, 0.5260}, {15, 16, 0.7463, 0.5450}, {16, 17, 1.2890, 1.7210},
      {17, 18, 0.7320, 0.5740}, {2, 19, 0.1640, 0.1565}, {19, 20, 1.5042, 1.3554}, {20, 21, 0.4095, 0.4784},
      {21, 22, 0.7089, 0.9373}, {3, 23, 0.4512, 0.3083}, {23, 24, 0.8980, 0.7091}, {24, 25, 0.8960, 0.7011},
      {6, 26, 0.2030, 0.1034}, {26, 27, 0.2842, 0.1447}, {27, 28, 1.0590, 0.9337}, {28, 29, 0.8042, 0.7006},
      {29, 30, 0.5075, 0.2585}, {30, 31, 0.9744, 0.9630}, {31, 32, 0.3105, 0.3619}, {32, 33, 0.3410, 0.5302},
      {21, 8, 2.0, 2.0},       {9, 15, 2.0, 2.0},       {12, 22, 2.0, 2.0},      {18, 33, 0.5, 0.5},
      {25, 29, 0.5, 0.5}};
  return lines;
}

inline const std::vector<std::pair<double, double>>& loads33() {
  static const std::vector<std::pair<double, double>> loads{
      {0, 0},     {100, 60},  {90, 40},   {120, 80},  {60, 30},  {60, 20},   {200, 100}, {200, 100}, {60, 20},
      {60, 20},   {45, 30},   {60, 35},   {60, 35},   {120, 80}, {60, 10},   {60, 20},   {60, 20},   {90, 40},
      {90, 40},   {90, 40},   {90, 40},   {90, 40},   {90, 50},  {420, 200}, {420, 200}, {60, 25},   {60, 25},
      {60, 20},   {120, 70},  {200, 600}, {150, 70},  {210, 100}, {60, 40}};
  return loads;
}

/// One 33-bus feeder with a microgrid at bus 14; ties and the branches in
/// `extra_switches` (1-based end pairs) are switchable.
inline mess::grid::DistributionSystem feeder33(std::vector<std::pair<int, int>> extra_switches = {}) {
  mess::grid::DistributionSystem ds;
  const auto& loads = loads33();
  for (int i = 0; i < 33; ++i) {
    mess::grid::Bus b;
    b.id = std::to_string(i + 1);
    b.p_kw = loads[i].first;
    b.q_kvar = loads[i].second;
    b.critical = (i % 4 == 1);
    b.cost_per_kwh = b.critical ? 10.0 : 2.0;
    ds.buses.push_back(b);
  }
  const auto& lines = lines33();
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto& l = lines[k];
    mess::grid::Branch br;
    br.id = std::to_string(l.from) + "-" + std::to_string(l.to);
    br.from = static_cast<std::size_t>(l.from - 1);
    br.to = static_cast<std::size_t>(l.to - 1);
    br.r_pu = mess::grid::ohm_to_pu(l.r_ohm, 12.66);
    br.x_pu = mess::grid::ohm_to_pu(l.x_ohm, 12.66);
    br.s_max_pu = 4.0;
    br.switchable = k >= 32;
    for (auto [a, b] : extra_switches)
      if ((a == l.from && b == l.to) || (a == l.to && b == l.from)) br.switchable = true;
    ds.branches.push_back(br);
  }
  mess::grid::Microgrid mg;
  mg.id = "m1";
  mg.bus = 13;
  mg.p_dg_max = 1.8;
  mg.q_dg_max = 1.35;
  mg.e_max = 34.5;
  mg.e_min = 3.5;
  mg.e_init = 34.5;
  mg.cost_gen_per_kwh = 0.5;
  mg.local_p_kw = 500.0;
  mg.local_pf = 0.9;
  mg.local_cost_per_kwh = 10.0;
  ds.microgrids.push_back(mg);
  ds.v_min.assign(33, 0.9);
  ds.v_max.assign(33, 1.1);
  return ds;
}

}  // namespace fixtures

#include <memory>

#include "mess/formulation.hpp"
#include "mess/tsn.hpp"

namespace fixtures {

/// Five buses in a line with a cross tie: microgrids at both ends, one
/// vehicle and sites A (microgrid 0), B (microgrid 1) and a depot.
inline mess::grid::DistributionSystem toy_grid() {
  mess::grid::DistributionSystem ds;
  const double p[] = {0, 120, 260, 150, 0}, q[] = {0, 50, 100, 60, 0};
  for (int i = 0; i < 5; ++i) {
    mess::grid::Bus b;
    b.id = "n" + std::to_string(i);
    b.p_kw = p[i];
    b.q_kvar = q[i];
    b.critical = i == 1;
    b.cost_per_kwh = b.critical ? 10.0 : 2.0;
    ds.buses.push_back(b);
  }
  auto line = [&](std::size_t f, std::size_t t, bool sw) {
    mess::grid::Branch br;
    br.id = "l" + std::to_string(f) + std::to_string(t);
    br.from = f;
    br.to = t;
    br.r_pu = 0.01;
    br.x_pu = 0.008;
    br.s_max_pu = 1.0;
    br.switchable = sw;
    ds.branches.push_back(br);
  };
  line(0, 1, false);
  line(1, 2, true);
  line(2, 3, true);
  line(3, 4, false);
  line(1, 3, true);
  auto mg = [&](std::string id, std::size_t bus, double pmax, double e) {
    mess::grid::Microgrid m;
    m.id = std::move(id);
    m.bus = bus;
    m.p_dg_max = pmax;
    m.q_dg_max = 0.75 * pmax;
    m.e_max = e;
    m.e_min = 0.05 * e;
    m.e_init = e;
    m.cost_gen_per_kwh = 0.5;
    m.local_p_kw = 40.0;
    m.local_pf = 0.95;
    m.local_cost_per_kwh = 2.0;
    ds.microgrids.push_back(m);
  };
  mg("A", 0, 0.15, 0.3);
  mg("B", 4, 0.6, 3.0);
  ds.v_min.assign(5, 0.9);
  ds.v_max.assign(5, 1.1);
  return ds;
}

struct ToyHorizon {
  std::shared_ptr<mess::grid::DistributionSystem> ds;
  mess::milp::HorizonInput in;
};

/// `scale[s]` multiplies scenario s's loads; probabilities are equal unless given.
inline ToyHorizon toy_horizon(int horizon, std::vector<double> scale, std::vector<double> prob = {},
                              mess::tsn::LayerRules rules = {}) {
  using namespace mess;
  ToyHorizon h;
  h.ds = std::make_shared<grid::DistributionSystem>(toy_grid());
  auto& in = h.in;
  in.grid = h.ds.get();
  milp::MessSpec v;
  v.id = "v1";
  v.p_ch_max = 0.3;
  v.p_dch_max = 0.3;
  v.capacity = 1.0;
  v.soc_init = 0.5;
  v.cost_bat_per_kwh = 0.2;
  v.cost_tran_per_h = 80.0;
  in.fleet.push_back(v);
  in.horizon = horizon;
  in.dt_h = 1.0;
  in.mess_energy = {0.5};
  in.mg_energy = {h.ds->microgrids[0].e_init, h.ds->microgrids[1].e_init};
  in.microgrid_of_site = {{"A", 0}, {"B", 1}};
  const std::size_t S = scale.size();
  if (prob.empty()) prob.assign(S, 1.0 / static_cast<double>(S));
  in.layers.resize(1);
  for (std::size_t s = 0; s < S; ++s) {
    scenario::Scenario sc;
    sc.probability = prob[s];
    for (int t = 0; t < horizon; ++t) {
      std::vector<double> lp, lq;
      for (const auto& b : h.ds->buses) {
        lp.push_back(b.p_kw * scale[s] * (1.0 + 0.1 * t));
        lq.push_back(b.q_kvar * scale[s] * (1.0 + 0.1 * t));
      }
      for (const auto& m : h.ds->microgrids) {
        lp.push_back(m.local_p_kw * scale[s]);
        lq.push_back(scenario::q_from_p(m.local_p_kw * scale[s], m.local_pf));
      }
      sc.load_p.push_back(lp);
      sc.load_q.push_back(lq);
      sc.road_up.push_back({});
      sc.branch_up.push_back(std::vector<std::uint8_t>(h.ds->branches.size(), 1));
    }
    in.scenarios.scenarios.push_back(sc);
    tsn::LayerInput li;
    li.sites = {{"A", 0, tsn::SiteRole::Microgrid}, {"B", 1, tsn::SiteRole::Microgrid}, {"D", 2, tsn::SiteRole::Depot}};
    li.horizon = horizon;
    li.travel = {{{0, 1, 1}, {1, 0, 2}, {1, 2, 0}}};
    li.start = {2, 0};
    li.rules = rules;
    li.scenario = s;
    in.layers[0].push_back(tsn::build_tsn(li));
  }
  return h;
}

}  // namespace fixtures
