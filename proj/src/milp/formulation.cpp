#include "mess/formulation.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

#include "mess/error.hpp"

namespace mess::milp {

namespace {

constexpr double kKw = grid::kBaseKva;  // kW per pu

double tan_phi(double p, double q) { return p > 0.0 ? q / p : 0.0; }

double local_tan(const grid::Microgrid& mg) {
  return mg.local_pf >= 1.0 ? 0.0 : std::tan(std::acos(mg.local_pf));
}

// Skips rows that merge to nothing; those are identities here.
void emit(Model& m, std::string name, const char* marker, std::vector<Term> terms, Sense sense, double rhs) {
  std::erase_if(terms, [](const Term& t) { return t.coef == 0.0; });
  if (terms.empty()) return;
  m.add_row(std::move(name), marker, std::move(terms), sense, rhs);
}

struct Check {
  static void dims(const HorizonInput& in) {
    if (!in.grid) throw ConsistencyError("horizon input has no distribution system");
    if (in.scenarios.size() == 0) throw ConfigError("empty scenario set");
    if (in.horizon < 1) throw ConfigError("prediction horizon must be at least one interval");
    if (!(in.dt_h > 0.0)) throw ConfigError("interval length must be positive");
    const auto& ds = *in.grid;
    const std::size_t W = in.fleet.size();
    if (in.layers.size() != W) throw ConsistencyError("one layer list per vehicle expected");
    if (in.mess_energy.size() != W) throw ConsistencyError("one initial energy per vehicle expected");
    if (in.mg_energy.size() != ds.microgrids.size()) throw ConsistencyError("one initial energy per microgrid expected");
    if (!in.fixed_first_arc.empty() && in.fixed_first_arc.size() != W)
      throw ConsistencyError("fixed first arcs must cover every vehicle");
    if (!in.fixed_alpha.empty() && in.fixed_alpha.size() != ds.branches.size())
      throw ConsistencyError("fixed branch statuses must cover every branch");
    if (!in.extra_damaged.empty() && in.extra_damaged.size() != ds.branches.size())
      throw ConsistencyError("extra damage mask must cover every branch");
    for (std::size_t w = 0; w < W; ++w) {
      if (in.layers[w].size() != in.scenarios.size())
        throw ConsistencyError(fmt::format("vehicle {} has {} layers for {} scenarios", w, in.layers[w].size(),
                                           in.scenarios.size()));
      for (const auto& layer : in.layers[w])
        if (layer.horizon() != in.horizon)
          throw ConsistencyError(fmt::format("layer horizon {} differs from window {}", layer.horizon(), in.horizon));
    }
    for (const auto& sc : in.scenarios.scenarios) {
      if (sc.horizon() < static_cast<std::size_t>(in.horizon) || sc.branch_up.size() < sc.horizon())
        throw ConsistencyError("scenario shorter than the prediction window");
      for (std::size_t t = 0; t < static_cast<std::size_t>(in.horizon); ++t) {
        if (sc.load_p[t].size() != ds.load_count()) throw ConsistencyError("scenario load count mismatch");
        if (sc.branch_up[t].size() != ds.branches.size()) throw ConsistencyError("scenario branch count mismatch");
      }
    }
    for (const auto& [label, m] : in.microgrid_of_site)
      if (m >= ds.microgrids.size()) throw ConsistencyError("site " + label + " maps to an unknown microgrid");
  }
};

double transport_weight(const HorizonInput& in, std::size_t s) {
  return in.options.transport == TransportWeighting::Expected ? in.scenarios.scenarios[s].probability : 1.0;
}

double arc_transport_cost(const HorizonInput& in, const MessSpec& spec, const tsn::Arc& a) {
  if (a.kind == tsn::ArcKind::Holding) return 0.0;
  return spec.cost_tran_per_h * in.dt_h * a.span();
}

// Microgrid index per layer site, or kNone.
std::vector<std::size_t> site_microgrids(const HorizonInput& in, const tsn::TimeSpaceNetwork& layer) {
  std::vector<std::size_t> out;
  for (const auto& site : layer.sites()) {
    auto it = in.microgrid_of_site.find(site.label);
    out.push_back(site.role == tsn::SiteRole::Microgrid && it != in.microgrid_of_site.end() ? it->second : kNone);
  }
  return out;
}

}  // namespace

ArcKey arc_key(const tsn::TimeSpaceNetwork& layer, std::size_t arc) {
  const auto& a = layer.arcs().at(arc);
  ArcKey k;
  k.from = a.from_site == tsn::kEnRoute ? std::string("~") : layer.sites()[a.from_site].label;
  k.to = layer.sites()[a.to_site].label;
  k.depart = a.depart;
  k.arrive = a.arrive;
  k.kind = a.kind;
  return k;
}

BuiltModel build_model(const HorizonInput& in) {
  Check::dims(in);
  const auto& ds = *in.grid;
  const int T = in.horizon;
  const std::size_t S = in.scenarios.size(), W = in.fleet.size();
  const std::size_t N = ds.buses.size(), K = ds.branches.size(), M = ds.microgrids.size();
  const double dt = in.dt_h;

  BuiltModel bm;
  bm.horizon = T;
  bm.scenarios = S;
  bm.vars.resize(S);
  Model& model = bm.model;

  // damage and the fixed part of the topology
  bm.damaged.assign(K, 0);
  for (const auto& sc : in.scenarios.scenarios)
    for (int t = 0; t < T; ++t)
      for (std::size_t k = 0; k < K; ++k)
        if (!sc.branch_up[t][k]) bm.damaged[k] = 1;
  for (std::size_t k = 0; k < in.extra_damaged.size(); ++k)
    if (in.extra_damaged[k]) bm.damaged[k] = 1;
  std::vector<std::uint8_t> available(K);
  for (std::size_t k = 0; k < K; ++k) available[k] = !bm.damaged[k];
  bm.dead = grid::dead_buses(ds, available);

  bm.alpha_fixed.assign(K, -1);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& br = ds.branches[k];
    const bool out = bm.damaged[k] || bm.dead[br.from] || bm.dead[br.to];
    if (!in.fixed_alpha.empty()) {
      if (out && in.fixed_alpha[k])
        throw ConsistencyError("fixed status closes unavailable branch " + br.id);
      bm.alpha_fixed[k] = static_cast<signed char>(in.fixed_alpha[k] ? 1 : 0);
    } else if (out) {
      bm.alpha_fixed[k] = 0;
    } else if (!br.switchable) {
      bm.alpha_fixed[k] = 1;
    }
  }
  std::size_t live = 0, fixed_closed = 0, free_branches = 0;
  for (std::size_t i = 0; i < N; ++i) live += !bm.dead[i];
  for (std::size_t k = 0; k < K; ++k) {
    fixed_closed += bm.alpha_fixed[k] == 1;
    free_branches += bm.alpha_fixed[k] == -1;
  }
  const double radial_target = static_cast<double>(live) - static_cast<double>(M);
  if (free_branches == 0 && static_cast<double>(fixed_closed) != radial_target)
    throw ConsistencyError(
        fmt::format("fixed topology closes {} branches, radiality needs {}", fixed_closed, radial_target));

  bm.flow_big_m = grid::fictitious_big_m(ds);
  bm.voltage_big_m = grid::voltage_big_m(ds);
  const double FM = bm.flow_big_m, VM = bm.voltage_big_m;
  const auto mg_at = ds.microgrid_at_bus();

  std::vector<std::vector<std::size_t>> out_br(N), in_br(N);
  for (std::size_t k = 0; k < K; ++k) {
    if (bm.alpha_fixed[k] == 0) continue;
    out_br[ds.branches[k].from].push_back(k);
    in_br[ds.branches[k].to].push_back(k);
  }

  for (std::size_t s = 0; s < S; ++s) {
    const auto& sc = in.scenarios.scenarios[s];
    const double g = sc.probability;
    auto& sv = bm.vars[s];

    // vehicles
    sv.zeta.resize(W);
    sv.p_ch.assign(W, std::vector<std::vector<std::size_t>>(T, std::vector<std::size_t>(M, kNone)));
    sv.p_dch = sv.p_ch;
    sv.i_ch.assign(W, std::vector<std::size_t>(T, kNone));
    sv.i_dch = sv.i_ch;
    sv.e_mess = sv.i_ch;
    for (std::size_t w = 0; w < W; ++w) {
      const auto& spec = in.fleet[w];
      const auto& layer = in.layers[w][s];
      const auto sites_mg = site_microgrids(in, layer);
      auto& z = sv.zeta[w];
      for (std::size_t a = 0; a < layer.arcs().size(); ++a) {
        const auto& arc = layer.arcs()[a];
        z.push_back(model.add_binary(fmt::format("z_w{}_s{}_a{}", w, s, a),
                                     transport_weight(in, s) * arc_transport_cost(in, spec, arc)));
        model.set_priority(z.back(), 1);
      }
      if (!in.fixed_first_arc.empty() && in.fixed_first_arc[w]) {
        bool found = false;
        for (std::size_t a = 0; a < layer.arcs().size() && !found; ++a)
          if (layer.arcs()[a].depart == 0 && arc_key(layer, a) == *in.fixed_first_arc[w]) {
            model.set_bounds(z[a], 1.0, 1.0);
            found = true;
          }
        if (!found)
          throw InfeasibleLayer(fmt::format("implemented arc {}->{} of {} is not in the rebuilt layer",
                                            in.fixed_first_arc[w]->from, in.fixed_first_arc[w]->to, spec.id));
      }
      for (int t = 0; t < T; ++t) {
        std::vector<Term> cut;
        for (auto a : layer.cut_set(t)) cut.push_back({z[a], 1.0});
        emit(model, fmt::format("cut_w{}_s{}_t{}", w, s, t), "route.cut", cut, Sense::Eq, 1.0);
      }
      {
        std::vector<Term> src;
        for (auto a : layer.out_arcs(layer.source())) src.push_back({z[a], 1.0});
        emit(model, fmt::format("src_w{}_s{}", w, s), "route.source", src, Sense::Eq, 1.0);
      }
      for (auto n : layer.interior_nodes()) {
        std::vector<Term> f;
        for (auto a : layer.out_arcs(n)) f.push_back({z[a], 1.0});
        for (auto a : layer.in_arcs(n)) f.push_back({z[a], -1.0});
        emit(model, fmt::format("flow_w{}_s{}_n{}", w, s, n), "route.flow", f, Sense::Eq, 0.0);
      }

      const double bat = g * spec.cost_bat_per_kwh * kKw * dt;
      for (int t = 0; t < T; ++t) {
        std::vector<Term> charge, discharge, presence, energy;
        for (std::size_t i = 0; i < layer.sites().size(); ++i) {
          const auto m = sites_mg[i];
          if (m == kNone) continue;
          const auto hold = layer.holding_arc(i, t);
          if (!hold) continue;
          const auto pc = model.add_continuous(fmt::format("pch_w{}_m{}_t{}_s{}", w, m, t, s), 0.0, spec.p_ch_max, bat);
          const auto pd =
              model.add_continuous(fmt::format("pdch_w{}_m{}_t{}_s{}", w, m, t, s), 0.0, spec.p_dch_max, bat);
          sv.p_ch[w][t][m] = pc;
          sv.p_dch[w][t][m] = pd;
          emit(model, fmt::format("chg_arc_w{}_m{}_t{}_s{}", w, m, t, s), "mess.charge_arc",
               {{pc, 1.0}, {z[*hold], -spec.p_ch_max}}, Sense::Le, 0.0);
          emit(model, fmt::format("dch_arc_w{}_m{}_t{}_s{}", w, m, t, s), "mess.discharge_arc",
               {{pd, 1.0}, {z[*hold], -spec.p_dch_max}}, Sense::Le, 0.0);
          charge.push_back({pc, 1.0});
          discharge.push_back({pd, 1.0});
          presence.push_back({z[*hold], -1.0});
          energy.push_back({pc, -dt * spec.eta_ch});
          energy.push_back({pd, dt / spec.eta_dch});
        }
        if (!charge.empty()) {
          const auto ic = model.add_binary(fmt::format("ich_w{}_t{}_s{}", w, t, s));
          const auto id = model.add_binary(fmt::format("idch_w{}_t{}_s{}", w, t, s));
          sv.i_ch[w][t] = ic;
          sv.i_dch[w][t] = id;
          charge.push_back({ic, -spec.p_ch_max});
          discharge.push_back({id, -spec.p_dch_max});
          emit(model, fmt::format("chg_mode_w{}_t{}_s{}", w, t, s), "mess.charge_mode", charge, Sense::Le, 0.0);
          emit(model, fmt::format("dch_mode_w{}_t{}_s{}", w, t, s), "mess.discharge_mode", discharge, Sense::Le, 0.0);
          presence.push_back({ic, 1.0});
          presence.push_back({id, 1.0});
          emit(model, fmt::format("excl_w{}_t{}_s{}", w, t, s), "mess.exclusive", presence, Sense::Le, 0.0);
        }
        const auto e = model.add_continuous(fmt::format("e_w{}_t{}_s{}", w, t, s), spec.e_min(), spec.e_max());
        sv.e_mess[w][t] = e;
        energy.push_back({e, 1.0});
        double rhs = 0.0;
        if (t == 0)
          rhs = in.mess_energy[w];
        else
          energy.push_back({sv.e_mess[w][t - 1], -1.0});
        model.add_row(fmt::format("soc_w{}_t{}_s{}", w, t, s), "mess.energy", energy, Sense::Eq, rhs);
      }
    }

    // topology
    sv.alpha.assign(K, kNone);
    sv.fict.assign(K, kNone);
    sv.source.assign(M, kNone);
    std::vector<Term> count;
    for (std::size_t k = 0; k < K; ++k) {
      if (bm.alpha_fixed[k] == 0) continue;
      const auto f = model.add_continuous(fmt::format("f_b{}_s{}", k, s), -FM, FM);
      sv.fict[k] = f;
      if (bm.alpha_fixed[k] == 1) continue;
      const auto a = model.add_binary(fmt::format("alpha_b{}_s{}", k, s));
      model.set_priority(a, -1);
      sv.alpha[k] = a;
      count.push_back({a, 1.0});
      emit(model, fmt::format("fcap_hi_b{}_s{}", k, s), "topo.fict_cap", {{f, 1.0}, {a, -FM}}, Sense::Le, 0.0);
      emit(model, fmt::format("fcap_lo_b{}_s{}", k, s), "topo.fict_cap", {{f, 1.0}, {a, FM}}, Sense::Ge, 0.0);
      if (in.options.redundant_flow_bounds) {
        emit(model, fmt::format("fcap2_hi_b{}_s{}", k, s), "topo.fict_cap2", {{f, 1.0}, {a, FM}}, Sense::Le, 2 * FM);
        emit(model, fmt::format("fcap2_lo_b{}_s{}", k, s), "topo.fict_cap2", {{f, 1.0}, {a, -FM}}, Sense::Ge, -2 * FM);
      }
    }
    for (std::size_t i = 0; i < N; ++i) {
      if (bm.dead[i]) continue;
      std::vector<Term> bal;
      for (auto k : out_br[i]) bal.push_back({sv.fict[k], 1.0});
      for (auto k : in_br[i]) bal.push_back({sv.fict[k], -1.0});
      if (mg_at[i] != grid::npos) {
        if (bal.empty()) continue;  // isolated microgrid: a tree of its own
        const auto h = model.add_continuous(fmt::format("h_m{}_s{}", mg_at[i], s), 1.0, FM);
        sv.source[mg_at[i]] = h;
        bal.push_back({h, -1.0});
        emit(model, fmt::format("fbal_n{}_s{}", i, s), "topo.fict_balance", bal, Sense::Eq, 0.0);
      } else {
        model.add_row(fmt::format("fbal_n{}_s{}", i, s), "topo.fict_balance", bal, Sense::Eq, -1.0);
      }
    }
    emit(model, fmt::format("radial_s{}", s), "topo.count", count, Sense::Eq,
         radial_target - static_cast<double>(fixed_closed));

    // network and microgrids per interval
    sv.p_r.assign(T, std::vector<std::size_t>(N, kNone));
    sv.v = sv.p_r;
    sv.p.assign(T, std::vector<std::size_t>(K, kNone));
    sv.q = sv.p;
    sv.p_dg.assign(T, std::vector<std::size_t>(M, kNone));
    sv.q_dg = sv.p_g = sv.q_g = sv.e_dg = sv.local = sv.p_dg;
    for (int t = 0; t < T; ++t) {
      for (std::size_t i = 0; i < N; ++i) {
        const auto& bus = ds.buses[i];
        const double pd = sc.load_p[t][i] / kKw;
        const double w = g * bus.cost_per_kwh * kKw * dt;
        model.add_offset(w * pd);
        if (bm.dead[i]) continue;
        sv.p_r[t][i] = model.add_continuous(fmt::format("pr_n{}_t{}_s{}", i, t, s), 0.0, pd, -w);
        const bool at_mg = mg_at[i] != grid::npos;
        const double lo = at_mg ? ds.v0 : ds.v_min[i], hi = at_mg ? ds.v0 : ds.v_max[i];
        sv.v[t][i] = model.add_continuous(fmt::format("v_n{}_t{}_s{}", i, t, s), lo, hi);
      }
      for (std::size_t k = 0; k < K; ++k) {
        if (bm.alpha_fixed[k] == 0) continue;
        const auto& br = ds.branches[k];
        const double cap = br.s_max_pu, diag = std::sqrt(2.0) * cap;
        const auto p = model.add_continuous(fmt::format("p_b{}_t{}_s{}", k, t, s), -cap, cap);
        const auto q = model.add_continuous(fmt::format("q_b{}_t{}_s{}", k, t, s), -cap, cap);
        sv.p[t][k] = p;
        sv.q[t][k] = q;
        const auto vf = sv.v[t][br.from], vt = sv.v[t][br.to];
        std::vector<Term> drop{{vf, 1.0}, {vt, -1.0}, {p, -br.r_pu / ds.v0}, {q, -br.x_pu / ds.v0}};
        const auto tag = fmt::format("b{}_t{}_s{}", k, t, s);
        if (bm.alpha_fixed[k] == 1) {
          emit(model, "pqs_hi_" + tag, "pf.pq_sum", {{p, 1.0}, {q, 1.0}}, Sense::Le, diag);
          emit(model, "pqs_lo_" + tag, "pf.pq_sum", {{p, 1.0}, {q, 1.0}}, Sense::Ge, -diag);
          emit(model, "pqd_hi_" + tag, "pf.pq_diff", {{p, 1.0}, {q, -1.0}}, Sense::Le, diag);
          emit(model, "pqd_lo_" + tag, "pf.pq_diff", {{p, 1.0}, {q, -1.0}}, Sense::Ge, -diag);
          emit(model, "volt_" + tag, "pf.voltage", drop, Sense::Eq, 0.0);
          continue;
        }
        const auto a = sv.alpha[k];
        emit(model, "pcap_hi_" + tag, "pf.p_cap", {{p, 1.0}, {a, -cap}}, Sense::Le, 0.0);
        emit(model, "pcap_lo_" + tag, "pf.p_cap", {{p, 1.0}, {a, cap}}, Sense::Ge, 0.0);
        emit(model, "qcap_hi_" + tag, "pf.q_cap", {{q, 1.0}, {a, -cap}}, Sense::Le, 0.0);
        emit(model, "qcap_lo_" + tag, "pf.q_cap", {{q, 1.0}, {a, cap}}, Sense::Ge, 0.0);
        emit(model, "pqs_hi_" + tag, "pf.pq_sum", {{p, 1.0}, {q, 1.0}, {a, -diag}}, Sense::Le, 0.0);
        emit(model, "pqs_lo_" + tag, "pf.pq_sum", {{p, 1.0}, {q, 1.0}, {a, diag}}, Sense::Ge, 0.0);
        emit(model, "pqd_hi_" + tag, "pf.pq_diff", {{p, 1.0}, {q, -1.0}, {a, -diag}}, Sense::Le, 0.0);
        emit(model, "pqd_lo_" + tag, "pf.pq_diff", {{p, 1.0}, {q, -1.0}, {a, diag}}, Sense::Ge, 0.0);
        auto up = drop, down = drop;
        up.push_back({a, VM});
        down.push_back({a, -VM});
        emit(model, "vhi_" + tag, "pf.voltage", up, Sense::Le, VM);
        emit(model, "vlo_" + tag, "pf.voltage", down, Sense::Ge, -VM);
      }
      for (std::size_t m = 0; m < M; ++m) {
        const auto& mg = ds.microgrids[m];
        const double pl = sc.load_p[t][ds.local_load_index(m)] / kKw;
        const double wl = g * mg.local_cost_per_kwh * kKw * dt;
        model.add_offset(wl * pl);
        double ch_max = 0.0, dch_max = 0.0;
        for (const auto& spec : in.fleet) {
          ch_max += spec.p_ch_max;
          dch_max += spec.p_dch_max;
        }
        const auto tag = fmt::format("m{}_t{}_s{}", m, t, s);
        const auto pdg = model.add_continuous("pdg_" + tag, 0.0, mg.p_dg_max, g * mg.cost_gen_per_kwh * kKw * dt);
        const auto qdg = model.add_continuous("qdg_" + tag, -mg.q_dg_max, mg.q_dg_max);
        const auto loc = model.add_continuous("pl_" + tag, 0.0, pl, -wl);
        const double tl = local_tan(mg);
        const auto pg = model.add_continuous("pg_" + tag, -(ch_max + pl), mg.p_dg_max + dch_max);
        const auto qg = model.add_continuous("qg_" + tag, -(mg.q_dg_max + tl * pl), mg.q_dg_max);
        const auto edg = model.add_continuous("edg_" + tag, mg.e_min, mg.e_max);
        sv.p_dg[t][m] = pdg;
        sv.q_dg[t][m] = qdg;
        sv.local[t][m] = loc;
        sv.p_g[t][m] = pg;
        sv.q_g[t][m] = qg;
        sv.e_dg[t][m] = edg;
        std::vector<Term> agg{{pg, 1.0}, {pdg, -1.0}, {loc, 1.0}};
        for (std::size_t w = 0; w < W; ++w) {
          if (sv.p_ch[w][t][m] != kNone) agg.push_back({sv.p_ch[w][t][m], 1.0});
          if (sv.p_dch[w][t][m] != kNone) agg.push_back({sv.p_dch[w][t][m], -1.0});
        }
        emit(model, "pagg_" + tag, "mg.p_agg", agg, Sense::Eq, 0.0);
        emit(model, "qagg_" + tag, "mg.q_agg", {{qg, 1.0}, {qdg, -1.0}, {loc, tl}}, Sense::Eq, 0.0);
        std::vector<Term> en{{edg, 1.0}, {pdg, dt}};
        double rhs = in.mg_energy[m];
        if (t > 0) {
          en.push_back({sv.e_dg[t - 1][m], -1.0});
          rhs = 0.0;
        }
        model.add_row("edg_" + tag, "mg.energy", en, Sense::Eq, rhs);
      }
      for (std::size_t i = 0; i < N; ++i) {
        if (bm.dead[i]) continue;
        const auto& bus = ds.buses[i];
        const double tp = tan_phi(bus.p_kw, bus.q_kvar);
        const auto tag = fmt::format("n{}_t{}_s{}", i, t, s);
        std::vector<Term> pb{{sv.p_r[t][i], -1.0}}, qb{{sv.p_r[t][i], -tp}};
        if (mg_at[i] != grid::npos) {
          pb.push_back({sv.p_g[t][mg_at[i]], 1.0});
          qb.push_back({sv.q_g[t][mg_at[i]], 1.0});
        }
        for (auto k : out_br[i]) {
          pb.push_back({sv.p[t][k], -1.0});
          qb.push_back({sv.q[t][k], -1.0});
        }
        for (auto k : in_br[i]) {
          pb.push_back({sv.p[t][k], 1.0});
          qb.push_back({sv.q[t][k], 1.0});
        }
        emit(model, "pbal_" + tag, "pf.p_balance", pb, Sense::Eq, 0.0);
        emit(model, "qbal_" + tag, "pf.q_balance", qb, Sense::Eq, 0.0);
      }
    }
  }

  // first-stage decisions are shared by every scenario
  if (S > 1) {
    auto tie = [&](const std::vector<std::size_t>& ids, const std::string& base, const char* marker) {
      if (in.options.pairwise_nonanticipativity) {
        for (std::size_t s = 0; s + 1 < S; ++s) {
          std::vector<Term> r;
          if (ids[s] != kNone) r.push_back({ids[s], 1.0});
          if (ids[s + 1] != kNone) r.push_back({ids[s + 1], -1.0});
          emit(model, fmt::format("{}_s{}", base, s), marker, r, Sense::Eq, 0.0);
        }
        return;
      }
      for (std::size_t s = 0; s < S; ++s) {
        std::vector<Term> r;
        if (ids[s] != kNone) r.push_back({ids[s], 1.0});
        for (std::size_t u = 0; u < S; ++u)
          if (ids[u] != kNone) r.push_back({ids[u], -in.scenarios.scenarios[u].probability});
        emit(model, fmt::format("{}_s{}", base, s), marker, r, Sense::Eq, 0.0);
      }
    };
    for (std::size_t w = 0; w < W; ++w) {
      std::map<ArcKey, std::vector<std::size_t>> first;
      for (std::size_t s = 0; s < S; ++s) {
        const auto& layer = in.layers[w][s];
        for (auto a : layer.cut_set(0)) {
          auto& ids = first.try_emplace(arc_key(layer, a), std::vector<std::size_t>(S, kNone)).first->second;
          ids[s] = bm.vars[s].zeta[w][a];
        }
      }
      std::size_t n = 0;
      for (const auto& [key, ids] : first) tie(ids, fmt::format("na_z_w{}_k{}", w, n++), "na.route");
    }
    for (std::size_t k = 0; k < K; ++k) {
      if (bm.alpha_fixed[k] != -1) continue;
      std::vector<std::size_t> ids;
      for (std::size_t s = 0; s < S; ++s) ids.push_back(bm.vars[s].alpha[k]);
      tie(ids, fmt::format("na_a_b{}", k), "na.alpha");
    }
  }

  model.check();
  return bm;
}

namespace {

double value(const std::vector<double>& x, std::size_t id) { return id == kNone ? 0.0 : x[id]; }

}  // namespace

IntervalDispatch extract(const HorizonInput& in, const BuiltModel& bm, const std::vector<double>& x, std::size_t s,
                         int t) {
  const auto& ds = *in.grid;
  const auto& sv = bm.vars.at(s);
  const std::size_t N = ds.buses.size(), K = ds.branches.size(), M = ds.microgrids.size(), W = in.fleet.size();
  IntervalDispatch d;
  d.alpha.resize(K);
  for (std::size_t k = 0; k < K; ++k)
    d.alpha[k] = bm.alpha_fixed[k] == -1 ? static_cast<std::uint8_t>(x[sv.alpha[k]] > 0.5) : bm.alpha_fixed[k];
  d.arc.assign(W, kNone);
  d.p_ch.assign(W, std::vector<double>(M, 0.0));
  d.p_dch = d.p_ch;
  d.e_mess.resize(W);
  for (std::size_t w = 0; w < W; ++w) {
    const auto& layer = in.layers[w][s];
    for (auto a : layer.cut_set(t))
      if (x[sv.zeta[w][a]] > 0.5) d.arc[w] = a;
    for (std::size_t m = 0; m < M; ++m) {
      d.p_ch[w][m] = value(x, sv.p_ch[w][t][m]);
      d.p_dch[w][m] = value(x, sv.p_dch[w][t][m]);
    }
    d.e_mess[w] = x[sv.e_mess[w][t]];
  }
  for (std::size_t m = 0; m < M; ++m) {
    d.p_dg.push_back(x[sv.p_dg[t][m]]);
    d.q_dg.push_back(x[sv.q_dg[t][m]]);
    d.p_g.push_back(x[sv.p_g[t][m]]);
    d.q_g.push_back(x[sv.q_g[t][m]]);
    d.local.push_back(x[sv.local[t][m]]);
    d.e_dg.push_back(x[sv.e_dg[t][m]]);
  }
  for (std::size_t i = 0; i < N; ++i) {
    const auto& bus = ds.buses[i];
    const double pr = value(x, sv.p_r[t][i]);
    d.p_r.push_back(pr);
    d.q_r.push_back(pr * tan_phi(bus.p_kw, bus.q_kvar));
    d.v.push_back(sv.v[t][i] == kNone ? 0.0 : x[sv.v[t][i]]);
  }
  for (std::size_t k = 0; k < K; ++k) {
    d.p.push_back(value(x, sv.p[t][k]));
    d.q.push_back(value(x, sv.q[t][k]));
  }
  return d;
}

std::size_t routing_violations(const HorizonInput& in, const BuiltModel& bm, const std::vector<double>& x) {
  std::size_t bad = 0;
  for (std::size_t s = 0; s < bm.scenarios; ++s)
    for (std::size_t w = 0; w < in.fleet.size(); ++w) {
      const auto& layer = in.layers[w][s];
      const auto& z = bm.vars[s].zeta[w];
      auto on = [&](std::size_t a) { return x[z[a]] > 0.5; };
      for (int t = 0; t < layer.horizon(); ++t) {
        int n = 0;
        for (auto a : layer.cut_set(t)) n += on(a);
        bad += n != 1;
      }
      std::size_t node = layer.source();
      int t = 0;
      bool broken = false;
      while (!broken && t < layer.horizon()) {
        std::size_t next = kNone;
        for (auto a : layer.out_arcs(node))
          if (on(a)) next = next == kNone ? a : kNone - 1;
        if (next == kNone || next == kNone - 1) {
          broken = true;
          break;
        }
        t = layer.arcs()[next].arrive;
        node = layer.arcs()[next].head;
      }
      bad += broken || !layer.nodes()[node].sink;
    }
  return bad;
}

CostBreakdown cost_breakdown(const HorizonInput& in, const BuiltModel& bm, const std::vector<double>& x) {
  const auto& ds = *in.grid;
  CostBreakdown c;
  for (std::size_t s = 0; s < bm.scenarios; ++s) {
    const auto& sc = in.scenarios.scenarios[s];
    const auto& sv = bm.vars[s];
    const double g = sc.probability, e = kKw * in.dt_h;
    for (int t = 0; t < bm.horizon; ++t) {
      for (std::size_t i = 0; i < ds.buses.size(); ++i)
        c.interruption += g * ds.buses[i].cost_per_kwh * e * (sc.load_p[t][i] / kKw - value(x, sv.p_r[t][i]));
      for (std::size_t m = 0; m < ds.microgrids.size(); ++m) {
        const auto& mg = ds.microgrids[m];
        c.interruption +=
            g * mg.local_cost_per_kwh * e * (sc.load_p[t][ds.local_load_index(m)] / kKw - x[sv.local[t][m]]);
        c.generation += g * mg.cost_gen_per_kwh * e * x[sv.p_dg[t][m]];
      }
      for (std::size_t w = 0; w < in.fleet.size(); ++w)
        for (std::size_t m = 0; m < ds.microgrids.size(); ++m)
          c.battery +=
              g * in.fleet[w].cost_bat_per_kwh * e * (value(x, sv.p_ch[w][t][m]) + value(x, sv.p_dch[w][t][m]));
    }
    for (std::size_t w = 0; w < in.fleet.size(); ++w) {
      const auto& layer = in.layers[w][s];
      for (std::size_t a = 0; a < layer.arcs().size(); ++a)
        c.transport += transport_weight(in, s) * arc_transport_cost(in, in.fleet[w], layer.arcs()[a]) *
                       std::round(x[sv.zeta[w][a]]);
    }
  }
  return c;
}

scenario::Scenario expected_scenario(const scenario::ScenarioSet& set, const scenario::Scenario& realized_first) {
  if (set.size() == 0) throw ConfigError("empty scenario set");
  const auto& ref = set.scenarios.front();
  const std::size_t H = ref.horizon();
  const double total = set.total_probability();
  scenario::Scenario out;
  out.probability = 1.0;
  auto mean = [&](auto member, std::size_t t) {
    std::vector<double> acc((ref.*member)[t].size(), 0.0);
    for (const auto& sc : set.scenarios)
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += sc.probability * (sc.*member)[t][j];
    for (auto& v : acc) v /= total;
    return acc;
  };
  auto vote = [&](auto member, std::size_t t) {
    std::vector<std::uint8_t> out((ref.*member)[t].size(), 0);
    for (std::size_t j = 0; j < out.size(); ++j) {
      double up = 0.0;
      for (const auto& sc : set.scenarios) up += sc.probability * (sc.*member)[t][j];
      out[j] = up >= 0.5 * total;
    }
    return out;
  };
  for (std::size_t t = 0; t < H; ++t) {
    if (t == 0) {
      out.load_p.push_back(realized_first.load_p.at(0));
      out.load_q.push_back(realized_first.load_q.at(0));
      out.road_up.push_back(realized_first.road_up.at(0));
      out.branch_up.push_back(realized_first.branch_up.at(0));
      continue;
    }
    out.load_p.push_back(mean(&scenario::Scenario::load_p, t));
    out.load_q.push_back(mean(&scenario::Scenario::load_q, t));
    out.road_up.push_back(vote(&scenario::Scenario::road_up, t));
    out.branch_up.push_back(vote(&scenario::Scenario::branch_up, t));
  }
  return out;
}

IntervalDispatch shed_all_dispatch(const HorizonInput& in, const std::vector<std::uint8_t>& alpha,
                                   const std::vector<std::size_t>& arcs) {
  const auto& ds = *in.grid;
  const std::size_t N = ds.buses.size(), K = ds.branches.size(), M = ds.microgrids.size(), W = in.fleet.size();
  IntervalDispatch d;
  d.alpha = alpha;
  d.arc = arcs;
  d.arc.resize(W, kNone);
  d.p_ch.assign(W, std::vector<double>(M, 0.0));
  d.p_dch = d.p_ch;
  d.e_mess = in.mess_energy;
  d.p_dg.assign(M, 0.0);
  d.q_dg = d.p_g = d.q_g = d.local = d.p_dg;
  d.e_dg = in.mg_energy;
  d.p_r.assign(N, 0.0);
  d.q_r = d.p_r;
  d.v.assign(N, ds.v0);
  d.p.assign(K, 0.0);
  d.q = d.p;
  return d;
}

Heuristic topology_heuristic(const HorizonInput& in, const BuiltModel& bm) {
  const auto& ds = *in.grid;
  const std::size_t N = ds.buses.size(), K = ds.branches.size();
  std::vector<std::uint8_t> is_alpha(bm.model.vars().size(), 0);
  for (const auto& sv : bm.vars)
    for (auto a : sv.alpha)
      if (a != kNone) is_alpha[a] = 1;
  std::vector<std::size_t> others;
  for (std::size_t j = 0; j < bm.model.vars().size(); ++j)
    if (bm.model.vars()[j].kind == VarKind::Binary && !is_alpha[j]) others.push_back(j);
  std::vector<std::pair<std::size_t, std::size_t>> ends(K);
  for (std::size_t k = 0; k < K; ++k) ends[k] = {ds.branches[k].from, ds.branches[k].to};
  // every microgrid bus collapses into one root at index N
  std::vector<std::size_t> root(N);
  for (std::size_t i = 0; i < N; ++i) root[i] = i;
  for (const auto& mg : ds.microgrids) root[mg.bus] = N;

  return [=, alpha_fixed = bm.alpha_fixed, vars = bm.vars](const std::vector<double>& x) {
    std::vector<std::pair<std::size_t, double>> fixes;
    for (auto j : others)
      if (std::abs(x[j] - std::round(x[j])) > 1e-6) return fixes;
    std::vector<std::size_t> parent(N + 1);
    for (std::size_t i = 0; i <= N; ++i) parent[i] = i;
    auto find = [&](std::size_t i) {
      while (parent[i] != i) i = parent[i] = parent[parent[i]];
      return i;
    };
    auto join = [&](std::size_t k) {
      const auto a = find(root[ends[k].first]), b = find(root[ends[k].second]);
      if (a == b) return false;
      parent[a] = b;
      return true;
    };
    std::vector<std::pair<double, std::size_t>> order;
    for (std::size_t k = 0; k < K; ++k) {
      if (alpha_fixed[k] == 1) join(k);
      if (alpha_fixed[k] != -1) continue;
      double w = 0.0;
      for (const auto& sv : vars) w += x[sv.alpha[k]];
      order.emplace_back(-w, k);
    }
    if (order.empty()) return fixes;
    std::sort(order.begin(), order.end());
    for (const auto& [w, k] : order) {
      const double v = join(k) ? 1.0 : 0.0;
      for (const auto& sv : vars) fixes.emplace_back(sv.alpha[k], v);
    }
    return fixes;
  };
}

ReoptResult deterministic_reopt(HorizonInput in, const std::vector<std::uint8_t>& alpha,
                                const std::vector<ArcKey>& first_arcs, const SolveOptions& opts) {
  if (in.scenarios.size() != 1) throw ConsistencyError("re-optimization takes exactly one scenario");
  in.scenarios.scenarios[0].probability = 1.0;
  in.fixed_alpha = alpha;
  in.fixed_first_arc.assign(in.fleet.size(), std::nullopt);
  for (std::size_t w = 0; w < first_arcs.size() && w < in.fleet.size(); ++w) in.fixed_first_arc[w] = first_arcs[w];

  std::vector<std::size_t> arcs(in.fleet.size(), kNone);
  for (std::size_t w = 0; w < in.fleet.size() && w < first_arcs.size(); ++w) {
    const auto& layer = in.layers[w][0];
    for (std::size_t a = 0; a < layer.arcs().size(); ++a)
      if (layer.arcs()[a].depart == 0 && arc_key(layer, a) == first_arcs[w]) arcs[w] = a;
  }

  ReoptResult r;
  try {
    auto bm = build_model(in);
    r.solution = solve(bm.model, opts);
    if (r.solution.has_solution()) {
      r.dispatch = extract(in, bm, r.solution.x, 0, 0);
      return r;
    }
  } catch (const InfeasibleLayer&) {
    r.solution.status = Status::Infeasible;
  } catch (const ConsistencyError&) {
    r.solution.status = Status::Infeasible;
  }
  r.shed_all = true;
  r.dispatch = shed_all_dispatch(in, alpha, arcs);
  return r;
}

}  // namespace mess::milp
