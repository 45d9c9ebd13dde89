#include "mess/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "mess/error.hpp"

namespace mess::grid {

namespace {

struct Dsu {
  std::vector<std::size_t> parent;
  explicit Dsu(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

}  // namespace

LoadClass parse_load_class(const std::string& s) {
  if (s == "R" || s == "residential") return LoadClass::Residential;
  if (s == "C" || s == "commercial") return LoadClass::Commercial;
  if (s == "I" || s == "industrial") return LoadClass::Industrial;
  throw ValidationError(fmt::format("unknown load class '{}'", s));
}

const char* to_string(LoadClass c) {
  switch (c) {
    case LoadClass::Residential:
      return "residential";
    case LoadClass::Commercial:
      return "commercial";
    case LoadClass::Industrial:
      return "industrial";
  }
  return "?";
}

double Bus::power_factor() const {
  const double s = std::hypot(p_kw, q_kvar);
  return s > 0.0 ? p_kw / s : 1.0;
}

std::vector<std::size_t> DistributionSystem::microgrid_at_bus() const {
  std::vector<std::size_t> out(buses.size(), npos);
  for (std::size_t m = 0; m < microgrids.size(); ++m) out.at(microgrids[m].bus) = m;
  return out;
}

double ohm_to_pu(double ohm, double base_kv) {
  if (!(base_kv > 0.0)) throw ConfigError("feeder nominal voltage must be positive");
  const double z_base = base_kv * base_kv / (kBaseKva / 1000.0);
  return ohm / z_base;
}

double reactive_from_active(double p, double power_factor) {
  if (!(power_factor > 0.0 && power_factor <= 1.0))
    throw ConfigError(fmt::format("power factor must lie in (0, 1], got {}", power_factor));
  if (p == 0.0 || power_factor == 1.0) return 0.0;
  return p * std::tan(std::acos(power_factor));
}

void validate(const DistributionSystem& ds) {
  const auto n = ds.buses.size();
  if (ds.v_min.size() != n || ds.v_max.size() != n) throw ValidationError("voltage bounds missing for some buses");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(ds.v_min[i] < ds.v0 && ds.v0 < ds.v_max[i]))
      throw ValidationError(fmt::format("bus {}: voltage bounds must satisfy vmin < v0 < vmax", ds.buses[i].id));
    if (ds.buses[i].p_kw < 0.0) throw ValidationError(fmt::format("bus {}: negative load", ds.buses[i].id));
    if (ds.buses[i].cost_per_kwh < 0.0)
      throw ValidationError(fmt::format("bus {}: negative interruption cost", ds.buses[i].id));
  }
  for (const auto& b : ds.branches) {
    if (b.from >= n || b.to >= n || b.from == b.to)
      throw ValidationError(fmt::format("branch {}: bad end buses", b.id));
    if (b.r_pu < 0.0 || b.x_pu < 0.0) throw ValidationError(fmt::format("branch {}: negative impedance", b.id));
    if (!(b.s_max_pu > 0.0)) throw ValidationError(fmt::format("branch {}: capacity must be positive", b.id));
    if (ds.buses[b.from].feeder != ds.buses[b.to].feeder)
      throw ValidationError(fmt::format("branch {} joins two feeders", b.id));
  }
  std::set<std::size_t> mg_buses;
  std::set<std::size_t> fed;
  for (const auto& m : ds.microgrids) {
    if (m.bus >= n) throw ValidationError(fmt::format("microgrid {}: unknown bus", m.id));
    if (!mg_buses.insert(m.bus).second) throw ValidationError(fmt::format("microgrid {}: bus already has one", m.id));
    fed.insert(ds.buses[m.bus].feeder);
    if (m.p_dg_max < 0.0 || m.q_dg_max < 0.0) throw ValidationError(fmt::format("microgrid {}: negative capacity", m.id));
    if (!(m.e_min <= m.e_init && m.e_init <= m.e_max))
      throw ValidationError(fmt::format("microgrid {}: initial energy outside [Emin, Emax]", m.id));
    if (!(m.local_pf > 0.0 && m.local_pf <= 1.0))
      throw ValidationError(fmt::format("microgrid {}: power factor outside (0, 1]", m.id));
  }
  for (const auto& b : ds.buses)
    if (!fed.count(b.feeder)) throw ValidationError(fmt::format("feeder {} has no microgrid", b.feeder));

  Dsu dsu(n);
  std::vector<char> has_mg(n, 0);
  for (auto b : mg_buses) has_mg[b] = 1;
  for (const auto& b : ds.branches) {
    if (b.switchable) continue;
    auto ra = dsu.find(b.from), rb = dsu.find(b.to);
    if (ra == rb) throw ValidationError(fmt::format("fixed branch {} closes a loop", b.id));
    if (has_mg[ra] && has_mg[rb]) throw ValidationError(fmt::format("fixed branch {} joins two microgrids", b.id));
    dsu.unite(ra, rb);
    has_mg[dsu.find(ra)] = has_mg[ra] || has_mg[rb];
  }
}

std::vector<std::uint8_t> dead_buses(const DistributionSystem& ds, const std::vector<std::uint8_t>& available) {
  const auto n = ds.buses.size();
  Dsu dsu(n);
  for (std::size_t k = 0; k < ds.branches.size(); ++k)
    if (available.empty() || available[k]) dsu.unite(ds.branches[k].from, ds.branches[k].to);
  std::vector<char> energized(n, 0);
  for (const auto& m : ds.microgrids) energized[dsu.find(m.bus)] = 1;
  std::vector<std::uint8_t> dead(n, 0);
  for (std::size_t i = 0; i < n; ++i) dead[i] = energized[dsu.find(i)] ? 0 : 1;
  return dead;
}

RadialReport validate_radial(const DistributionSystem& ds, const std::vector<std::uint8_t>& alpha,
                             const std::vector<std::uint8_t>& available) {
  RadialReport rep;
  const auto n = ds.buses.size();
  if (alpha.size() != ds.branches.size()) {
    rep.ok = false;
    rep.violations.push_back("branch status vector has the wrong length");
    return rep;
  }
  const auto dead = dead_buses(ds, available);
  const auto live = static_cast<std::size_t>(std::count(dead.begin(), dead.end(), 0));
  rep.expected = live - ds.microgrids.size();

  Dsu dsu(n);
  for (std::size_t k = 0; k < ds.branches.size(); ++k) {
    if (!alpha[k]) continue;
    ++rep.closed;
    const auto& b = ds.branches[k];
    if (!available.empty() && !available[k]) rep.violations.push_back(fmt::format("damaged branch {} is closed", b.id));
    if (dead[b.from] || dead[b.to]) rep.violations.push_back(fmt::format("branch {} is closed on a dead bus", b.id));
    if (!dsu.unite(b.from, b.to)) rep.violations.push_back(fmt::format("branch {} closes a cycle", b.id));
  }
  std::vector<int> mgs(n, 0);
  for (const auto& m : ds.microgrids) ++mgs[dsu.find(m.bus)];
  for (std::size_t i = 0; i < n; ++i) {
    if (dead[i]) continue;
    const auto root = dsu.find(i);
    if (root != i) continue;
    if (mgs[root] == 0) rep.violations.push_back(fmt::format("bus {} is in a component without a microgrid", ds.buses[i].id));
    if (mgs[root] > 1) rep.violations.push_back(fmt::format("component of bus {} holds {} microgrids", ds.buses[i].id, mgs[root]));
  }
  if (rep.closed != rep.expected)
    rep.violations.push_back(fmt::format("{} closed branches, expected {}", rep.closed, rep.expected));
  rep.ok = rep.violations.empty();
  return rep;
}

Residual lindistflow_residual(const DistributionSystem& ds, const std::vector<std::uint8_t>& alpha,
                              const PowerFlowState& s) {
  const auto n = ds.buses.size();
  std::vector<double> out_p(n, 0.0), out_q(n, 0.0);
  Residual r;
  for (std::size_t k = 0; k < ds.branches.size(); ++k) {
    const auto& b = ds.branches[k];
    out_p[b.from] += s.p[k];
    out_p[b.to] -= s.p[k];
    out_q[b.from] += s.q[k];
    out_q[b.to] -= s.q[k];
    if (alpha[k]) {
      const double drop = s.v[b.from] - s.v[b.to] - (b.r_pu * s.p[k] + b.x_pu * s.q[k]) / ds.v0;
      r.voltage = std::max(r.voltage, std::abs(drop));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    r.balance = std::max(r.balance, std::abs(s.p_g[i] - s.p_r[i] - out_p[i]));
    r.balance = std::max(r.balance, std::abs(s.q_g[i] - s.q_r[i] - out_q[i]));
  }
  return r;
}

double fictitious_big_m(const DistributionSystem& ds) { return static_cast<double>(ds.buses.size()); }

double voltage_big_m(const DistributionSystem& ds) {
  double span = 0.0;
  for (std::size_t i = 0; i < ds.buses.size(); ++i) span = std::max(span, ds.v_max[i] - ds.v_min[i]);
  double drop = 0.0;
  for (const auto& b : ds.branches) drop = std::max(drop, (b.r_pu + b.x_pu) * std::sqrt(2.0) * b.s_max_pu / ds.v0);
  return span + drop;
}

}  // namespace mess::grid
