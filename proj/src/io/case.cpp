#include "mess/case.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"
#include "mess/error.hpp"

namespace mess::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Minimal comma-separated table: header row, no quoting, '#' comments.
class Table {
 public:
  Table(const fs::path& path, std::vector<std::string> required) : file_(path.filename().string()) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string(), path.string());
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
      ++no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      auto cells = split(line);
      if (header_.empty()) {
        header_ = cells;
        for (std::size_t i = 0; i < header_.size(); ++i) column_[header_[i]] = i;
        for (const auto& r : required)
          if (!column_.count(r)) throw ValidationError("missing column '" + r + "'", where(no));
        continue;
      }
      if (cells.size() != header_.size())
        throw ValidationError(fmt::format("expected {} fields, found {}", header_.size(), cells.size()), where(no));
      rows_.push_back({no, std::move(cells)});
    }
    if (header_.empty()) throw ValidationError("empty table", file_);
  }

  struct Row {
    int line;
    std::vector<std::string> cells;
  };

  const std::vector<Row>& rows() const { return rows_; }
  bool has(const std::string& col) const { return column_.count(col) > 0; }
  std::string where(int line) const { return fmt::format("{}:{}", file_, line); }

  const std::string& text(const Row& r, const std::string& col) const { return r.cells[column_.at(col)]; }

  double number(const Row& r, const std::string& col) const {
    const auto& s = text(r, col);
    if (s == "inf") return scenario::kNever;
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ValidationError(fmt::format("column '{}': '{}' is not a number", col, s), where(r.line));
    }
  }

  double number_or(const Row& r, const std::string& col, double fallback) const {
    return has(col) && !text(r, col).empty() ? number(r, col) : fallback;
  }

  long integer(const Row& r, const std::string& col) const {
    const double v = number(r, col);
    if (v != std::floor(v)) throw ValidationError(fmt::format("column '{}' must be an integer", col), where(r.line));
    return static_cast<long>(v);
  }

  bool flag(const Row& r, const std::string& col) const {
    const auto& s = text(r, col);
    if (s == "1" || s == "true" || s == "yes") return true;
    if (s == "0" || s == "false" || s == "no" || s.empty()) return false;
    throw ValidationError(fmt::format("column '{}': '{}' is not a flag", col, s), where(r.line));
  }

 private:
  static std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t"), e = cell.find_last_not_of(" \t");
      out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  }

  std::string file_;
  std::vector<std::string> header_;
  std::map<std::string, std::size_t> column_;
  std::vector<Row> rows_;
};

template <class T>
T get(const json& j, const char* key, T fallback, const std::string& file) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("field '{}': {}", key, e.what()), file);
  }
}

double kv_or_inf(const json& j, const char* key, double fallback, const std::string& file) {
  if (!j.contains(key)) return fallback;
  if (j.at(key).is_string() && j.at(key).get<std::string>() == "inf") return milp::kInf;
  return get<double>(j, key, fallback, file);
}

}  // namespace

const char* to_string(ElementKind k) { return k == ElementKind::Road ? "road" : "branch"; }

ReoptPolicy parse_reopt(const std::string& s) {
  if (s == "remaining") return ReoptPolicy::RemainingHorizon;
  if (s == "single") return ReoptPolicy::SingleInterval;
  throw ConfigError("re-optimization policy must be 'remaining' or 'single', got '" + s + "'");
}

std::map<std::string, std::size_t> Case::microgrid_of_site() const {
  std::map<std::string, std::size_t> out;
  for (const auto& site : net().sites()) {
    if (site.kind != transport::SiteKind::Microgrid) continue;
    for (std::size_t m = 0; m < grid.microgrids.size(); ++m)
      if (grid.microgrids[m].id == site.id) out[site.id] = m;
  }
  return out;
}

double Case::profile_factor(grid::LoadClass c, int t) const {
  auto it = profile.find(c);
  if (it == profile.end() || it->second.empty()) return 1.0;
  const auto n = static_cast<int>(it->second.size());
  return it->second[static_cast<std::size_t>(((t % n) + n) % n)];
}

scenario::LoadForecast Case::forecast(int t0, int n) const {
  scenario::LoadForecast f;
  for (const auto& b : grid.buses) f.power_factor.push_back(b.power_factor());
  for (const auto& m : grid.microgrids) f.power_factor.push_back(m.local_pf);
  for (int t = t0; t < t0 + n; ++t) {
    std::vector<double> row;
    for (const auto& b : grid.buses) row.push_back(b.p_kw * profile_factor(b.load_class, t));
    for (const auto& m : grid.microgrids) row.push_back(m.local_p_kw * profile_factor(m.local_class, t));
    f.p_kw.push_back(std::move(row));
  }
  return f;
}

void validate(const Case& c) {
  if (!c.roads) throw ValidationError("case has no road network");
  if (c.horizon < 1) throw ValidationError("horizon must be at least one interval");
  if (c.prediction < 1 || c.prediction > c.horizon)
    throw ValidationError("prediction window must lie in [1, horizon]");
  if (!(c.dt_h > 0.0)) throw ValidationError("interval length must be positive");
  if (c.scenarios_kept < 1 || c.scenarios_generated < c.scenarios_kept)
    throw ValidationError("scenario counts must satisfy 1 <= keep <= generate");
  if (!(c.load_sd >= 0.0)) throw ValidationError("load standard deviation must be nonnegative");
  grid::validate(c.grid);
  const auto& net = c.net();
  if (c.road_outage.size() != net.roads().size() || c.branch_outage.size() != c.grid.branches.size())
    throw ValidationError("outage models must cover every road and branch");
  for (const auto& m : c.road_outage) scenario::validate(m);
  for (const auto& m : c.branch_outage) scenario::validate(m);
  const auto mg_sites = c.microgrid_of_site();
  for (const auto& site : net.sites())
    if (site.kind == transport::SiteKind::Microgrid && !mg_sites.count(site.id))
      throw ValidationError("microgrid site " + site.id + " has no microgrid");
  if (mg_sites.size() != c.grid.microgrids.size())
    throw ValidationError("every microgrid needs exactly one site");
  if (c.fleet.size() != c.fleet_depot.size()) throw ValidationError("every vehicle needs a depot");
  std::set<std::string> ids;
  for (std::size_t w = 0; w < c.fleet.size(); ++w) {
    const auto& v = c.fleet[w];
    if (!ids.insert(v.id).second) throw ValidationError("duplicate vehicle id " + v.id);
    if (c.fleet_depot[w] >= net.sites().size() || net.sites()[c.fleet_depot[w]].kind != transport::SiteKind::Depot)
      throw ValidationError("vehicle " + v.id + " starts at a site that is not a depot");
    if (!(v.capacity > 0.0) || v.p_ch_max < 0.0 || v.p_dch_max < 0.0)
      throw ValidationError("vehicle " + v.id + ": capacity and power limits must be positive");
    if (!(0.0 <= v.soc_min && v.soc_min < v.soc_max && v.soc_max <= 1.0))
      throw ValidationError("vehicle " + v.id + ": SOC bounds must satisfy 0 <= min < max <= 1");
    if (!(v.soc_min <= v.soc_init && v.soc_init <= v.soc_max))
      throw ValidationError(fmt::format("vehicle {}: initial SOC {}% outside [{}%, {}%]", v.id, v.soc_init * 100,
                                        v.soc_min * 100, v.soc_max * 100));
    if (!(v.eta_ch > 0.0 && v.eta_ch <= 1.0 && v.eta_dch > 0.0 && v.eta_dch <= 1.0))
      throw ValidationError("vehicle " + v.id + ": efficiencies must lie in (0, 1]");
    if (!(v.speed_kmh > 0.0)) throw ValidationError("vehicle " + v.id + ": speed must be positive");
  }
  for (const auto& e : c.events) {
    const std::size_t n = e.kind == ElementKind::Road ? net.roads().size() : c.grid.branches.size();
    if (e.index >= n || e.interval < 0 || e.interval >= c.horizon)
      throw ValidationError("scripted event outside the case");
  }
  for (const auto& [cls, f] : c.profile)
    for (double v : f)
      if (!(v >= 0.0)) throw ValidationError(std::string("negative profile factor for ") + grid::to_string(cls));
}

Case load_case(const std::string& json_path) {
  const fs::path path(json_path);
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open case file " + json_path, json_path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what(), json_path);
  }
  const std::string jf = path.filename().string();
  const fs::path dir = path.parent_path();
  Case c;
  c.directory = dir.string();
  c.name = get<std::string>(doc, "name", path.stem().string(), jf);
  c.synthetic = get<bool>(doc, "synthetic", false, jf);

  if (!doc.contains("files") || !doc["files"].is_object()) throw ValidationError("missing 'files' object", jf);
  const auto& files = doc["files"];
  auto file = [&](const char* key, bool required) -> std::optional<fs::path> {
    if (!files.contains(key)) {
      if (required) throw ValidationError(std::string("missing file entry '") + key + "'", jf);
      return std::nullopt;
    }
    fs::path p = dir / files[key].get<std::string>();
    if (!fs::exists(p)) throw ValidationError("referenced file does not exist: " + p.string(), p.string());
    return p;
  };

  const auto h = doc.value("horizon", json::object());
  c.horizon = get<int>(h, "intervals", 24, jf);
  c.prediction = get<int>(h, "prediction", 12, jf);
  c.dt_h = get<double>(h, "dt_h", 1.0, jf);

  const auto costs = doc.value("costs", json::object());
  c.critical_cost = get<double>(costs, "critical_per_kwh", 10.0, jf);
  c.noncritical_cost = get<double>(costs, "noncritical_per_kwh", 2.0, jf);
  const double gen_cost = get<double>(costs, "generation_per_kwh", 0.5, jf);

  const auto sc = doc.value("scenarios", json::object());
  c.scenarios_generated = get<std::size_t>(sc, "generate", 2000, jf);
  c.scenarios_kept = get<std::size_t>(sc, "keep", 10, jf);
  c.load_sd = get<double>(sc, "load_sd", 0.02, jf);

  const auto so = doc.value("solver", json::object());
  c.solver.rel_gap = get<double>(so, "rel_gap", 1e-4, jf);
  c.solver.time_limit_s = kv_or_inf(so, "time_limit_s", milp::kInf, jf);
  c.solver.node_limit = get<long>(so, "node_limit", c.solver.node_limit, jf);
  try {
    milp::validate(c.solver);
  } catch (const ConfigError& e) {
    throw ValidationError(e.what(), jf);
  }

  const auto fo = doc.value("formulation", json::object());
  const auto weighting = get<std::string>(fo, "transport_cost_weighting", "expected", jf);
  if (weighting == "expected")
    c.formulation.transport = milp::TransportWeighting::Expected;
  else if (weighting == "nominal")
    c.formulation.transport = milp::TransportWeighting::Nominal;
  else
    throw ValidationError("transport_cost_weighting must be 'expected' or 'nominal'", jf);
  c.formulation.pairwise_nonanticipativity = get<bool>(fo, "pairwise_nonanticipativity", false, jf);
  c.formulation.redundant_flow_bounds = get<bool>(fo, "redundant_flow_bounds", false, jf);
  try {
    c.reopt = parse_reopt(get<std::string>(doc, "reoptimization", "remaining", jf));
  } catch (const ConfigError& e) {
    throw ValidationError(e.what(), jf);
  }

  const double base_kv = get<double>(doc, "base_kv", 12.66, jf);
  const double vmin = get<double>(doc, "v_min", 0.9, jf), vmax = get<double>(doc, "v_max", 1.1, jf);
  if (!(base_kv > 0.0)) throw ValidationError("base_kv must be positive", jf);

  // roads and sites
  std::vector<transport::Road> roads;
  {
    Table t(*file("roads", true), {"a", "b", "length_km"});
    for (const auto& r : t.rows()) {
      const double km = t.number(r, "length_km");
      if (!(km > 0.0)) throw ValidationError("road length must be positive", t.where(r.line));
      roads.push_back({static_cast<int>(t.integer(r, "a")), static_cast<int>(t.integer(r, "b")), transport::km_to_m(km)});
    }
  }
  std::vector<transport::Site> sites;
  {
    Table t(*file("sites", true), {"id", "kind", "node"});
    for (const auto& r : t.rows()) {
      const auto& kind = t.text(r, "kind");
      transport::Site s;
      s.id = t.text(r, "id");
      if (s.id.empty() || s.id.find(' ') != std::string::npos || s.id == "~")
        throw ValidationError("site ids must be nonempty without spaces", t.where(r.line));
      if (kind == "microgrid")
        s.kind = transport::SiteKind::Microgrid;
      else if (kind == "depot")
        s.kind = transport::SiteKind::Depot;
      else
        throw ValidationError("site kind must be 'microgrid' or 'depot'", t.where(r.line));
      s.node = static_cast<int>(t.integer(r, "node"));
      sites.push_back(s);
    }
  }
  try {
    c.roads.emplace(std::move(roads), std::move(sites));
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), files["roads"].get<std::string>());
  }

  // feeders
  std::map<std::string, std::size_t> bus_index;
  {
    Table t(*file("buses", true), {"id", "feeder", "p_kw", "q_kvar"});
    for (const auto& r : t.rows()) {
      grid::Bus b;
      b.id = t.text(r, "id");
      if (!bus_index.emplace(b.id, c.grid.buses.size()).second)
        throw ValidationError("duplicate bus " + b.id, t.where(r.line));
      b.feeder = static_cast<std::size_t>(t.integer(r, "feeder"));
      b.p_kw = t.number(r, "p_kw");
      b.q_kvar = t.number(r, "q_kvar");
      if (b.p_kw < 0.0) throw ValidationError("negative load", t.where(r.line));
      try {
        b.load_class = t.has("class") ? grid::parse_load_class(t.text(r, "class")) : grid::LoadClass::Residential;
      } catch (const ValidationError& e) {
        throw ValidationError(e.what(), t.where(r.line));
      }
      b.critical = t.has("critical") && t.flag(r, "critical");
      b.cost_per_kwh = t.number_or(r, "w_per_kwh", b.critical ? c.critical_cost : c.noncritical_cost);
      if (b.cost_per_kwh < 0.0) throw ValidationError("negative interruption cost", t.where(r.line));
      c.grid.buses.push_back(b);
    }
  }
  auto bus_of = [&](const Table& t, const Table::Row& r, const std::string& col) {
    auto it = bus_index.find(t.text(r, col));
    if (it == bus_index.end()) throw ValidationError("unknown bus '" + t.text(r, col) + "'", t.where(r.line));
    return it->second;
  };
  {
    Table t(*file("branches", true), {"id", "from", "to", "r_ohm", "x_ohm", "s_max_kva"});
    std::set<std::string> seen;
    for (const auto& r : t.rows()) {
      grid::Branch b;
      b.id = t.text(r, "id");
      if (!seen.insert(b.id).second) throw ValidationError("duplicate branch " + b.id, t.where(r.line));
      b.from = bus_of(t, r, "from");
      b.to = bus_of(t, r, "to");
      const double ro = t.number(r, "r_ohm"), xo = t.number(r, "x_ohm"), s = t.number(r, "s_max_kva");
      if (ro < 0.0 || xo < 0.0) throw ValidationError("negative impedance", t.where(r.line));
      if (!(s > 0.0)) throw ValidationError("branch capacity must be positive", t.where(r.line));
      b.r_pu = grid::ohm_to_pu(ro, base_kv);
      b.x_pu = grid::ohm_to_pu(xo, base_kv);
      b.s_max_pu = s / grid::kBaseKva;
      b.switchable = t.has("switchable") && t.flag(r, "switchable");
      c.grid.branches.push_back(b);
    }
  }
  {
    Table t(*file("microgrids", true),
            {"id", "bus", "p_max_kw", "q_max_kvar", "e_max_kwh", "e_min_kwh", "e_init_kwh"});
    for (const auto& r : t.rows()) {
      grid::Microgrid m;
      m.id = t.text(r, "id");
      m.bus = bus_of(t, r, "bus");
      m.p_dg_max = t.number(r, "p_max_kw") / grid::kBaseKva;
      m.q_dg_max = t.number(r, "q_max_kvar") / grid::kBaseKva;
      m.e_max = t.number(r, "e_max_kwh") / grid::kBaseKva;
      m.e_min = t.number(r, "e_min_kwh") / grid::kBaseKva;
      m.e_init = t.number(r, "e_init_kwh") / grid::kBaseKva;
      if (!(m.e_min <= m.e_init && m.e_init <= m.e_max))
        throw ValidationError("initial energy outside [e_min, e_max]", t.where(r.line));
      m.cost_gen_per_kwh = t.number_or(r, "gen_cost_per_kwh", gen_cost);
      m.local_p_kw = t.number_or(r, "local_kw", 0.0);
      m.local_pf = t.number_or(r, "local_pf", 1.0);
      if (!(m.local_pf > 0.0 && m.local_pf <= 1.0)) throw ValidationError("power factor outside (0, 1]", t.where(r.line));
      try {
        m.local_class = t.has("local_class") ? grid::parse_load_class(t.text(r, "local_class")) : grid::LoadClass::Residential;
      } catch (const ValidationError& e) {
        throw ValidationError(e.what(), t.where(r.line));
      }
      m.local_cost_per_kwh = t.has("local_critical") && t.flag(r, "local_critical") ? c.critical_cost : c.noncritical_cost;
      c.grid.microgrids.push_back(m);
    }
  }
  c.grid.v0 = 1.0;
  c.grid.v_min.assign(c.grid.buses.size(), vmin);
  c.grid.v_max.assign(c.grid.buses.size(), vmax);

  // fleet
  {
    Table t(*file("fleet", true), {"id", "depot", "p_ch_kw", "p_dch_kw", "capacity_kwh", "soc_init"});
    for (const auto& r : t.rows()) {
      milp::MessSpec v;
      v.id = t.text(r, "id");
      v.p_ch_max = t.number(r, "p_ch_kw") / grid::kBaseKva;
      v.p_dch_max = t.number(r, "p_dch_kw") / grid::kBaseKva;
      v.capacity = t.number(r, "capacity_kwh") / grid::kBaseKva;
      v.soc_init = t.number(r, "soc_init");
      v.soc_min = t.number_or(r, "soc_min", 0.1);
      v.soc_max = t.number_or(r, "soc_max", 0.9);
      v.eta_ch = t.number_or(r, "eta_ch", 0.95);
      v.eta_dch = t.number_or(r, "eta_dch", 0.95);
      v.speed_kmh = t.number_or(r, "speed_kmh", 30.0);
      v.cost_bat_per_kwh = t.number_or(r, "c_bat_per_kwh", 0.2);
      v.cost_tran_per_h = t.number_or(r, "c_tran_per_h", 80.0);
      if (!(v.soc_min <= v.soc_init && v.soc_init <= v.soc_max))
        throw ValidationError(fmt::format("vehicle {}: initial SOC {}% outside [{}%, {}%]", v.id, v.soc_init * 100,
                                          v.soc_min * 100, v.soc_max * 100),
                              t.where(r.line));
      std::size_t depot = 0;
      try {
        depot = c.net().site_index(t.text(r, "depot"));
      } catch (const std::exception&) {
        throw ValidationError("unknown depot '" + t.text(r, "depot") + "'", t.where(r.line));
      }
      c.fleet.push_back(v);
      c.fleet_depot.push_back(depot);
    }
  }

  // load profiles
  if (auto p = file("profile", false)) {
    Table t(*p, {"interval"});
    for (const auto& r : t.rows())
      for (auto cls : {grid::LoadClass::Residential, grid::LoadClass::Commercial, grid::LoadClass::Industrial}) {
        const std::string col = grid::to_string(cls);
        if (t.has(col)) {
          const double v = t.number(r, col);
          if (v < 0.0) throw ValidationError("negative profile factor", t.where(r.line));
          c.profile[cls].push_back(v);
        }
      }
  }

  // outages: elements not listed never fail
  c.road_outage.assign(c.net().roads().size(), {});
  c.branch_outage.assign(c.grid.branches.size(), {});
  std::map<std::string, std::size_t> branch_index;
  for (std::size_t k = 0; k < c.grid.branches.size(); ++k) branch_index[c.grid.branches[k].id] = k;
  auto element = [&](const Table& t, const Table::Row& r) -> std::pair<ElementKind, std::size_t> {
    const auto& kind = t.text(r, "kind");
    const auto& id = t.text(r, "id");
    if (kind == "road") {
      const auto dash = id.find('-');
      if (dash == std::string::npos) throw ValidationError("road ids are written a-b", t.where(r.line));
      std::optional<std::size_t> k;
      try {
        k = c.net().find_road(std::stoi(id.substr(0, dash)), std::stoi(id.substr(dash + 1)));
      } catch (const std::exception&) {
        k.reset();
      }
      if (!k) throw ValidationError("unknown road '" + id + "'", t.where(r.line));
      return {ElementKind::Road, *k};
    }
    if (kind == "branch") {
      auto it = branch_index.find(id);
      if (it == branch_index.end()) throw ValidationError("unknown branch '" + id + "'", t.where(r.line));
      return {ElementKind::Branch, it->second};
    }
    throw ValidationError("element kind must be 'road' or 'branch'", t.where(r.line));
  };
  if (auto p = file("outages", false)) {
    Table t(*p, {"kind", "id", "initially_up", "mean_up_h", "mean_down_h"});
    for (const auto& r : t.rows()) {
      auto [kind, k] = element(t, r);
      scenario::AvailabilityModel m;
      m.initially_up = t.flag(r, "initially_up");
      m.mean_up_h = t.number(r, "mean_up_h");
      m.mean_down_h = t.number(r, "mean_down_h");
      try {
        scenario::validate(m);
      } catch (const ConfigError& e) {
        throw ValidationError(e.what(), t.where(r.line));
      }
      (kind == ElementKind::Road ? c.road_outage[k] : c.branch_outage[k]) = m;
    }
  }
  if (auto p = file("events", false)) {
    Table t(*p, {"interval", "kind", "id", "up"});
    for (const auto& r : t.rows()) {
      auto [kind, k] = element(t, r);
      ScriptedEvent e{static_cast<int>(t.integer(r, "interval")), kind, k, t.flag(r, "up")};
      if (e.interval < 0 || e.interval >= c.horizon)
        throw ValidationError("event interval outside the horizon", t.where(r.line));
      c.events.push_back(e);
    }
  }

  try {
    validate(c);
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), e.where().empty() ? jf : e.where());
  }
  return c;
}

}  // namespace mess::io
