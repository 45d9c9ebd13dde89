#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "mess/error.hpp"
#include "mess/rolling.hpp"

namespace mess::rolling {

namespace {

constexpr double kKw = grid::kBaseKva;

// Fixed precision keeps repeated runs byte-identical.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::abs(v) < 5e-7) v = 0.0;
  return fmt::format("{:.6f}", v);
}

std::ofstream open(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw IoError("cannot write " + p.string());
  return os;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void write_metrics_rows(std::ostream& os, const Metrics& m) {
  fmt::print(os, "metric,value\n");
  fmt::print(os, "cost_total,{}\n", num(m.cost.total()));
  fmt::print(os, "cost_interruption,{}\n", num(m.cost.interruption));
  fmt::print(os, "cost_generation,{}\n", num(m.cost.generation));
  fmt::print(os, "cost_battery,{}\n", num(m.cost.battery));
  fmt::print(os, "cost_transport,{}\n", num(m.cost.transport));
  fmt::print(os, "restoration_critical_pct,{}\n", num(m.restoration_critical));
  fmt::print(os, "restoration_noncritical_pct,{}\n", num(m.restoration_noncritical));
  fmt::print(os, "restoration_total_pct,{}\n", num(m.restoration_total));
  fmt::print(os, "fallbacks,{}\n", m.fallbacks);
}

struct Series {
  std::string name;
  std::string color;
  std::vector<double> y;
};

// Minimal step chart; x is the interval index.
void svg_chart(std::ostream& os, const std::string& title, const std::string& y_label, const std::vector<Series>& series,
               double y_max) {
  const double w = 640, h = 320, left = 60, right = 140, top = 30, bottom = 40;
  const double pw = w - left - right, ph = h - top - bottom;
  std::size_t n = 0;
  for (const auto& s : series) n = std::max(n, s.y.size());
  if (y_max <= 0.0) y_max = 1.0;
  auto X = [&](double i) { return left + (n == 0 ? 0.0 : pw * i / static_cast<double>(n)); };
  auto Y = [&](double v) { return top + ph * (1.0 - std::clamp(v / y_max, 0.0, 1.0)); };

  fmt::print(os, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
                 "font-size=\"11\">\n", w, h);
  fmt::print(os, "<rect width=\"{}\" height=\"{}\" fill=\"white\"/>\n", w, h);
  fmt::print(os, "<text x=\"{}\" y=\"18\" font-size=\"13\">{}</text>\n", left, title);
  fmt::print(os, "<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", left, top, top + ph);
  fmt::print(os, "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", left, top + ph, left + pw);
  for (int k = 0; k <= 4; ++k) {
    const double v = y_max * k / 4.0;
    fmt::print(os, "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3g}</text>\n", left - 4, Y(v) + 4, v);
  }
  for (std::size_t i = 0; i < n; i += std::max<std::size_t>(1, n / 12))
    fmt::print(os, "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", X(i + 0.5), top + ph + 14, i);
  fmt::print(os, "<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">interval</text>\n", left + pw / 2,
             top + ph + 30);
  fmt::print(os, "<text x=\"12\" y=\"{:.1f}\" transform=\"rotate(-90 12 {:.1f})\" text-anchor=\"middle\">{}</text>\n",
             top + ph / 2, top + ph / 2, y_label);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    std::string pts;
    for (std::size_t i = 0; i < s.y.size(); ++i)
      pts += fmt::format("{:.1f},{:.1f} {:.1f},{:.1f} ", X(i), Y(s.y[i]), X(i + 1), Y(s.y[i]));
    if (!pts.empty()) pts.pop_back();
    fmt::print(os, "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", s.color, pts);
    const double ly = top + 12 + 16 * k;
    fmt::print(os, "<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"{3}\" "
                   "stroke-width=\"2\"/>\n", left + pw + 10, ly, left + pw + 30, s.color);
    fmt::print(os, "<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n", left + pw + 34, ly + 4, s.name);
  }
  fmt::print(os, "</svg>\n");
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

}  // namespace

void write_timeline_csv(std::ostream& os, const TimelineReport& report) {
  fmt::print(os,
             "t,window,scenarios,status,gap,plan_objective,nodes,hard_infeasible,shed_all,routing_violations,"
             "demand_kw,restored_kw,critical_demand_kw,critical_restored_kw,cost_interruption,cost_generation,"
             "cost_battery,cost_transport\n");
  for (const auto& r : report.intervals)
    fmt::print(os, "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.t, r.window, r.scenarios,
               milp::to_string(r.status), num(r.gap), num(r.plan_objective), r.nodes, int(r.hard_infeasible),
               int(r.shed_all), r.routing_violations, num(r.demand_kw), num(r.restored_kw),
               num(r.critical_demand_kw), num(r.critical_restored_kw), num(r.cost.interruption),
               num(r.cost.generation), num(r.cost.battery), num(r.cost.transport));
}

void write_metrics_csv(std::ostream& os, const Metrics& m) { write_metrics_rows(os, m); }

Metrics metrics_from_timeline(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("timeline: empty input");
  const auto header = split(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"shed_all", "demand_kw", "restored_kw", "critical_demand_kw", "critical_restored_kw",
                           "cost_interruption", "cost_generation", "cost_battery", "cost_transport"})
    if (!col.count(need)) throw IoError(std::string("timeline: missing column ") + need);

  TimelineReport rep;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw IoError(fmt::format("timeline:{}: expected {} cells", row, header.size()));
    auto get = [&](const char* name) {
      try {
        return std::stod(cells[col[name]]);
      } catch (const std::exception&) {
        throw IoError(fmt::format("timeline:{}: bad number in {}", row, name));
      }
    };
    IntervalRecord r;
    r.shed_all = get("shed_all") != 0.0;
    r.demand_kw = get("demand_kw");
    r.restored_kw = get("restored_kw");
    r.critical_demand_kw = get("critical_demand_kw");
    r.critical_restored_kw = get("critical_restored_kw");
    r.cost.interruption = get("cost_interruption");
    r.cost.generation = get("cost_generation");
    r.cost.battery = get("cost_battery");
    r.cost.transport = get("cost_transport");
    rep.intervals.push_back(r);
  }
  return compute_metrics(rep);
}

void write_bundle(const TimelineReport& report, const io::Case& c, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path d(dir);
  const auto metrics = compute_metrics(report);

  {
    auto os = open(d / "timeline.csv");
    write_timeline_csv(os, report);
  }
  {
    auto os = open(d / "metrics.csv");
    write_metrics_rows(os, metrics);
  }
  {
    auto os = open(d / "mess_trace.csv");
    fmt::print(os, "t,mess,start,arc_kind,arc_from,arc_to,end,on_road,moving,soc_start,soc_end,p_ch_kw,p_dch_kw\n");
    for (const auto& r : report.intervals)
      for (std::size_t w = 0; w < r.vehicles.size(); ++w) {
        const auto& v = r.vehicles[w];
        double ch = 0.0, dch = 0.0;
        for (std::size_t m = 0; m < r.dispatch.p_ch[w].size(); ++m) {
          ch += r.dispatch.p_ch[w][m];
          dch += r.dispatch.p_dch[w][m];
        }
        const double cap = c.fleet[w].capacity;
        std::string road;
        if (v.road_end) {
          const auto& rd = c.net().roads()[*v.road_end];
          road = fmt::format("{}-{}", rd.a, rd.b);
        }
        fmt::print(os, "{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.t, c.fleet[w].id, v.start,
                   tsn::to_string(v.arc.kind), v.arc.from, v.arc.to, v.end, road, int(v.moving), num(v.energy_start / cap), num(v.energy_end / cap),
                   num(ch * kKw), num(dch * kKw));
      }
  }
  {
    auto os = open(d / "topology_log.csv");
    fmt::print(os, "t,branch,action\n");
    for (const auto& e : report.topology) fmt::print(os, "{},{},{}\n", e.t, e.branch, e.closed ? "close" : "open");
  }
  {
    auto os = open(d / "dispatch.csv");
    fmt::print(os, "t,element,id,quantity,value\n");
    for (const auto& r : report.intervals) {
      const auto& x = r.dispatch;
      for (std::size_t i = 0; i < c.grid.buses.size() && i < x.p_r.size(); ++i) {
        const auto& id = c.grid.buses[i].id;
        fmt::print(os, "{},bus,{},p_restored_kw,{}\n", r.t, id, num(x.p_r[i] * kKw));
        fmt::print(os, "{},bus,{},q_restored_kvar,{}\n", r.t, id, num(x.q_r[i] * kKw));
        fmt::print(os, "{},bus,{},v_sq,{}\n", r.t, id, num(x.v[i]));
      }
      for (std::size_t k = 0; k < c.grid.branches.size() && k < x.alpha.size(); ++k) {
        const auto& id = c.grid.branches[k].id;
        fmt::print(os, "{},branch,{},closed,{}\n", r.t, id, int(x.alpha[k]));
        fmt::print(os, "{},branch,{},p_kw,{}\n", r.t, id, num(x.p[k] * kKw));
        fmt::print(os, "{},branch,{},q_kvar,{}\n", r.t, id, num(x.q[k] * kKw));
      }
      for (std::size_t m = 0; m < c.grid.microgrids.size() && m < x.p_dg.size(); ++m) {
        const auto& id = c.grid.microgrids[m].id;
        fmt::print(os, "{},microgrid,{},p_dg_kw,{}\n", r.t, id, num(x.p_dg[m] * kKw));
        fmt::print(os, "{},microgrid,{},q_dg_kvar,{}\n", r.t, id, num(x.q_dg[m] * kKw));
        fmt::print(os, "{},microgrid,{},p_export_kw,{}\n", r.t, id, num(x.p_g[m] * kKw));
        fmt::print(os, "{},microgrid,{},local_served_kw,{}\n", r.t, id, num(x.local[m] * kKw));
        fmt::print(os, "{},microgrid,{},energy_start_kwh,{}\n", r.t, id, num(r.mg_energy_start[m] * kKw));
      }
    }
  }
  {
    std::vector<Series> s(2);
    s[0] = {"demand", "#7f7f7f", {}};
    s[1] = {"restored", kPalette[0], {}};
    double ymax = 0.0;
    for (const auto& r : report.intervals) {
      s[0].y.push_back(r.demand_kw);
      s[1].y.push_back(r.restored_kw);
      ymax = std::max(ymax, r.demand_kw);
    }
    auto os = open(d / "restoration.svg");
    svg_chart(os, fmt::format("{} ({}, seed {})", report.case_name, to_string(report.mode), report.seed), "kW", s,
              ymax * 1.05);
  }
  {
    std::vector<Series> s;
    for (std::size_t w = 0; w < c.fleet.size(); ++w) {
      Series one{c.fleet[w].id, kPalette[w % std::size(kPalette)], {}};
      for (const auto& r : report.intervals)
        if (w < r.vehicles.size()) one.y.push_back(r.vehicles[w].energy_end / c.fleet[w].capacity);
      if (!one.y.empty()) s.push_back(std::move(one));
    }
    auto os = open(d / "soc.svg");
    svg_chart(os, "state of charge", "SOC", s, 1.0);
  }
}

}  // namespace mess::rolling
