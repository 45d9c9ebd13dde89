#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "mess/error.hpp"
#include "mess/milp.hpp"

namespace mess::milp {

namespace {

// Shortest round-trip text; values that need more than 12 characters spill
// past the fixed field rather than lose digits.
std::string num(double v) {
  if (v == 0.0) return "0";
  return fmt::format("{}", v);
}

std::string line(std::string_view f1, std::string_view f2, std::string_view f3, std::string_view f4,
                 std::string_view f5 = {}, std::string_view f6 = {}) {
  std::string s = fmt::format(" {:<2} {:<8}  {:<8}  {:<12}", f1, f2, f3, f4);
  if (!f5.empty()) s += fmt::format("   {:<8}  {}", f5, f6);
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

std::string row_label(std::size_t k) { return fmt::format("R{:07d}", k + 1); }
std::string col_label(std::size_t k) { return fmt::format("C{:07d}", k + 1); }

std::vector<std::size_t> row_order(const Model& model) {
  std::vector<std::string> markers;
  std::map<std::string, std::size_t> rank;
  for (const auto& r : model.rows())
    if (rank.emplace(r.marker, markers.size()).second) markers.push_back(r.marker);
  std::vector<std::size_t> order(model.rows().size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rank[model.rows()[a].marker] < rank[model.rows()[b].marker];
  });
  return order;
}

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw ValidationError(what, fmt::format("mps:{}", line_no));
}

double parse_num(const std::string& s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) fail(line_no, fmt::format("bad number '{}'", s));
    return v;
  } catch (const std::logic_error&) {
    fail(line_no, fmt::format("bad number '{}'", s));
  }
}

}  // namespace

void write_mps(std::ostream& os, const Model& model) {
  const auto order = row_order(model);
  std::vector<std::size_t> label(model.rows().size());
  for (std::size_t k = 0; k < order.size(); ++k) label[order[k]] = k;

  os << "* rows " << model.rows().size() << " columns " << model.vars().size() << "\n";
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& r = model.rows()[order[k]];
    os << "* ROW " << row_label(k) << ' ' << r.marker << ' ' << r.name << "\n";
  }
  for (std::size_t j = 0; j < model.vars().size(); ++j)
    os << "* COL " << col_label(j) << ' ' << model.vars()[j].name << "\n";
  os << "NAME          MESS\n";
  os << "ROWS\n";
  os << line("N", "OBJ", "", "") << "\n";
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto s = model.rows()[order[k]].sense;
    os << line(s == Sense::Le ? "L" : s == Sense::Ge ? "G" : "E", row_label(k), "", "") << "\n";
  }

  std::vector<std::vector<std::pair<std::size_t, double>>> cols(model.vars().size());
  for (std::size_t i = 0; i < model.rows().size(); ++i)
    for (const auto& t : model.rows()[i].terms) cols[t.var].emplace_back(label[i], t.coef);
  for (auto& c : cols) std::sort(c.begin(), c.end());

  os << "COLUMNS\n";
  bool in_int = false;
  for (std::size_t j = 0; j < model.vars().size(); ++j) {
    const auto& v = model.vars()[j];
    const bool is_int = v.kind == VarKind::Binary;
    if (is_int != in_int) {
      os << "    MARKER                 'MARKER'                 " << (is_int ? "'INTORG'" : "'INTEND'") << "\n";
      in_int = is_int;
    }
    const auto name = col_label(j);
    if (v.cost != 0.0 || cols[j].empty()) os << line("", name, "OBJ", num(v.cost)) << "\n";
    for (const auto& [r, a] : cols[j]) os << line("", name, row_label(r), num(a)) << "\n";
  }
  if (in_int) os << "    MARKER                 'MARKER'                 'INTEND'\n";

  os << "RHS\n";
  if (model.offset() != 0.0) os << line("", "RHS", "OBJ", num(-model.offset())) << "\n";
  for (std::size_t k = 0; k < order.size(); ++k) {
    const double b = model.rows()[order[k]].rhs;
    if (b != 0.0) os << line("", "RHS", row_label(k), num(b)) << "\n";
  }

  os << "BOUNDS\n";
  for (std::size_t j = 0; j < model.vars().size(); ++j) {
    const auto& v = model.vars()[j];
    const auto name = col_label(j);
    if (v.lb == v.ub) {
      os << line("FX", "BND", name, num(v.lb)) << "\n";
      continue;
    }
    if (v.lb == -kInf && v.ub == kInf) {
      os << line("FR", "BND", name, "") << "\n";
      continue;
    }
    if (v.lb == -kInf)
      os << line("MI", "BND", name, "") << "\n";
    else if (v.lb != 0.0)
      os << line("LO", "BND", name, num(v.lb)) << "\n";
    if (v.ub != kInf) os << line("UP", "BND", name, num(v.ub)) << "\n";
  }
  os << "ENDATA\n";
}

void export_mps(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path));
  write_mps(out, model);
  if (!out) throw std::runtime_error(fmt::format("write to {} failed", path));
}

Model read_mps(std::istream& is) {
  struct RowInfo {
    std::string label, name, marker;
    Sense sense{Sense::Le};
    double rhs{0.0};
    std::vector<Term> terms;
  };
  std::map<std::string, std::string> row_names, row_markers, col_names;
  std::vector<RowInfo> rows;
  std::map<std::string, std::size_t> row_at;
  struct ColInfo {
    std::string label;
    VarKind kind;
    double lb{0.0}, ub{kInf}, cost{0.0};
  };
  std::vector<ColInfo> cols;
  std::map<std::string, std::size_t> col_at;
  double offset = 0.0;
  std::string objective = "OBJ";

  std::string section, text;
  bool in_int = false;
  std::size_t line_no = 0;
  while (std::getline(is, text)) {
    ++line_no;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    std::istringstream ss(text);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (text[0] == '*') {
      if (tok.size() >= 4 && tok[1] == "ROW") {
        row_markers[tok[2]] = tok[3];
        row_names[tok[2]] = tok.size() >= 5 ? tok[4] : tok[2];
      } else if (tok.size() >= 4 && tok[1] == "COL") {
        col_names[tok[2]] = tok[3];
      }
      continue;
    }
    if (text[0] != ' ' && text[0] != '\t') {
      section = tok[0];
      if (section == "ENDATA") break;
      if (section != "NAME" && section != "ROWS" && section != "COLUMNS" && section != "RHS" && section != "BOUNDS" &&
          section != "RANGES")
        fail(line_no, fmt::format("unknown section '{}'", section));
      if (section == "RANGES") fail(line_no, "RANGES are not supported");
      continue;
    }
    if (section == "ROWS") {
      if (tok.size() != 2) fail(line_no, "ROWS entries need a type and a name");
      if (tok[0] == "N") {
        objective = tok[1];
        continue;
      }
      RowInfo r;
      r.label = tok[1];
      if (tok[0] == "L") r.sense = Sense::Le;
      else if (tok[0] == "G") r.sense = Sense::Ge;
      else if (tok[0] == "E") r.sense = Sense::Eq;
      else fail(line_no, fmt::format("unknown row type '{}'", tok[0]));
      row_at[r.label] = rows.size();
      rows.push_back(std::move(r));
    } else if (section == "COLUMNS") {
      if (tok.size() >= 3 && tok[1] == "'MARKER'") {
        if (tok[2] == "'INTORG'") in_int = true;
        else if (tok[2] == "'INTEND'") in_int = false;
        else fail(line_no, "bad marker line");
        continue;
      }
      if (tok.size() != 3 && tok.size() != 5) fail(line_no, "COLUMNS entries need 3 or 5 fields");
      auto [it, fresh] = col_at.emplace(tok[0], cols.size());
      if (fresh) cols.push_back({tok[0], in_int ? VarKind::Binary : VarKind::Continuous, 0.0, kInf, 0.0});
      if (!fresh && it->second + 1 != cols.size()) fail(line_no, fmt::format("column {} is not contiguous", tok[0]));
      for (std::size_t k = 1; k + 1 < tok.size(); k += 2) {
        const double a = parse_num(tok[k + 1], line_no);
        if (tok[k] == objective) {
          cols[it->second].cost = a;
          continue;
        }
        auto r = row_at.find(tok[k]);
        if (r == row_at.end()) fail(line_no, fmt::format("unknown row '{}'", tok[k]));
        rows[r->second].terms.push_back({it->second, a});
      }
    } else if (section == "RHS") {
      if (tok.size() != 3 && tok.size() != 5) fail(line_no, "RHS entries need 3 or 5 fields");
      for (std::size_t k = 1; k + 1 < tok.size(); k += 2) {
        const double b = parse_num(tok[k + 1], line_no);
        if (tok[k] == objective) {
          offset = -b;
          continue;
        }
        auto r = row_at.find(tok[k]);
        if (r == row_at.end()) fail(line_no, fmt::format("unknown row '{}'", tok[k]));
        rows[r->second].rhs = b;
      }
    } else if (section == "BOUNDS") {
      if (tok.size() < 3) fail(line_no, "BOUNDS entries need a type, a set and a column");
      auto c = col_at.find(tok[2]);
      if (c == col_at.end()) fail(line_no, fmt::format("unknown column '{}'", tok[2]));
      auto& col = cols[c->second];
      const auto& type = tok[0];
      const bool needs_value = type == "UP" || type == "LO" || type == "FX";
      if (needs_value && tok.size() != 4) fail(line_no, fmt::format("{} bound needs a value", type));
      const double v = needs_value ? parse_num(tok[3], line_no) : 0.0;
      if (type == "UP") col.ub = v;
      else if (type == "LO") col.lb = v;
      else if (type == "FX") col.lb = col.ub = v;
      else if (type == "FR") {
        col.lb = -kInf;
        col.ub = kInf;
      } else if (type == "MI") col.lb = -kInf;
      else if (type == "PL") col.ub = kInf;
      else if (type == "BV") {
        col.kind = VarKind::Binary;
        col.lb = 0.0;
        col.ub = 1.0;
      } else fail(line_no, fmt::format("unknown bound type '{}'", type));
    } else if (section != "NAME") {
      fail(line_no, "data outside a section");
    }
  }

  Model model;
  for (const auto& c : cols) {
    auto it = col_names.find(c.label);
    model.add_var(it == col_names.end() ? c.label : it->second, c.kind, c.lb, c.ub, c.cost);
  }
  for (auto& r : rows) {
    auto n = row_names.find(r.label);
    auto mk = row_markers.find(r.label);
    model.add_row(n == row_names.end() ? r.label : n->second, mk == row_markers.end() ? "mps" : mk->second,
                  std::move(r.terms), r.sense, r.rhs);
  }
  model.add_offset(offset);
  return model;
}

Model import_mps(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot read {}", path));
  return read_mps(in);
}

std::vector<double> read_solution(std::istream& is, const Model& model) {
  std::vector<double> x(model.vars().size(), 0.0);
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(is, text)) {
    ++line_no;
    std::istringstream ss(text);
    std::string name, value, extra;
    if (!(ss >> name) || name[0] == '#' || name[0] == '*') continue;
    if (!(ss >> value) || (ss >> extra)) throw ValidationError("expected 'name value'", fmt::format("solution:{}", line_no));
    auto j = model.find_var(name);
    if (!j) throw ValidationError(fmt::format("unknown variable '{}'", name), fmt::format("solution:{}", line_no));
    x[*j] = parse_num(value, line_no);
  }
  return x;
}

void write_solution(std::ostream& os, const Model& model, const std::vector<double>& x) {
  for (std::size_t j = 0; j < model.vars().size(); ++j) os << model.vars()[j].name << ' ' << num(x.at(j)) << "\n";
}

void write_markers_csv(std::ostream& os, const Model& model) {
  os << "row,name,marker,sense,rhs,terms\n";
  for (std::size_t i = 0; i < model.rows().size(); ++i) {
    const auto& r = model.rows()[i];
    os << i << ',' << r.name << ',' << r.marker << ','
       << (r.sense == Sense::Le ? "<=" : r.sense == Sense::Ge ? ">=" : "=") << ',' << num(r.rhs) << ','
       << r.terms.size() << "\n";
  }
}

}  // namespace mess::milp
