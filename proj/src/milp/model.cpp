#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "mess/error.hpp"
#include "mess/lp.hpp"
#include "mess/milp.hpp"

namespace mess::milp {

namespace {

bool plain_name(std::string_view s) {
  if (s.empty()) return false;
  return std::none_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; });
}

}  // namespace

std::size_t Model::add_var(std::string name, VarKind kind, double lb, double ub, double cost) {
  const auto idx = vars_.size();
  if (!var_index_.emplace(name, idx).second) throw ConsistencyError(fmt::format("duplicate variable '{}'", name));
  vars_.push_back({std::move(name), kind, lb, ub, cost});
  return idx;
}

std::size_t Model::add_row(std::string name, std::string marker, std::vector<Term> terms, Sense sense, double rhs) {
  std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) { return a.var < b.var; });
  std::vector<Term> merged;
  for (const auto& t : terms) {
    if (t.var >= vars_.size()) throw ConsistencyError(fmt::format("row '{}' references an unknown variable", name));
    if (!merged.empty() && merged.back().var == t.var)
      merged.back().coef += t.coef;
    else
      merged.push_back(t);
  }
  std::erase_if(merged, [](const Term& t) { return t.coef == 0.0; });
  const auto idx = rows_.size();
  if (!row_index_.emplace(name, idx).second) throw ConsistencyError(fmt::format("duplicate row '{}'", name));
  rows_.push_back({std::move(name), std::move(marker), std::move(merged), sense, rhs});
  return idx;
}

void Model::set_bounds(std::size_t var, double lb, double ub) {
  auto& v = vars_.at(var);
  v.lb = lb;
  v.ub = ub;
}

std::size_t Model::binaries() const {
  return static_cast<std::size_t>(
      std::count_if(vars_.begin(), vars_.end(), [](const Variable& v) { return v.kind == VarKind::Binary; }));
}

std::optional<std::size_t> Model::find_var(std::string_view name) const {
  auto it = var_index_.find(name);
  if (it == var_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Model::find_row(std::string_view name) const {
  auto it = row_index_.find(name);
  if (it == row_index_.end()) return std::nullopt;
  return it->second;
}

std::map<std::string, std::size_t> Model::marker_counts() const {
  std::map<std::string, std::size_t> out;
  for (const auto& r : rows_) ++out[r.marker];
  return out;
}

void Model::check() const {
  std::vector<char> used(vars_.size(), 0);
  for (const auto& r : rows_) {
    if (r.marker.empty() || !plain_name(r.marker)) throw ConsistencyError(fmt::format("row '{}' has a bad marker", r.name));
    if (!plain_name(r.name)) throw ConsistencyError(fmt::format("bad row name '{}'", r.name));
    if (!std::isfinite(r.rhs)) throw ConsistencyError(fmt::format("row '{}' has a non-finite right-hand side", r.name));
    for (const auto& t : r.terms) {
      if (!std::isfinite(t.coef)) throw ConsistencyError(fmt::format("row '{}' has a non-finite coefficient", r.name));
      used[t.var] = 1;
    }
  }
  for (std::size_t j = 0; j < vars_.size(); ++j) {
    const auto& v = vars_[j];
    if (!plain_name(v.name)) throw ConsistencyError(fmt::format("bad variable name '{}'", v.name));
    if (v.cost != 0.0) used[j] = 1;
    if (!used[j]) throw ConsistencyError(fmt::format("variable '{}' appears nowhere", v.name));
    if (!std::isfinite(v.cost)) throw ConsistencyError(fmt::format("variable '{}' has a non-finite cost", v.name));
    if (std::isnan(v.lb) || std::isnan(v.ub)) throw ConsistencyError(fmt::format("variable '{}' has a NaN bound", v.name));
    if (v.kind == VarKind::Binary && !(v.lb >= 0.0 && v.ub <= 1.0 && v.lb <= v.ub && (v.lb == 0.0 || v.lb == 1.0) &&
                                       (v.ub == 0.0 || v.ub == 1.0)))
      throw ConsistencyError(fmt::format("binary '{}' has bounds [{}, {}]", v.name, v.lb, v.ub));
  }
}

void validate(const SolveOptions& o) {
  if (!(o.rel_gap >= 0.0)) throw ConfigError("relative gap must be nonnegative");
  if (!(o.int_tol > 0.0 && o.int_tol < 0.5)) throw ConfigError("integrality tolerance must lie in (0, 0.5)");
  if (!(o.feas_tol > 0.0)) throw ConfigError("feasibility tolerance must be positive");
  if (!(o.time_limit_s > 0.0)) throw ConfigError("time limit must be positive");
  if (o.node_limit <= 0) throw ConfigError("node limit must be positive");
}

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal:
      return "optimal";
    case Status::Feasible:
      return "feasible";
    case Status::Infeasible:
      return "infeasible";
    case Status::Limit:
      return "limit";
  }
  return "?";
}

AuditReport audit(const Model& model, const std::vector<double>& x) {
  AuditReport rep;
  if (x.size() != model.vars().size()) {
    rep.max_row_violation = kInf;
    rep.worst_row = "dimension";
    return rep;
  }
  for (std::size_t j = 0; j < x.size(); ++j) {
    const auto& v = model.vars()[j];
    rep.max_bound_violation = std::max({rep.max_bound_violation, v.lb - x[j], x[j] - v.ub});
    if (v.kind == VarKind::Binary)
      rep.max_integrality = std::max(rep.max_integrality, std::abs(x[j] - std::round(x[j])));
  }
  for (const auto& r : model.rows()) {
    double a = 0.0;
    for (const auto& t : r.terms) a += t.coef * x[t.var];
    double viol = 0.0;
    if (r.sense != Sense::Ge) viol = std::max(viol, a - r.rhs);
    if (r.sense != Sense::Le) viol = std::max(viol, r.rhs - a);
    viol /= 1.0 + std::abs(r.rhs);
    if (viol > rep.max_row_violation) {
      rep.max_row_violation = viol;
      rep.worst_row = r.name;
    }
  }
  return rep;
}

double evaluate_objective(const Model& model, const std::vector<double>& x) {
  double z = model.offset();
  for (std::size_t j = 0; j < model.vars().size(); ++j) z += model.vars()[j].cost * x.at(j);
  return z;
}

LpData lp_data(const Model& model) {
  LpData lp;
  lp.rows = model.rows().size();
  lp.cols = model.vars().size();
  std::vector<std::size_t> count(lp.cols, 0);
  for (const auto& r : model.rows())
    for (const auto& t : r.terms) ++count[t.var];
  lp.col_start.assign(lp.cols + 1, 0);
  for (std::size_t j = 0; j < lp.cols; ++j) lp.col_start[j + 1] = lp.col_start[j] + count[j];
  lp.row_index.resize(lp.col_start.back());
  lp.value.resize(lp.col_start.back());
  auto fill = lp.col_start;
  for (std::size_t i = 0; i < lp.rows; ++i)
    for (const auto& t : model.rows()[i].terms) {
      lp.row_index[fill[t.var]] = i;
      lp.value[fill[t.var]++] = t.coef;
    }
  for (const auto& v : model.vars()) {
    lp.cost.push_back(v.cost);
    lp.lb.push_back(v.lb);
    lp.ub.push_back(v.ub);
  }
  for (const auto& r : model.rows()) {
    lp.row_lb.push_back(r.sense == Sense::Le ? -kInf : r.rhs);
    lp.row_ub.push_back(r.sense == Sense::Ge ? kInf : r.rhs);
  }
  lp.offset = model.offset();
  return lp;
}

}  // namespace mess::milp
