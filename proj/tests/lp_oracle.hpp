#pragma once

// Dense two-phase tableau simplex with Bland's rule. Slow and simple; used
// only to check the sparse solver.

#include <cmath>
#include <limits>
#include <vector>

#include "mess/milp.hpp"

namespace oracle {

enum class Outcome { Optimal, Infeasible, Unbounded };

struct LpAnswer {
  Outcome outcome{Outcome::Infeasible};
  double objective{0.0};
  std::vector<double> x;
};

namespace detail {

// min c'y, Ay = b (b >= 0), y >= 0. Returns false when unbounded.
inline bool tableau(std::vector<std::vector<double>>& T, std::vector<std::size_t>& basis, std::size_t ncols,
                    const std::vector<char>& allowed) {
  const std::size_t m = basis.size();
  const double eps = 1e-11;
  for (int guard = 0; guard < 100000; ++guard) {
    std::size_t enter = ncols;
    for (std::size_t j = 0; j < ncols; ++j)
      if (allowed[j] && T[m][j] < -eps) {
        enter = j;
        break;
      }
    if (enter == ncols) return true;
    std::size_t leave = m;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i)
      if (T[i][enter] > eps) {
        const double ratio = T[i][ncols] / T[i][enter];
        if (ratio < best - 1e-12 || (std::abs(ratio - best) <= 1e-12 && basis[i] < basis[leave])) {
          best = ratio;
          leave = i;
        }
      }
    if (leave == m) return false;
    const double piv = T[leave][enter];
    for (auto& v : T[leave]) v /= piv;
    for (std::size_t i = 0; i <= m; ++i) {
      if (i == leave || T[i][enter] == 0.0) continue;
      const double f = T[i][enter];
      for (std::size_t j = 0; j <= ncols; ++j) T[i][j] -= f * T[leave][j];
    }
    basis[leave] = enter;
  }
  return true;
}

}  // namespace detail

/// Solves the continuous relaxation of `model` with the given variable
/// bounds. Lower bounds must be finite.
inline LpAnswer solve_dense(const mess::milp::Model& model, const std::vector<double>& lb,
                            const std::vector<double>& ub) {
  using mess::milp::Sense;
  LpAnswer ans;
  // fixed variables become constants
  std::vector<std::size_t> col(model.vars().size(), static_cast<std::size_t>(-1)), var;
  for (std::size_t j = 0; j < model.vars().size(); ++j) {
    if (lb[j] > ub[j]) return ans;
    if (lb[j] == ub[j]) continue;
    col[j] = var.size();
    var.push_back(j);
  }
  const std::size_t n = var.size();
  struct Row {
    std::vector<double> a;
    Sense sense;
    double b;
  };
  std::vector<Row> rows;
  for (const auto& r : model.rows()) {
    Row row{std::vector<double>(n, 0.0), r.sense, r.rhs};
    for (const auto& t : r.terms) {
      row.b -= t.coef * lb[t.var];
      if (col[t.var] != static_cast<std::size_t>(-1)) row.a[col[t.var]] += t.coef;
    }
    bool empty = true;
    for (double v : row.a) empty = empty && v == 0.0;
    if (empty) {
      const bool ok = r.sense == Sense::Le ? row.b >= -1e-9 : r.sense == Sense::Ge ? row.b <= 1e-9 : std::abs(row.b) <= 1e-9;
      if (!ok) return ans;
      continue;
    }
    rows.push_back(row);
  }
  for (std::size_t c = 0; c < n; ++c)
    if (ub[var[c]] != mess::milp::kInf) {
      Row row{std::vector<double>(n, 0.0), Sense::Le, ub[var[c]] - lb[var[c]]};
      row.a[c] = 1.0;
      rows.push_back(row);
    }
  const std::size_t m = rows.size();
  std::size_t slacks = 0;
  for (const auto& r : rows) slacks += r.sense != Sense::Eq;
  const std::size_t ncols = n + slacks + m;  // structurals, slacks, artificials
  std::vector<std::vector<double>> T(m + 1, std::vector<double>(ncols + 1, 0.0));
  std::vector<std::size_t> basis(m);
  std::size_t s = n;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) T[i][j] = rows[i].a[j];
    if (rows[i].sense == Sense::Le) T[i][s++] = 1.0;
    if (rows[i].sense == Sense::Ge) T[i][s++] = -1.0;
    T[i][ncols] = rows[i].b;
    if (T[i][ncols] < 0.0)
      for (auto& v : T[i]) v = -v;
    T[i][n + slacks + i] = 1.0;
    basis[i] = n + slacks + i;
  }
  // phase 1
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j <= ncols; ++j)
      if (j < n + slacks || j == ncols) T[m][j] -= T[i][j];
  std::vector<char> allowed(ncols, 1);
  detail::tableau(T, basis, ncols, allowed);
  if (-T[m][ncols] > 1e-7) return ans;
  // drive artificials out where possible
  for (std::size_t i = 0; i < m; ++i) {
    if (basis[i] < n + slacks) continue;
    for (std::size_t j = 0; j < n + slacks; ++j)
      if (std::abs(T[i][j]) > 1e-9) {
        const double piv = T[i][j];
        for (auto& v : T[i]) v /= piv;
        for (std::size_t k = 0; k <= m; ++k) {
          if (k == i || T[k][j] == 0.0) continue;
          const double f = T[k][j];
          for (std::size_t c = 0; c <= ncols; ++c) T[k][c] -= f * T[i][c];
        }
        basis[i] = j;
        break;
      }
  }
  for (std::size_t j = n + slacks; j < ncols; ++j) allowed[j] = 0;
  // phase 2 objective row
  std::fill(T[m].begin(), T[m].end(), 0.0);
  for (std::size_t j = 0; j < n; ++j) T[m][j] = model.vars()[var[j]].cost;
  for (std::size_t i = 0; i < m; ++i) {
    const auto b = basis[i];
    if (T[m][b] == 0.0) continue;
    const double f = T[m][b];
    for (std::size_t c = 0; c <= ncols; ++c) T[m][c] -= f * T[i][c];
  }
  if (!detail::tableau(T, basis, ncols, allowed)) {
    ans.outcome = Outcome::Unbounded;
    return ans;
  }
  ans.outcome = Outcome::Optimal;
  ans.x = lb;
  for (std::size_t i = 0; i < m; ++i)
    if (basis[i] < n) ans.x[var[basis[i]]] += T[i][ncols];
  ans.objective = mess::milp::evaluate_objective(model, ans.x);
  return ans;
}

inline LpAnswer solve_dense(const mess::milp::Model& model) {
  std::vector<double> lb, ub;
  for (const auto& v : model.vars()) {
    lb.push_back(v.lb);
    ub.push_back(v.ub);
  }
  return solve_dense(model, lb, ub);
}

/// Exhaustive enumeration of every binary assignment with the LP oracle for
/// the continuous rest. Returns Infeasible when no assignment is feasible.
inline LpAnswer enumerate(const mess::milp::Model& model) {
  std::vector<std::size_t> ints;
  std::vector<double> lb, ub;
  for (std::size_t j = 0; j < model.vars().size(); ++j) {
    lb.push_back(model.vars()[j].lb);
    ub.push_back(model.vars()[j].ub);
    if (model.vars()[j].kind == mess::milp::VarKind::Binary) ints.push_back(j);
  }
  LpAnswer best;
  best.objective = std::numeric_limits<double>::infinity();
  for (unsigned long mask = 0; mask < (1ul << ints.size()); ++mask) {
    auto l = lb, u = ub;
    bool ok = true;
    for (std::size_t k = 0; k < ints.size(); ++k) {
      const double v = (mask >> k) & 1ul;
      if (v < lb[ints[k]] || v > ub[ints[k]]) ok = false;
      l[ints[k]] = u[ints[k]] = v;
    }
    if (!ok) continue;
    auto a = solve_dense(model, l, u);
    if (a.outcome == Outcome::Unbounded) return a;
    if (a.outcome == Outcome::Optimal && a.objective < best.objective) best = a;
  }
  return best;
}

/// Depth-first enumeration of binary assignments. A branch is cut only when
/// some row cannot be met by any completion (interval bounds of every term),
/// so every assignment that could be feasible reaches the LP oracle.
inline LpAnswer enumerate_pruned(const mess::milp::Model& model, long* leaves = nullptr) {
  using mess::milp::Sense;
  const std::size_t n = model.vars().size();
  std::vector<double> lb(n), ub(n);
  std::vector<std::size_t> ints;
  for (std::size_t j = 0; j < n; ++j) {
    lb[j] = model.vars()[j].lb;
    ub[j] = model.vars()[j].ub;
    if (model.vars()[j].kind == mess::milp::VarKind::Binary) ints.push_back(j);
  }
  std::vector<std::vector<std::size_t>> rows_of(n);
  for (std::size_t i = 0; i < model.rows().size(); ++i)
    for (const auto& t : model.rows()[i].terms) rows_of[t.var].push_back(i);
  auto possible = [&](std::size_t i) {
    const auto& r = model.rows()[i];
    double lo = 0.0, hi = 0.0;
    for (const auto& t : r.terms) {
      const double a = t.coef * lb[t.var], b = t.coef * ub[t.var];
      lo += std::min(a, b);
      hi += std::max(a, b);
    }
    const double tol = 1e-7 * (1.0 + std::abs(r.rhs));
    if (r.sense != Sense::Ge && lo > r.rhs + tol) return false;
    if (r.sense != Sense::Le && hi < r.rhs - tol) return false;
    return true;
  };
  LpAnswer best;
  best.objective = std::numeric_limits<double>::infinity();
  long count = 0;
  auto rec = [&](auto&& self, std::size_t k) -> void {
    if (k == ints.size()) {
      ++count;
      auto a = solve_dense(model, lb, ub);
      if (a.outcome == Outcome::Optimal && a.objective < best.objective) best = a;
      return;
    }
    const auto j = ints[k];
    const double l0 = lb[j], u0 = ub[j];
    for (double v : {0.0, 1.0}) {
      if (v < l0 || v > u0) continue;
      lb[j] = ub[j] = v;
      bool ok = true;
      for (auto i : rows_of[j])
        if (!possible(i)) {
          ok = false;
          break;
        }
      if (ok) self(self, k + 1);
    }
    lb[j] = l0;
    ub[j] = u0;
  };
  rec(rec, 0);
  if (leaves) *leaves = count;
  if (best.objective != std::numeric_limits<double>::infinity()) best.outcome = Outcome::Optimal;
  return best;
}

}  // namespace oracle
