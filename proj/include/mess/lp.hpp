#pragma once

// Bounded dual simplex on a sparse LU of the basis. Rows are treated as
// logical variables s = Ax with bounds, so the working system is [A -I] z = 0.

#include <cstddef>
#include <memory>
#include <vector>

#include "mess/milp.hpp"

namespace mess::milp {

/// Column-compressed LP: min c'x + offset, row_lb <= Ax <= row_ub, lb <= x <= ub.
struct LpData {
  std::size_t rows{0};
  std::size_t cols{0};
  std::vector<std::size_t> col_start{0};
  std::vector<std::size_t> row_index;
  std::vector<double> value;
  std::vector<double> cost, lb, ub;
  std::vector<double> row_lb, row_ub;
  double offset{0.0};
};

LpData lp_data(const Model& model);

enum class LpStatus { Optimal, Infeasible, Unbounded, Limit };

enum class VarState : signed char { Basic, AtLower, AtUpper };

/// Basis over structurals 0..cols-1 followed by logicals.
struct Basis {
  std::vector<std::size_t> head;  // one variable per row
  std::vector<VarState> state;
  bool empty() const { return head.empty(); }
};

struct LpOptions {
  double feas_tol{1e-7};
  double dual_tol{1e-7};
  long max_iterations{0};  // 0: 20 * (rows + cols) + 1000
  double time_limit_s{1e30};
  bool perturb{true};  // cost perturbation against dual degeneracy
};

struct LpResult {
  LpStatus status{LpStatus::Limit};
  double objective{0.0};
  std::vector<double> x;
  std::vector<double> row_activity;
  std::vector<double> duals;  // one per row
  Basis basis;
  /// Rows combined in the infeasibility certificate.
  std::vector<std::size_t> conflict_rows;
  long iterations{0};
};

class DualSimplex {
 public:
  explicit DualSimplex(const LpData& lp, LpOptions opts = {});
  ~DualSimplex();
  DualSimplex(const DualSimplex&) = delete;
  DualSimplex& operator=(const DualSimplex&) = delete;

  LpResult solve();
  /// Structural bounds replaced by lb/ub; starts from `warm` when given.
  LpResult solve(const std::vector<double>& lb, const std::vector<double>& ub, const Basis* warm = nullptr);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

LpResult solve_lp(const LpData& lp, LpOptions opts = {});

}  // namespace mess::milp
