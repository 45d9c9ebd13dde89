#pragma once

// Solver-agnostic mixed 0-1 linear model, the bundled branch-and-bound
// solver, an independent constraint audit and MPS / solution file I/O.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mess::milp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarKind { Continuous, Binary };
enum class Sense { Le, Ge, Eq };

struct Variable {
  std::string name;
  VarKind kind{VarKind::Continuous};
  double lb{0.0};
  double ub{kInf};
  double cost{0.0};
  int priority{0};  // binaries of higher priority are branched on first
};

struct Term {
  std::size_t var{};
  double coef{};
};

struct Constraint {
  std::string name;
  /// Constraint family the row belongs to (e.g. "route.cut"); used by audits,
  /// infeasibility hints and the MPS row order.
  std::string marker;
  std::vector<Term> terms;
  Sense sense{Sense::Le};
  double rhs{0.0};
};

class Model {
 public:
  std::size_t add_var(std::string name, VarKind kind, double lb, double ub, double cost = 0.0);
  std::size_t add_continuous(std::string name, double lb, double ub, double cost = 0.0) {
    return add_var(std::move(name), VarKind::Continuous, lb, ub, cost);
  }
  std::size_t add_binary(std::string name, double cost = 0.0) {
    return add_var(std::move(name), VarKind::Binary, 0.0, 1.0, cost);
  }
  /// Merges repeated variables and drops zero coefficients.
  std::size_t add_row(std::string name, std::string marker, std::vector<Term> terms, Sense sense, double rhs);

  void add_cost(std::size_t var, double c) { vars_.at(var).cost += c; }
  void set_bounds(std::size_t var, double lb, double ub);
  void set_priority(std::size_t var, int p) { vars_.at(var).priority = p; }
  double offset() const { return offset_; }
  void add_offset(double c) { offset_ += c; }

  const std::vector<Variable>& vars() const { return vars_; }
  const std::vector<Constraint>& rows() const { return rows_; }
  std::size_t binaries() const;
  std::optional<std::size_t> find_var(std::string_view name) const;
  std::optional<std::size_t> find_row(std::string_view name) const;
  /// Row count per marker.
  std::map<std::string, std::size_t> marker_counts() const;

  /// Throws ConsistencyError on: binary bounds other than [0,1], lb > ub
  /// with a binary, unreferenced variables, empty markers, duplicate or
  /// whitespace-containing names, non-finite coefficients.
  void check() const;

 private:
  std::vector<Variable> vars_;
  std::vector<Constraint> rows_;
  std::map<std::string, std::size_t, std::less<>> var_index_;
  std::map<std::string, std::size_t, std::less<>> row_index_;
  double offset_{0.0};
};

enum class SolverMode { Bundled, ExportOnly };

/// Primal heuristic: given a node's LP solution, returns (variable, value)
/// fixings to try, or nothing. The solver re-solves the LP with them and
/// keeps the result when it is integral.
using Heuristic = std::function<std::vector<std::pair<std::size_t, double>>(const std::vector<double>& x)>;

struct SolveOptions {
  double rel_gap{1e-4};
  double int_tol{1e-6};
  double feas_tol{1e-7};
  double time_limit_s{kInf};
  long node_limit{std::numeric_limits<long>::max()};
  SolverMode mode{SolverMode::Bundled};
  /// Export-only mode: where the MPS goes and where an external solution is
  /// read back from (skipped when empty or missing).
  std::string export_path;
  std::string solution_path;
  Heuristic heuristic;
};

/// Throws ConfigError unless tolerances and limits are positive.
void validate(const SolveOptions& opts);

enum class Status { Optimal, Feasible, Infeasible, Limit };
const char* to_string(Status s);

struct Solution {
  Status status{Status::Limit};
  std::vector<double> x;
  double objective{kInf};
  double bound{-kInf};
  double gap{kInf};
  long nodes{0};
  long lp_iterations{0};
  /// Infeasible models: marker groups of the rows in the LP infeasibility certificate.
  std::vector<std::string> conflict_markers;

  bool has_solution() const { return status == Status::Optimal || status == Status::Feasible; }
};

/// Branch-and-bound on dual-simplex LP relaxations. Deterministic.
Solution solve(const Model& model, const SolveOptions& opts = {});

/// Independent re-evaluation of a point against every bound and row.
struct AuditReport {
  double max_bound_violation{0.0};
  double max_row_violation{0.0};  // scaled by 1 + |rhs|
  double max_integrality{0.0};
  std::string worst_row;
  bool ok(double tol) const { return max_bound_violation <= tol && max_row_violation <= tol && max_integrality <= tol; }
};
AuditReport audit(const Model& model, const std::vector<double>& x);
double evaluate_objective(const Model& model, const std::vector<double>& x);

/// Fixed-format MPS. Rows are ordered by marker, then by index; a comment
/// header records the original names and markers so that import restores
/// them. Names in the file are R0000001... and C0000001....
void write_mps(std::ostream& os, const Model& model);
void export_mps(const Model& model, const std::string& path);
Model read_mps(std::istream& is);
Model import_mps(const std::string& path);

/// Plain `name value` lines; unknown names throw, missing ones read as 0.
std::vector<double> read_solution(std::istream& is, const Model& model);
void write_solution(std::ostream& os, const Model& model, const std::vector<double>& x);
/// row,name,marker,sense,rhs,terms
void write_markers_csv(std::ostream& os, const Model& model);

}  // namespace mess::milp
