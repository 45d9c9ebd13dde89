#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <queue>
#include <set>
#include <limits>
#include <tuple>

#include "mess/error.hpp"
#include "mess/lp.hpp"
#include "mess/milp.hpp"

namespace mess::milp {

namespace {

using Clock = std::chrono::steady_clock;

struct Fix {
  std::size_t var;
  double lb, ub;
};

struct Node {
  double bound;
  long id;
  std::vector<Fix> fixes;
  std::shared_ptr<const Basis> basis;
};

// Depth first (newest node) until there is an incumbent, best bound after.
struct Worse {
  bool depth_first{true};
  bool operator()(const Node& a, const Node& b) const {
    if (depth_first) return a.id < b.id;
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id < b.id;  // newest among equal bounds, which plunges through ties
  }
};

std::vector<std::string> markers_of(const Model& model, const std::vector<std::size_t>& rows) {
  std::vector<std::string> out;
  for (auto i : rows) {
    const auto& mk = model.rows().at(i).marker;
    if (std::find(out.begin(), out.end(), mk) == out.end()) out.push_back(mk);
  }
  if (out.empty()) out.push_back("bounds");
  return out;
}

class BranchAndBound {
 public:
  BranchAndBound(const Model& model, const SolveOptions& opts)
      : model_(model), opts_(opts), lp_(lp_data(model)), start_(Clock::now()) {
    LpOptions lo;
    lo.feas_tol = opts.feas_tol;
    lo.dual_tol = opts.feas_tol;
    simplex_ = std::make_unique<DualSimplex>(lp_, lo);
    for (std::size_t j = 0; j < model.vars().size(); ++j)
      if (model.vars()[j].kind == VarKind::Binary) ints_.push_back(j);
  }

  Solution run() {
    Solution sol;
    auto root = lp(lp_.lb, lp_.ub, nullptr);
    ++sol.nodes;
    if (root.status == LpStatus::Infeasible) {
      sol.status = Status::Infeasible;
      sol.conflict_markers = markers_of(model_, root.conflict_rows);
      sol.lp_iterations = iterations_;
      return sol;
    }
    if (root.status == LpStatus::Unbounded) throw ConsistencyError("LP relaxation is unbounded");
    if (root.status == LpStatus::Limit) {
      sol.status = Status::Limit;
      sol.lp_iterations = iterations_;
      return sol;
    }
    dive(lp_.lb, lp_.ub, root);

    std::vector<Node> open;
    Worse order;
    auto push = [&](Node n) {
      open.push_back(std::move(n));
      std::push_heap(open.begin(), open.end(), order);
    };
    auto pop = [&] {
      if (order.depth_first && best_ < kInf) {
        order.depth_first = false;
        std::make_heap(open.begin(), open.end(), order);
      }
      std::pop_heap(open.begin(), open.end(), order);
      Node n = std::move(open.back());
      open.pop_back();
      return n;
    };
    long next_id = 0;
    double pruned = kInf;
    bool incomplete = false;
    push({root.objective, next_id++, {}, nullptr});
    bool first = true;
    while (!open.empty()) {
      if (out_of_time() || sol.nodes >= opts_.node_limit) {
        incomplete = true;
        break;
      }
      Node node = pop();
      if (node.bound >= cutoff()) {
        pruned = std::min(pruned, node.bound);
        continue;
      }
      auto lb = lp_.lb, ub = lp_.ub;
      for (const auto& f : node.fixes) {
        lb[f.var] = f.lb;
        ub[f.var] = f.ub;
      }
      LpResult res;
      if (first) {
        res = root;
        first = false;
      } else {
        res = lp(lb, ub, node.basis.get());
        ++sol.nodes;
      }
      if (res.status == LpStatus::Infeasible) continue;
      if (res.status == LpStatus::Unbounded) throw ConsistencyError("LP relaxation is unbounded");
      if (res.status == LpStatus::Limit) {
        incomplete = true;
        pruned = std::min(pruned, node.bound);
        continue;
      }
      if (res.objective >= cutoff()) {
        pruned = std::min(pruned, res.objective);
        continue;
      }
      const auto branch = most_fractional(res.x);
      if (branch == ints_.size()) {
        offer(res.x, res.objective);
        continue;
      }
      if (sol.nodes % 64 == 0) dive(lb, ub, res);
      try_heuristic(lb, ub, res);
      const auto j = ints_[branch];
      auto basis = std::make_shared<const Basis>(res.basis);
      auto down = node.fixes, up = node.fixes;
      down.push_back({j, lb[j], std::floor(res.x[j])});
      up.push_back({j, std::ceil(res.x[j]), ub[j]});
      // the child on the rounding side is explored first when diving
      Node dn{res.objective, 0, std::move(down), basis}, un{res.objective, 0, std::move(up), basis};
      if (res.x[j] - std::floor(res.x[j]) >= 0.5) std::swap(dn, un);
      dn.id = next_id++;
      un.id = next_id++;
      push(std::move(dn));
      push(std::move(un));
    }

    double bound = std::min(best_, pruned);
    for (const auto& n : open) bound = std::min(bound, n.bound);
    sol.lp_iterations = iterations_;
    if (best_x_.empty()) {
      sol.status = incomplete ? Status::Limit : Status::Infeasible;
      if (sol.status == Status::Infeasible) sol.conflict_markers = {"integrality"};
      sol.bound = bound;
      return sol;
    }
    polish();
    sol.x = best_x_;
    sol.objective = evaluate_objective(model_, best_x_);
    sol.bound = std::min(bound, sol.objective);
    sol.gap = std::max(0.0, (sol.objective - sol.bound) / std::max(1.0, std::abs(sol.objective)));
    sol.status = incomplete && sol.gap > opts_.rel_gap ? Status::Feasible : Status::Optimal;
    sol.lp_iterations = iterations_;
    return sol;
  }

 private:
  bool out_of_time() const {
    return std::chrono::duration<double>(Clock::now() - start_).count() > opts_.time_limit_s;
  }

  LpResult lp(const std::vector<double>& lb, const std::vector<double>& ub, const Basis* warm) {
    auto r = simplex_->solve(lb, ub, warm);
    iterations_ += r.iterations;
    return r;
  }

  double cutoff() const {
    if (best_ == kInf) return kInf;
    return best_ - std::max(1e-9, opts_.rel_gap) * std::max(1.0, std::abs(best_));
  }

  double frac(double v) const { return std::abs(v - std::round(v)); }

  /// Index into ints_ of the most fractional binary (lowest index on ties),
  /// or ints_.size() when all are integral.
  std::size_t most_fractional(const std::vector<double>& x) const {
    std::size_t pick = ints_.size();
    double best = opts_.int_tol;
    int level = std::numeric_limits<int>::min();
    for (std::size_t k = 0; k < ints_.size(); ++k) {
      const double f = frac(x[ints_[k]]);
      if (f <= opts_.int_tol) continue;
      const int pr = model_.vars()[ints_[k]].priority;
      if (pr > level || (pr == level && f > best)) {
        level = pr;
        best = f;
        pick = k;
      }
    }
    return pick;
  }

  void offer(const std::vector<double>& x, double obj) {
    if (obj < best_) {
      best_ = obj;
      best_x_ = x;
    }
  }

  void try_heuristic(std::vector<double> lb, std::vector<double> ub, const LpResult& res) {
    if (!opts_.heuristic) return;
    const auto fixes = opts_.heuristic(res.x);
    if (fixes.empty() || !tried_.insert(fixes).second) return;
    for (const auto& [j, v] : fixes) {
      if (v < lb[j] || v > ub[j]) return;
      lb[j] = ub[j] = v;
    }
    auto r = lp(lb, ub, &res.basis);
    if (r.status == LpStatus::Optimal && r.objective < cutoff() && most_fractional(r.x) == ints_.size())
      offer(r.x, r.objective);
  }

  /// Rounds the least fractional binary and re-solves until integral,
  /// infeasible or no better than the incumbent.
  void dive(std::vector<double> lb, std::vector<double> ub, LpResult res) {
    for (int step = 0; step < 200 && !out_of_time(); ++step) {
      if (res.objective >= cutoff()) return;
      std::size_t pick = ints_.size();
      double least = 1.0;
      for (std::size_t k = 0; k < ints_.size(); ++k) {
        const double f = frac(res.x[ints_[k]]);
        if (f > opts_.int_tol && f < least) {
          least = f;
          pick = k;
        }
      }
      if (pick == ints_.size()) {
        offer(res.x, res.objective);
        return;
      }
      const auto j = ints_[pick];
      const double v = std::round(res.x[j]);
      auto basis = res.basis;
      lb[j] = ub[j] = v;
      res = lp(lb, ub, &basis);
      if (res.status != LpStatus::Optimal) {
        lb[j] = ub[j] = 1.0 - v;
        res = lp(lb, ub, &basis);
        if (res.status != LpStatus::Optimal) return;
      }
    }
  }

  /// Fixes the binaries at their rounded incumbent values and re-solves so
  /// that the continuous part is exact.
  void polish() {
    auto lb = lp_.lb, ub = lp_.ub;
    for (auto j : ints_) lb[j] = ub[j] = std::round(best_x_[j]);
    auto res = lp(lb, ub, nullptr);
    if (res.status == LpStatus::Optimal) {
      best_x_ = res.x;
      for (auto j : ints_) best_x_[j] = lb[j];
    } else {
      for (auto j : ints_) best_x_[j] = std::round(best_x_[j]);
    }
  }

  const Model& model_;
  SolveOptions opts_;
  LpData lp_;
  std::unique_ptr<DualSimplex> simplex_;
  std::vector<std::size_t> ints_;
  Clock::time_point start_;
  double best_{kInf};
  std::vector<double> best_x_;
  long iterations_{0};
  std::set<std::vector<std::pair<std::size_t, double>>> tried_;
};

Solution solve_export(const Model& model, const SolveOptions& opts) {
  if (opts.export_path.empty()) throw ConfigError("export-only mode needs an export path");
  export_mps(model, opts.export_path);
  Solution sol;
  if (opts.solution_path.empty() || !std::filesystem::exists(opts.solution_path)) return sol;
  std::ifstream in(opts.solution_path);
  sol.x = read_solution(in, model);
  const auto rep = audit(model, sol.x);
  if (!rep.ok(std::max(1e-6, 10 * opts.feas_tol))) {
    sol.status = Status::Limit;
    sol.x.clear();
    return sol;
  }
  sol.status = Status::Feasible;
  sol.objective = evaluate_objective(model, sol.x);
  return sol;
}

}  // namespace

Solution solve(const Model& model, const SolveOptions& opts) {
  validate(opts);
  model.check();
  if (opts.mode == SolverMode::ExportOnly) return solve_export(model, opts);
  BranchAndBound bnb(model, opts);
  return bnb.run();
}

}  // namespace mess::milp
