#include "mess/lp.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>

#include "mess/error.hpp"

namespace mess::milp {

namespace {

constexpr double kBox = 1e9;  // stands in for infinite bounds
constexpr double kPivotTol = 1e-9;
constexpr std::size_t kRefactorEvery = 80;
constexpr long kDegenerateSwitch = 400;

double pow2(double s) { return std::exp2(std::round(std::log2(s))); }

// Deterministic value in [0, 1) per index.
double jitter(std::size_t j) {
  std::uint64_t z = static_cast<std::uint64_t>(j) + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

using Clock = std::chrono::steady_clock;

}  // namespace

struct DualSimplex::Impl {
  LpOptions opt;
  std::size_t m{0}, n{0}, N{0};
  // scaled structural matrix, by column and by row
  std::vector<std::size_t> cs, ri;
  std::vector<double> cv;
  std::vector<std::size_t> rs, rc;
  std::vector<double> rv;
  std::vector<double> col_scale, row_scale;
  double cost_scale{1.0};
  double offset{0.0};
  std::vector<double> c;  // size N, logicals 0; perturbed while solving
  std::vector<double> c_true;
  std::vector<double> row_lo, row_up;

  std::vector<double> lo, up, x, d, w;
  std::vector<char> artificial_lo, artificial_up;
  std::vector<VarState> state;
  std::vector<std::size_t> head;
  mutable Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  struct Eta {
    std::size_t r;
    double piv;
    std::vector<std::size_t> idx;
    std::vector<double> val;
  };
  std::vector<Eta> etas;
  long iterations{0};
  bool shifted{false};

  Impl(const LpData& lp, LpOptions o) : opt(o), m(lp.rows), n(lp.cols), N(lp.rows + lp.cols) {
    if (lp.col_start.size() != n + 1 || lp.cost.size() != n || lp.lb.size() != n || lp.ub.size() != n ||
        lp.row_lb.size() != m || lp.row_ub.size() != m)
      throw ConsistencyError("LP data has inconsistent dimensions");
    cs = lp.col_start;
    ri = lp.row_index;
    cv = lp.value;
    offset = lp.offset;
    scale();
    rs.assign(m + 1, 0);
    for (auto i : ri) ++rs[i + 1];
    for (std::size_t i = 0; i < m; ++i) rs[i + 1] += rs[i];
    rc.resize(ri.size());
    rv.resize(ri.size());
    auto fill = rs;
    for (std::size_t j = 0; j < n; ++j)
      for (auto k = cs[j]; k < cs[j + 1]; ++k) {
        rc[fill[ri[k]]] = j;
        rv[fill[ri[k]]++] = cv[k];
      }
    c.assign(N, 0.0);
    double cmax = 0.0;
    for (std::size_t j = 0; j < n; ++j) cmax = std::max(cmax, std::abs(lp.cost[j] * col_scale[j]));
    cost_scale = cmax > 0.0 ? pow2(1.0 / cmax) : 1.0;
    for (std::size_t j = 0; j < n; ++j) c[j] = lp.cost[j] * col_scale[j] * cost_scale;
    c_true = c;
    row_lo.resize(m);
    row_up.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      row_lo[i] = lp.row_lb[i] * row_scale[i];
      row_up[i] = lp.row_ub[i] * row_scale[i];
    }
  }

  void scale() {
    col_scale.assign(n, 1.0);
    row_scale.assign(m, 1.0);
    for (int pass = 0; pass < 6; ++pass) {
      std::vector<double> rmin(m, kInf), rmax(m, 0.0);
      for (std::size_t j = 0; j < n; ++j)
        for (auto k = cs[j]; k < cs[j + 1]; ++k) {
          const double a = std::abs(cv[k]) * col_scale[j];
          rmin[ri[k]] = std::min(rmin[ri[k]], a);
          rmax[ri[k]] = std::max(rmax[ri[k]], a);
        }
      for (std::size_t i = 0; i < m; ++i)
        if (rmax[i] > 0.0) row_scale[i] = 1.0 / std::sqrt(rmin[i] * rmax[i]);
      for (std::size_t j = 0; j < n; ++j) {
        double lo_ = kInf, hi_ = 0.0;
        for (auto k = cs[j]; k < cs[j + 1]; ++k) {
          const double a = std::abs(cv[k]) * row_scale[ri[k]];
          lo_ = std::min(lo_, a);
          hi_ = std::max(hi_, a);
        }
        if (hi_ > 0.0) col_scale[j] = 1.0 / std::sqrt(lo_ * hi_);
      }
    }
    for (auto& s : row_scale) s = pow2(s);
    for (auto& s : col_scale) s = pow2(s);
    for (std::size_t j = 0; j < n; ++j)
      for (auto k = cs[j]; k < cs[j + 1]; ++k) cv[k] *= row_scale[ri[k]] * col_scale[j];
  }

  // --- basis algebra -------------------------------------------------------

  bool factor() {
    Eigen::SparseMatrix<double> B(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t r = 0; r < m; ++r) {
      const auto j = head[r];
      if (j < n) {
        for (auto k = cs[j]; k < cs[j + 1]; ++k)
          trip.emplace_back(static_cast<int>(ri[k]), static_cast<int>(r), cv[k]);
      } else {
        trip.emplace_back(static_cast<int>(j - n), static_cast<int>(r), -1.0);
      }
    }
    B.setFromTriplets(trip.begin(), trip.end());
    B.makeCompressed();
    etas.clear();
    if (m == 0) return true;
    lu.analyzePattern(B);
    lu.factorize(B);
    return lu.info() == Eigen::Success;
  }

  void ftran(Eigen::VectorXd& v) const {
    if (m == 0) return;
    v = lu.solve(v);
    for (const auto& e : etas) {
      const double vr = v[static_cast<Eigen::Index>(e.r)] / e.piv;
      if (vr != 0.0)
        for (std::size_t k = 0; k < e.idx.size(); ++k) v[static_cast<Eigen::Index>(e.idx[k])] -= e.val[k] * vr;
      v[static_cast<Eigen::Index>(e.r)] = vr;
    }
  }

  void btran(Eigen::VectorXd& v) const {
    if (m == 0) return;
    for (auto it = etas.rbegin(); it != etas.rend(); ++it) {
      double s = v[static_cast<Eigen::Index>(it->r)];
      for (std::size_t k = 0; k < it->idx.size(); ++k) s -= it->val[k] * v[static_cast<Eigen::Index>(it->idx[k])];
      v[static_cast<Eigen::Index>(it->r)] = s / it->piv;
    }
    v = lu.transpose().solve(v);
  }

  void column(std::size_t j, Eigen::VectorXd& out) const {
    out.setZero(static_cast<Eigen::Index>(m));
    if (j < n) {
      for (auto k = cs[j]; k < cs[j + 1]; ++k) out[static_cast<Eigen::Index>(ri[k])] = cv[k];
    } else {
      out[static_cast<Eigen::Index>(j - n)] = -1.0;
    }
  }

  void compute_primal() {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < N; ++j) {
      if (state[j] == VarState::Basic || x[j] == 0.0) continue;
      if (j < n) {
        for (auto k = cs[j]; k < cs[j + 1]; ++k) rhs[static_cast<Eigen::Index>(ri[k])] -= cv[k] * x[j];
      } else {
        rhs[static_cast<Eigen::Index>(j - n)] += x[j];
      }
    }
    ftran(rhs);
    for (std::size_t r = 0; r < m; ++r) x[head[r]] = rhs[static_cast<Eigen::Index>(r)];
  }

  Eigen::VectorXd duals() const {
    Eigen::VectorXd y(static_cast<Eigen::Index>(m));
    for (std::size_t r = 0; r < m; ++r) y[static_cast<Eigen::Index>(r)] = c[head[r]];
    btran(y);
    return y;
  }

  void compute_dual() {
    const auto y = duals();
    for (std::size_t j = 0; j < n; ++j) {
      double s = c[j];
      for (auto k = cs[j]; k < cs[j + 1]; ++k) s -= y[static_cast<Eigen::Index>(ri[k])] * cv[k];
      d[j] = s;
    }
    for (std::size_t i = 0; i < m; ++i) d[n + i] = c[n + i] + y[static_cast<Eigen::Index>(i)];
    for (auto j : head) d[j] = 0.0;
  }

  /// Moves nonbasic variables to the bound their reduced cost asks for. A
  /// variable whose other bound is artificial gets its cost shifted instead.
  bool repair_dual() {
    bool moved = false;
    for (std::size_t j = 0; j < N; ++j) {
      if (state[j] == VarState::Basic || lo[j] == up[j]) continue;
      const bool to_upper = state[j] == VarState::AtLower && d[j] < -opt.dual_tol;
      const bool to_lower = state[j] == VarState::AtUpper && d[j] > opt.dual_tol;
      if (!to_upper && !to_lower) continue;
      if ((to_upper && artificial_up[j]) || (to_lower && artificial_lo[j])) {
        c[j] -= d[j];
        d[j] = 0.0;
        shifted = true;
        continue;
      }
      state[j] = to_upper ? VarState::AtUpper : VarState::AtLower;
      x[j] = to_upper ? up[j] : lo[j];
      moved = true;
    }
    return moved;
  }

  void slack_basis() {
    head.resize(m);
    for (std::size_t i = 0; i < m; ++i) head[i] = n + i;
    for (std::size_t j = 0; j < N; ++j) state[j] = c[j] >= 0.0 ? VarState::AtLower : VarState::AtUpper;
    for (auto j : head) state[j] = VarState::Basic;
  }

  void place_nonbasic() {
    for (std::size_t j = 0; j < N; ++j) {
      if (state[j] == VarState::AtLower) x[j] = lo[j];
      if (state[j] == VarState::AtUpper) x[j] = up[j];
    }
  }

  /// Full recomputation from a fresh factorization; falls back to the slack
  /// basis when the current one is singular.
  void refresh(bool reset_weights = false) {
    if (!factor()) {
      slack_basis();
      factor();
      reset_weights = true;
    }
    if (reset_weights || w.size() != m) w.assign(m, 1.0);
    compute_dual();
    repair_dual();
    place_nonbasic();
    compute_primal();
  }

  // --- main loop -----------------------------------------------------------

  LpResult run(const std::vector<double>& lb, const std::vector<double>& ub, const Basis* warm) {
    LpResult res;
    const auto start = Clock::now();
    if (lb.size() != n || ub.size() != n) throw ConsistencyError("bound vectors have the wrong length");
    lo.assign(N, 0.0);
    up.assign(N, 0.0);
    artificial_lo.assign(N, 0);
    artificial_up.assign(N, 0);
    for (std::size_t j = 0; j < N; ++j) {
      double l = j < n ? lb[j] / col_scale[j] : row_lo[j - n];
      double u = j < n ? ub[j] / col_scale[j] : row_up[j - n];
      if (l > u + opt.feas_tol * (1.0 + std::abs(l))) {
        res.status = LpStatus::Infeasible;
        if (j >= n) res.conflict_rows.push_back(j - n);
        return res;
      }
      if (l > u) l = u = 0.5 * (l + u);
      if (l == -kInf) {
        l = -kBox;
        artificial_lo[j] = 1;
      }
      if (u == kInf) {
        u = kBox;
        artificial_up[j] = 1;
      }
      lo[j] = l;
      up[j] = u;
    }
    // Zero costs make most ratio tests tie at zero; small distinct cost
    // shifts break the ties and are removed once the shifted LP is optimal.
    c = c_true;
    shifted = false;
    bool perturbed = opt.perturb;
    bool cleaned = false;
    if (perturbed)
      for (std::size_t j = 0; j < N; ++j)
        if (lo[j] != up[j] && !(artificial_lo[j] && artificial_up[j])) {
          // push toward a real bound
          const double dir = artificial_lo[j] ? -1.0 : artificial_up[j] ? 1.0 : (c[j] < 0.0 ? -1.0 : 1.0);
          c[j] += dir * 1e-6 * (1.0 + std::abs(c[j])) * (1.0 + jitter(j));
        }
    x.assign(N, 0.0);
    d.assign(N, 0.0);
    state.assign(N, VarState::AtLower);
    if (warm && warm->head.size() == m && warm->state.size() == N) {
      head = warm->head;
      state = warm->state;
    } else {
      slack_basis();
    }
    refresh(true);

    const long max_iter = opt.max_iterations > 0 ? opt.max_iterations : 20 * static_cast<long>(m + n) + 1000;
    long degenerate = 0;
    bool verified = false;
    Eigen::VectorXd rho, aq, tau;
    std::vector<double> alpha(N, 0.0);
    std::vector<std::size_t> touched;
    std::vector<char> is_touched(N, 0);

    for (;;) {
      if (res.iterations >= max_iter ||
          std::chrono::duration<double>(Clock::now() - start).count() > opt.time_limit_s) {
        res.status = LpStatus::Limit;
        break;
      }
      if (etas.size() >= kRefactorEvery) refresh();
      const bool bland = degenerate > kDegenerateSwitch;

      // Leaving row: dual steepest edge, or lowest variable index under Bland.
      std::size_t r = m;
      double best = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const auto p = head[i];
        double inf = 0.0;
        if (x[p] < lo[p] - opt.feas_tol) inf = lo[p] - x[p];
        else if (x[p] > up[p] + opt.feas_tol) inf = x[p] - up[p];
        if (inf == 0.0) continue;
        if (bland) {
          if (r == m || p < head[r]) r = i;
        } else {
          const double score = inf * inf / w[i];
          if (score > best) {
            best = score;
            r = i;
          }
        }
      }
      if (r == m) {
        // one cleanup pass on the true costs; shifts left after it stay
        if ((perturbed || shifted) && !cleaned) {
          c = c_true;
          perturbed = shifted = false;
          cleaned = true;
          refresh();
          continue;
        }
        if (!verified) {
          refresh();
          verified = true;
          continue;
        }
        res.status = LpStatus::Optimal;
        break;
      }
      verified = false;

      const auto p = head[r];
      const double delta = x[p] < lo[p] ? x[p] - lo[p] : x[p] - up[p];
      rho.setZero(static_cast<Eigen::Index>(m));
      rho[static_cast<Eigen::Index>(r)] = 1.0;
      btran(rho);

      for (auto j : touched) {
        alpha[j] = 0.0;
        is_touched[j] = 0;
      }
      touched.clear();
      for (std::size_t i = 0; i < m; ++i) {
        const double ri_ = rho[static_cast<Eigen::Index>(i)];
        if (std::abs(ri_) < 1e-13) continue;
        for (auto k = rs[i]; k < rs[i + 1]; ++k) {
          const auto j = rc[k];
          if (!is_touched[j]) {
            is_touched[j] = 1;
            touched.push_back(j);
          }
          alpha[j] += ri_ * rv[k];
        }
        const auto j = n + i;
        is_touched[j] = 1;
        touched.push_back(j);
        alpha[j] = -ri_;
      }

      // Entering column: Harris two-pass ratio test.
      const double sgn = delta < 0.0 ? -1.0 : 1.0;
      auto eligible = [&](std::size_t j, double& num, double& den) {
        if (state[j] == VarState::Basic || lo[j] == up[j]) return false;
        const double a = sgn * alpha[j];
        if (std::abs(a) < kPivotTol) return false;
        if (state[j] == VarState::AtLower && a > 0.0) {
          num = d[j];
          den = a;
          return true;
        }
        if (state[j] == VarState::AtUpper && a < 0.0) {
          num = -d[j];
          den = -a;
          return true;
        }
        return false;
      };
      std::sort(touched.begin(), touched.end());
      std::size_t q = N;
      if (bland) {
        double best_ratio = kInf;
        for (auto j : touched) {
          double num, den;
          if (!eligible(j, num, den)) continue;
          const double ratio = std::max(num, 0.0) / den;
          if (ratio < best_ratio - 1e-12) {
            best_ratio = ratio;
            q = j;
          }
        }
      } else {
        double bound = kInf;
        for (auto j : touched) {
          double num, den;
          if (!eligible(j, num, den)) continue;
          bound = std::min(bound, (num + opt.dual_tol) / den);
        }
        double best_piv = 0.0;
        for (auto j : touched) {
          double num, den;
          if (!eligible(j, num, den)) continue;
          if (std::max(num, 0.0) / den <= bound && den > best_piv) {
            best_piv = den;
            q = j;
          }
        }
      }
      if (q == N) {
        if (!etas.empty()) {
          refresh();
          continue;
        }
        res.status = LpStatus::Infeasible;
        for (std::size_t i = 0; i < m; ++i)
          if (std::abs(rho[static_cast<Eigen::Index>(i)]) > 1e-9) res.conflict_rows.push_back(i);
        break;
      }

      column(q, aq);
      ftran(aq);
      const double piv = aq[static_cast<Eigen::Index>(r)];
      if (std::abs(piv) < kPivotTol || std::abs(piv - alpha[q]) > 1e-6 * (1.0 + std::abs(piv))) {
        if (!etas.empty()) {
          refresh();
          continue;
        }
      }

      // A slightly wrong-signed entering cost is shifted to zero so the dual
      // step stays consistent with the basis.
      if ((state[q] == VarState::AtLower && d[q] < 0.0) || (state[q] == VarState::AtUpper && d[q] > 0.0)) {
        c[q] -= d[q];
        d[q] = 0.0;
        shifted = true;
      }
      const double theta_d = d[q] / alpha[q];
      if (theta_d != 0.0)
        for (auto j : touched)
          if (state[j] != VarState::Basic) d[j] -= theta_d * alpha[j];
      d[p] = -theta_d;
      d[q] = 0.0;
      degenerate = std::abs(theta_d) < 1e-12 ? degenerate + 1 : 0;

      const double theta_p = delta / piv;
      for (std::size_t i = 0; i < m; ++i) x[head[i]] -= theta_p * aq[static_cast<Eigen::Index>(i)];
      x[q] += theta_p;

      tau = rho;
      ftran(tau);
      const double wr = rho.squaredNorm();
      for (std::size_t i = 0; i < m; ++i) {
        if (i == r) continue;
        const double ratio = aq[static_cast<Eigen::Index>(i)] / piv;
        if (ratio == 0.0) continue;
        w[i] = std::max(w[i] - 2.0 * ratio * tau[static_cast<Eigen::Index>(i)] + ratio * ratio * wr, 1e-8);
      }
      w[r] = std::max(wr / (piv * piv), 1e-8);

      x[p] = delta < 0.0 ? lo[p] : up[p];
      state[p] = delta < 0.0 ? VarState::AtLower : VarState::AtUpper;
      state[q] = VarState::Basic;
      head[r] = q;
      Eta e{r, piv, {}, {}};
      for (std::size_t i = 0; i < m; ++i)
        if (i != r && aq[static_cast<Eigen::Index>(i)] != 0.0) {
          e.idx.push_back(i);
          e.val.push_back(aq[static_cast<Eigen::Index>(i)]);
        }
      etas.push_back(std::move(e));
      ++res.iterations;
    }

    iterations += res.iterations;
    res.basis.head = head;
    res.basis.state = state;
    if (res.status != LpStatus::Optimal) return res;

    for (std::size_t j = 0; j < N; ++j)
      if (state[j] != VarState::Basic && ((artificial_lo[j] && x[j] == lo[j]) || (artificial_up[j] && x[j] == up[j])) &&
          std::abs(d[j]) > opt.dual_tol) {
        res.status = LpStatus::Unbounded;
        return res;
      }
    res.x.resize(n);
    for (std::size_t j = 0; j < n; ++j) res.x[j] = std::clamp(x[j], lo[j], up[j]) * col_scale[j];
    res.row_activity.resize(m);
    for (std::size_t i = 0; i < m; ++i) res.row_activity[i] = x[n + i] / row_scale[i];
    const auto y = duals();
    res.duals.resize(m);
    for (std::size_t i = 0; i < m; ++i) res.duals[i] = y[static_cast<Eigen::Index>(i)] * row_scale[i] / cost_scale;
    double z = offset;
    for (std::size_t j = 0; j < n; ++j) z += c_true[j] / (col_scale[j] * cost_scale) * res.x[j];
    res.objective = z;
    return res;
  }

  std::vector<double> lb0, ub0;
};

DualSimplex::DualSimplex(const LpData& lp, LpOptions opts) : impl_(std::make_unique<Impl>(lp, opts)) {
  impl_->lb0 = lp.lb;
  impl_->ub0 = lp.ub;
}

DualSimplex::~DualSimplex() = default;

LpResult DualSimplex::solve() { return impl_->run(impl_->lb0, impl_->ub0, nullptr); }

LpResult DualSimplex::solve(const std::vector<double>& lb, const std::vector<double>& ub, const Basis* warm) {
  return impl_->run(lb, ub, warm);
}

LpResult solve_lp(const LpData& lp, LpOptions opts) {
  DualSimplex s(lp, opts);
  return s.solve();
}

}  // namespace mess::milp
