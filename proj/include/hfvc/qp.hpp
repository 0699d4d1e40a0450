#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <vector>

#include "hfvc/errors.hpp"
#include "hfvc/geom.hpp"

namespace hfvc::qp {

enum class QpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::Unbounded: return "unbounded";
    default: return "iteration-limit";
  }
}

struct QpOptions {
  int max_iterations = 0;  // 0 -> 40n + 200
  double tol = 1e-10;
  double feas_tol = 1e-8;
};

struct QpResult {
  VecX x;
  VecX eq_multipliers;     // one per equality row
  QpStatus status = QpStatus::Optimal;
  int iterations = 0;
  double stationarity = 0.0;  // inf-norm KKT residual on free variables
};

/// Orthonormal basis of the null space of A (full SVD, rank by relative
/// singular-value cutoff). Columns span {x : Ax = 0}.
inline MatX null_space_basis(const MatX& a, double rel_tol = 1e-10) {
  if (a.rows() == 0) return MatX::Identity(a.cols(), a.cols());
  Eigen::JacobiSVD<MatX> svd(a, Eigen::ComputeFullV);
  const double cutoff =
      rel_tol * std::max(1.0, svd.singularValues()(0)) * std::max(a.rows(), a.cols());
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    if (svd.singularValues()(i) > cutoff) ++rank;
  }
  return svd.matrixV().rightCols(a.cols() - rank);
}

/// min ||F x - g||^2 subject to A x = b. Null-space method; the minimum-norm
/// solution is taken in the reduced coordinates so the result is unique and
/// deterministic even when F loses rank on the feasible set.
/// kkt_residual_out (optional) receives ||Z' F'(Fx - g)||_inf, which is zero
/// at exact optimality.
inline VecX equality_constrained_lsq(const MatX& f, const VecX& g, const MatX& a,
                                     const VecX& b, double* kkt_residual_out = nullptr) {
  VecX x_part = VecX::Zero(f.cols());
  if (a.rows() > 0) {
    x_part = a.completeOrthogonalDecomposition().solve(b);
    if ((a * x_part - b).lpNorm<Eigen::Infinity>() >
        1e-8 * std::max(1.0, b.lpNorm<Eigen::Infinity>())) {
      throw SolverError("equality_constrained_lsq: inconsistent equality constraints");
    }
  }
  const MatX z = null_space_basis(a);
  VecX x = x_part;
  if (z.cols() > 0) {
    const MatX fz = f * z;
    const VecX y = fz.completeOrthogonalDecomposition().solve(g - f * x_part);
    x += z * y;
  }
  if (kkt_residual_out) {
    const VecX grad = f.transpose() * (f * x - g);
    *kkt_residual_out =
        z.cols() > 0 ? (z.transpose() * grad).lpNorm<Eigen::Infinity>() : 0.0;
  }
  return x;
}

namespace detail {

struct KktSolve {
  VecX p;       // step on free variables (full-size, zeros on clamped)
  VecX mu;      // equality multipliers
  bool consistent = true;
};

// Direction subproblem: min q(x+p) s.t. A p = 0, p_i = 0 for clamped i.
// Solved as a symmetric KKT system on the free block via complete orthogonal
// decomposition, which also flags inconsistency (= unbounded subproblem).
inline KktSolve solve_direction(const MatX& h, const VecX& grad, const MatX& a,
                                const std::vector<int>& free_idx, int n) {
  const int nf = static_cast<int>(free_idx.size());
  const int me = static_cast<int>(a.rows());
  KktSolve out;
  out.p = VecX::Zero(n);
  out.mu = VecX::Zero(me);
  if (nf == 0) return out;

  MatX k = MatX::Zero(nf + me, nf + me);
  VecX rhs = VecX::Zero(nf + me);
  for (int i = 0; i < nf; ++i) {
    for (int j = 0; j < nf; ++j) k(i, j) = h(free_idx[i], free_idx[j]);
    rhs(i) = -grad(free_idx[i]);
    for (int r = 0; r < me; ++r) {
      k(i, nf + r) = a(r, free_idx[i]);
      k(nf + r, i) = a(r, free_idx[i]);
    }
  }
  const VecX sol = k.completeOrthogonalDecomposition().solve(rhs);
  const double scale =
      std::max({1.0, grad.lpNorm<Eigen::Infinity>(), h.lpNorm<Eigen::Infinity>()});
  if ((k * sol - rhs).lpNorm<Eigen::Infinity>() > 1e-7 * scale) {
    out.consistent = false;
    return out;
  }
  for (int i = 0; i < nf; ++i) out.p(free_idx[i]) = sol(i);
  out.mu = -sol.tail(me);
  return out;
}

}  // namespace detail

/// Primal active-set solver for
///     min 1/2 x'Hx + c'x   s.t.  A x = b,   x_i >= 0 for i with nonneg[i],
/// from a feasible start. Pivoting is lowest-index-first so runs are
/// reproducible. H must be symmetric positive semidefinite.
inline QpResult solve_active_set(const MatX& h, const VecX& c, const MatX& a,
                                 const VecX& b, const std::vector<bool>& nonneg,
                                 VecX x0, const QpOptions& opts = {}) {
  const int n = static_cast<int>(h.rows());
  const int max_it = opts.max_iterations > 0 ? opts.max_iterations : 40 * n + 200;

  QpResult res;
  res.x = std::move(x0);
  std::vector<bool> clamped(n, false);
  for (int i = 0; i < n; ++i) {
    if (nonneg[i] && res.x(i) <= opts.tol) {
      res.x(i) = 0.0;
      clamped[i] = true;
    }
  }

  VecX mu = VecX::Zero(a.rows());
  for (res.iterations = 0; res.iterations < max_it; ++res.iterations) {
    std::vector<int> free_idx;
    free_idx.reserve(n);
    for (int i = 0; i < n; ++i) {
      if (!clamped[i]) free_idx.push_back(i);
    }

    const VecX grad = h * res.x + c;
    const auto dir = detail::solve_direction(h, grad, a, free_idx, n);
    if (!dir.consistent) {
      res.status = QpStatus::Unbounded;
      return res;
    }
    mu = dir.mu;

    const double pnorm = dir.p.lpNorm<Eigen::Infinity>();
    const double xscale = std::max(1.0, res.x.lpNorm<Eigen::Infinity>());
    // Predicted decrease of the Newton step; ill-conditioned subproblems can
    // dither with tiny nonzero steps that change nothing measurable.
    const double pred_decrease = -(grad.dot(dir.p) + 0.5 * dir.p.dot(h * dir.p));
    const double qscale = std::max(1.0, std::abs(0.5 * res.x.dot(h * res.x) + c.dot(res.x)));
    if (pnorm <= opts.tol * xscale || pred_decrease <= 1e-13 * qscale) {
      // Stationary on the working set; test bound multipliers.
      const VecX lam = grad - a.transpose() * mu;
      int release = -1;
      for (int i = 0; i < n; ++i) {
        if (clamped[i] && lam(i) < -opts.tol * std::max(1.0, lam.lpNorm<Eigen::Infinity>())) {
          release = i;
          break;  // lowest index first
        }
      }
      if (release < 0) {
        res.status = QpStatus::Optimal;
        double st = 0.0;
        for (int i : free_idx) st = std::max(st, std::abs(lam(i)));
        res.stationarity = st;
        res.eq_multipliers = mu;
        return res;
      }
      clamped[release] = false;
      continue;
    }

    // Longest step along p that keeps the bounded variables nonnegative.
    double alpha = 1.0;
    int blocking = -1;
    for (int i = 0; i < n; ++i) {
      if (clamped[i] || !nonneg[i]) continue;
      if (dir.p(i) < -opts.tol) {
        const double limit = res.x(i) / (-dir.p(i));
        if (limit < alpha - 1e-14) {
          alpha = limit;
          blocking = i;
        } else if (blocking >= 0 && std::abs(limit - alpha) <= 1e-14 && i < blocking) {
          blocking = i;
        }
      }
    }
    res.x += alpha * dir.p;
    if (blocking >= 0) {
      res.x(blocking) = 0.0;
      clamped[blocking] = true;
    }
  }
  res.status = QpStatus::IterationLimit;
  res.eq_multipliers = mu;
  return res;
}

/// Same problem, no feasible start required: a phase-1 nonnegative least
/// squares run finds one (or proves the equalities inconsistent with the
/// bounds), then the active-set solve finishes from it.
inline QpResult solve_eq_bound_qp(const MatX& h, const VecX& c, const MatX& a,
                                  const VecX& b, const std::vector<bool>& nonneg,
                                  const QpOptions& opts = {}) {
  const int n = static_cast<int>(h.rows());
  if (a.rows() == 0) {
    return solve_active_set(h, c, a, b, nonneg, VecX::Zero(n), opts);
  }

  // Phase 1: min ||Ax - b||^2 + eps||x||^2 over the bounds.
  MatX h1 = a.transpose() * a;
  const double eps = 1e-12 * std::max(1.0, h1.lpNorm<Eigen::Infinity>());
  h1.diagonal().array() += eps;
  const VecX c1 = -a.transpose() * b;
  QpResult feas =
      solve_active_set(h1, c1, MatX::Zero(0, n), VecX::Zero(0), nonneg, VecX::Zero(n), opts);

  const double bscale = std::max(1.0, b.lpNorm<Eigen::Infinity>());
  VecX x = feas.x;
  // Polish the equality residual inside the current free set; the regularized
  // phase-1 optimum sits a hair off the affine set.
  for (int pass = 0; pass < 3; ++pass) {
    const VecX r = b - a * x;
    if (r.lpNorm<Eigen::Infinity>() <= 0.1 * opts.feas_tol * bscale) break;
    std::vector<int> free_idx;
    for (int i = 0; i < n; ++i) {
      if (!nonneg[i] || x(i) > opts.tol) free_idx.push_back(i);
    }
    if (free_idx.empty()) break;
    MatX af = MatX::Zero(a.rows(), free_idx.size());
    for (size_t j = 0; j < free_idx.size(); ++j) af.col(j) = a.col(free_idx[j]);
    const VecX delta = af.completeOrthogonalDecomposition().solve(r);
    double step = 1.0;
    for (size_t j = 0; j < free_idx.size(); ++j) {
      const int i = free_idx[j];
      if (nonneg[i] && delta(j) < 0.0 && x(i) + delta(j) < 0.0) {
        step = std::min(step, x(i) / (-delta(j)));
      }
    }
    for (size_t j = 0; j < free_idx.size(); ++j) x(free_idx[j]) += step * delta(j);
  }

  if ((a * x - b).lpNorm<Eigen::Infinity>() > opts.feas_tol * bscale) {
    QpResult res;
    res.x = x;
    res.status = QpStatus::Infeasible;
    return res;
  }
  return solve_active_set(h, c, a, b, nonneg, x, opts);
}

}  // namespace hfvc::qp
