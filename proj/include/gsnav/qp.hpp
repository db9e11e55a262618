#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "gsnav/error.hpp"
#include "gsnav/math.hpp"

namespace gsnav::qp {

using SpMat = Eigen::SparseMatrix<double>;

/// minimize 0.5 z'Hz + q'z  s.t.  E z = eq_rhs,  A z <= ineq_rhs.
/// polish_target, when non-empty, is a feasible point used as the shrink
/// anchor of the final feasibility polish.
struct QuadraticProgram {
  SpMat hessian;
  VecX linear;
  SpMat eq_matrix;
  VecX eq_rhs;
  SpMat ineq_matrix;
  VecX ineq_rhs;
  VecX polish_target;

  int vars() const { return static_cast<int>(hessian.rows()); }
  void validate() const {
    const int n = vars();
    if (hessian.cols() != n || linear.size() != n)
      fail(ErrorCode::kDomain, "qp: hessian/linear dimensions disagree");
    if (eq_matrix.rows() != eq_rhs.size() ||
        (eq_matrix.rows() > 0 && eq_matrix.cols() != n))
      fail(ErrorCode::kDomain, "qp: equality block dimensions disagree");
    if (ineq_matrix.rows() != ineq_rhs.size() ||
        (ineq_matrix.rows() > 0 && ineq_matrix.cols() != n))
      fail(ErrorCode::kDomain, "qp: inequality block dimensions disagree");
  }
  double objective(const VecX& z) const {
    return 0.5 * z.dot(hessian * z) + linear.dot(z);
  }
};

namespace detail {

/// Exact solve with a guessed active set: equalities plus active inequality
/// rows as equalities, via the (regularized) KKT system.  Returns false when
/// the factorization fails.
inline bool kkt_solve(const QuadraticProgram& p, const std::vector<int>& active,
                      VecX& z, VecX& ineq_dual) {
  const int n = p.vars();
  const int me = static_cast<int>(p.eq_matrix.rows());
  const int ma = static_cast<int>(active.size());
  const int dim = n + me + ma;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(p.hessian.nonZeros() +
                                         2 * p.eq_matrix.nonZeros() + 8 * ma + n));
  for (int k = 0; k < p.hessian.outerSize(); ++k)
    for (SpMat::InnerIterator it(p.hessian, k); it; ++it)
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                         it.value());
  for (int i = 0; i < n; ++i) trips.emplace_back(i, i, 1e-12);
  for (int k = 0; k < p.eq_matrix.outerSize(); ++k)
    for (SpMat::InnerIterator it(p.eq_matrix, k); it; ++it) {
      trips.emplace_back(n + static_cast<int>(it.row()), static_cast<int>(it.col()),
                         it.value());
      trips.emplace_back(static_cast<int>(it.col()), n + static_cast<int>(it.row()),
                         it.value());
    }
  Eigen::SparseMatrix<double, Eigen::RowMajor> arow(p.ineq_matrix);
  for (int i = 0; i < ma; ++i)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
             arow, active[static_cast<std::size_t>(i)]);
         it; ++it) {
      trips.emplace_back(n + me + i, static_cast<int>(it.col()), it.value());
      trips.emplace_back(static_cast<int>(it.col()), n + me + i, it.value());
    }
  SpMat kkt(dim, dim);
  kkt.setFromTriplets(trips.begin(), trips.end());
  VecX rhs(dim);
  rhs.head(n) = -p.linear;
  rhs.segment(n, me) = p.eq_rhs;
  for (int i = 0; i < ma; ++i)
    rhs[n + me + i] = p.ineq_rhs[active[static_cast<std::size_t>(i)]];
  Eigen::SparseLU<SpMat> lu;
  lu.analyzePattern(kkt);
  lu.factorize(kkt);
  if (lu.info() != Eigen::Success) return false;
  const VecX sol = lu.solve(rhs);
  if (!sol.allFinite()) return false;
  z = sol.head(n);
  ineq_dual = sol.tail(ma);
  return true;
}

}  // namespace detail

struct SolveReport {
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool polished = false;
};

/// Operator-splitting solver: splitting iterations with rho adaptation,
/// then an exact KKT refinement on the detected active set, then (only if
/// needed) a feasibility shrink toward polish_target.
inline VecX solve_qp(const QuadraticProgram& p, double tol = 1e-8,
                     int max_iter = 20000, SolveReport* report = nullptr) {
  p.validate();
  if (!(tol > 0.0)) fail(ErrorCode::kDomain, "solve_qp: tol must be positive");
  if (max_iter < 1) fail(ErrorCode::kDomain, "solve_qp: max_iter must be >= 1");
  const int n = p.vars();
  const int me = static_cast<int>(p.eq_matrix.rows());
  const int ma = static_cast<int>(p.ineq_matrix.rows());
  const int m = me + ma;

  // Stack constraints as l <= C z <= u with per-row infinity-norm scaling.
  SpMat c(m, n);
  VecX lo(m), up(m), row_scale = VecX::Ones(m);
  {
    std::vector<Eigen::Triplet<double>> trips;
    Eigen::SparseMatrix<double, Eigen::RowMajor> erow(p.eq_matrix);
    Eigen::SparseMatrix<double, Eigen::RowMajor> arow(p.ineq_matrix);
    for (int i = 0; i < me; ++i) {
      double norm = 0.0;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(erow, i);
           it; ++it)
        norm = std::max(norm, std::abs(it.value()));
      const double s = norm > 1e-12 ? 1.0 / norm : 1.0;
      row_scale[i] = s;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(erow, i);
           it; ++it)
        trips.emplace_back(i, static_cast<int>(it.col()), s * it.value());
      lo[i] = up[i] = s * p.eq_rhs[i];
    }
    for (int i = 0; i < ma; ++i) {
      double norm = 0.0;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(arow, i);
           it; ++it)
        norm = std::max(norm, std::abs(it.value()));
      const double s = norm > 1e-12 ? 1.0 / norm : 1.0;
      row_scale[me + i] = s;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(arow, i);
           it; ++it)
        trips.emplace_back(me + i, static_cast<int>(it.col()), s * it.value());
      lo[me + i] = -std::numeric_limits<double>::infinity();
      up[me + i] = s * p.ineq_rhs[i];
    }
    c.setFromTriplets(trips.begin(), trips.end());
  }

  const double sigma = 1e-6;
  double rho = 0.1;
  const double rho_eq_boost = 1e3;
  VecX rho_vec(m);
  auto set_rho = [&](double r) {
    rho = r;
    for (int i = 0; i < m; ++i) rho_vec[i] = i < me ? rho_eq_boost * r : r;
  };
  set_rho(0.1);

  Eigen::SimplicialLDLT<SpMat> ldlt;
  SpMat identity(n, n);
  identity.setIdentity();
  auto factorize = [&]() {
    SpMat sys = p.hessian + sigma * identity;
    if (m > 0) sys += SpMat(c.transpose() * rho_vec.asDiagonal() * c);
    ldlt.compute(sys);
    if (ldlt.info() != Eigen::Success)
      fail(ErrorCode::kQpFailure, "solve_qp: KKT factorization failed");
  };
  factorize();

  VecX z = p.polish_target.size() == n ? p.polish_target : VecX::Zero(n);
  VecX zeta = m > 0 ? VecX(c * z) : VecX(0);
  for (int i = 0; i < m; ++i) zeta[i] = std::min(std::max(zeta[i], lo[i]), up[i]);
  VecX y = VecX::Zero(m);

  double r_prim = 0.0, r_dual = 0.0;
  int iter = 0;
  const double alpha = 1.6;  // over-relaxation
  for (iter = 0; iter < max_iter; ++iter) {
    VecX rhs = sigma * z - p.linear;
    if (m > 0) rhs += c.transpose() * (rho_vec.asDiagonal() * zeta - y);
    const VecX z_tilde = ldlt.solve(rhs);
    const VecX cz = m > 0 ? VecX(c * z_tilde) : VecX(0);
    VecX zeta_new(m);
    for (int i = 0; i < m; ++i) {
      const double relaxed = alpha * cz[i] + (1.0 - alpha) * zeta[i];
      const double cand = relaxed + y[i] / rho_vec[i];
      zeta_new[i] = std::min(std::max(cand, lo[i]), up[i]);
      y[i] += rho_vec[i] * (relaxed - zeta_new[i]);
    }
    z = z_tilde;
    zeta = zeta_new;

    if (iter % 10 == 9 || iter == max_iter - 1) {
      const VecX cz_now = m > 0 ? VecX(c * z) : VecX(0);
      r_prim = m > 0 ? (cz_now - zeta).cwiseAbs().maxCoeff() : 0.0;
      VecX grad = p.hessian * z + p.linear;
      if (m > 0) grad += c.transpose() * y;
      r_dual = grad.cwiseAbs().maxCoeff();
      if (r_prim <= tol && r_dual <= tol) break;
      // Rebalance rho every 100 iterations if residuals diverge in scale.
      if (m > 0 && iter % 100 == 99) {
        const double ratio = std::sqrt((r_prim + 1e-16) / (r_dual + 1e-16));
        if (ratio > 5.0 || ratio < 0.2) {
          set_rho(std::min(1e6, std::max(1e-6, rho * ratio)));
          factorize();
        }
      }
    }
  }

  if (report != nullptr) {
    report->iterations = iter;
    report->primal_residual = r_prim;
    report->dual_residual = r_dual;
  }

  // Exact refinement: treat rows at their bound as active equalities, solve
  // the KKT system, and repair the guess by dropping rows with negative
  // multipliers and adding newly violated rows.
  Eigen::SparseMatrix<double, Eigen::RowMajor> arow(p.ineq_matrix);
  auto try_polish = [&](VecX& out) -> bool {
    std::vector<int> active;
    const VecX slack = ma > 0 ? VecX(p.ineq_rhs - p.ineq_matrix * z) : VecX(0);
    for (int i = 0; i < ma; ++i) {
      const double rownorm = 1.0 / row_scale[me + i];
      if (slack[i] <= 1e-6 * std::max(1.0, rownorm) || y[me + i] > 1e-9)
        active.push_back(i);
    }
    for (int round = 0; round < 40; ++round) {
      VecX cand, dual;
      if (!detail::kkt_solve(p, active, cand, dual)) return false;
      int worst_drop = -1;
      double most_negative = -1e-8;
      for (int i = 0; i < static_cast<int>(active.size()); ++i)
        if (dual[i] < most_negative) {
          most_negative = dual[i];
          worst_drop = i;
        }
      if (worst_drop >= 0) {
        active.erase(active.begin() + worst_drop);
        continue;
      }
      int worst_add = -1;
      double worst_violation = 1e-11;
      if (ma > 0) {
        const VecX s2 = p.ineq_rhs - p.ineq_matrix * cand;
        for (int i = 0; i < ma; ++i) {
          const bool already =
              std::find(active.begin(), active.end(), i) != active.end();
          if (!already && -s2[i] > worst_violation) {
            worst_violation = -s2[i];
            worst_add = i;
          }
        }
      }
      if (worst_add >= 0) {
        active.push_back(worst_add);
        std::sort(active.begin(), active.end());
        continue;
      }
      out = cand;
      return true;
    }
    return false;
  };

  VecX polished;
  bool ok = try_polish(polished);
  if (ok) {
    // Accept the refinement only if it is consistent and not worse.
    const double eq_res =
        me > 0 ? (p.eq_matrix * polished - p.eq_rhs).cwiseAbs().maxCoeff() : 0.0;
    const double ineq_viol =
        ma > 0 ? std::max(0.0, (p.ineq_matrix * polished - p.ineq_rhs).maxCoeff())
               : 0.0;
    if (eq_res <= 1e-8 && ineq_viol <= 1e-9 &&
        p.objective(polished) <= p.objective(z) + std::max(1.0, std::abs(p.objective(z))) * 1e-6) {
      if (report != nullptr) report->polished = true;
      return polished;
    }
    ok = false;
  }

  const bool converged = r_prim <= tol && r_dual <= tol;
  if (converged) {
    // Splitting iterations converged but the exact refinement did not verify;
    // shrink toward the provided feasible anchor to clear residual violations.
    double ineq_viol =
        ma > 0 ? std::max(0.0, (p.ineq_matrix * z - p.ineq_rhs).maxCoeff()) : 0.0;
    if (ineq_viol <= 0.0) return z;
    if (p.polish_target.size() == n) {
      const VecX& t = p.polish_target;
      double shrink = 1.0;
      const VecX az = p.ineq_matrix * z;
      const VecX at = p.ineq_matrix * t;
      for (int i = 0; i < ma; ++i) {
        if (az[i] <= p.ineq_rhs[i]) continue;
        const double denom = az[i] - at[i];
        if (denom > 1e-15)
          shrink = std::min(shrink, (p.ineq_rhs[i] - at[i]) / denom);
      }
      if (shrink >= 0.0 && shrink <= 1.0) {
        const VecX cand = t + shrink * (z - t);
        ineq_viol = std::max(0.0, (p.ineq_matrix * cand - p.ineq_rhs).maxCoeff());
        if (ineq_viol <= tol) return cand;
      }
    }
  }
  fail(ErrorCode::kQpFailure,
       "solve_qp: no solution within tolerance after " + std::to_string(iter) +
           " iterations (primal residual " + std::to_string(r_prim) +
           ", dual residual " + std::to_string(r_dual) + ")");
}

}  // namespace gsnav::qp
