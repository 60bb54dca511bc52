#pragma once

// Matrix-free conjugate gradient for the SPD systems inside the second-order
// optimizers. The operators are tiny (tens of dimensions), so the defaults
// favor exactness over speed.

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cgdlab::linsolve {

struct SolveError : std::runtime_error {
  SolveError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual(residual), iterations(iterations) {}
  double residual;
  int iterations;
};

// A dimension plus a matrix-free apply closure. Callers declare symmetry /
// positive definiteness; cg_solve requires spd.
struct LinearOperator {
  int dim = 0;
  std::function<void(std::span<const double>, std::span<double>)> apply;
  bool spd = true;
};

struct SolveResult {
  std::vector<double> solution;
  double rel_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline constexpr double kCgTol = 1e-10;

using HvpFn = std::function<std::vector<double>(std::span<const double>)>;

// z -> z + Ax^{1/2} * Dxy * (Ay * (Dyx * (Ax^{1/2} * z))).
// SPD by construction: identity plus the Gram matrix of Ay^{1/2} Dyx Ax^{1/2}.
inline LinearOperator make_cgd_operator(HvpFn hvp_xy, HvpFn hvp_yx, std::span<const double> a_x,
                                        std::span<const double> a_y) {
  for (double d : a_x) {
    if (!(d > 0.0)) throw std::invalid_argument("a_x diagonal entries must be positive");
  }
  for (double d : a_y) {
    if (!(d > 0.0)) throw std::invalid_argument("a_y diagonal entries must be positive");
  }
  std::vector<double> sqrt_ax(a_x.begin(), a_x.end());
  for (double& d : sqrt_ax) d = std::sqrt(d);
  std::vector<double> ay(a_y.begin(), a_y.end());

  LinearOperator op;
  op.dim = static_cast<int>(a_x.size());
  op.spd = true;
  op.apply = [hvp_xy = std::move(hvp_xy), hvp_yx = std::move(hvp_yx), sqrt_ax = std::move(sqrt_ax),
              ay = std::move(ay)](std::span<const double> in, std::span<double> out) {
    std::vector<double> t1(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) t1[i] = sqrt_ax[i] * in[i];
    std::vector<double> t2 = hvp_yx(t1);
    for (std::size_t j = 0; j < t2.size(); ++j) t2[j] *= ay[j];
    std::vector<double> t4 = hvp_xy(t2);
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] + sqrt_ax[i] * t4[i];
  };
  return op;
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace detail

// Conjugate gradient with a relative-residual stopping rule. Returns the best
// iterate seen (by true residual) when the iteration cap is hit without
// convergence; throws only on numerical breakdown.
inline SolveResult cg_solve(const LinearOperator& op, std::span<const double> rhs,
                            double tol = kCgTol, int max_iter = -1) {
  if (!op.spd) throw std::invalid_argument("cg_solve requires an SPD-declared operator");
  if (static_cast<int>(rhs.size()) != op.dim) {
    throw std::invalid_argument("cg_solve rhs dimension mismatch");
  }
  if (max_iter < 0) max_iter = op.dim + 5;

  SolveResult result;
  result.solution.assign(rhs.size(), 0.0);

  double bnorm = detail::norm2(rhs);
  if (bnorm == 0.0) {
    // Zero right-hand side: the solution is exactly zero; avoids 0/0 in the
    // relative residual.
    result.converged = true;
    return result;
  }

  std::vector<double> x(rhs.size(), 0.0);
  std::vector<double> r(rhs.begin(), rhs.end());
  std::vector<double> p(r);
  std::vector<double> ap(rhs.size(), 0.0);
  std::vector<double> best_x(x);
  double best_rel = 1.0;
  double rs_old = detail::dot(r, r);

  auto true_rel_residual = [&](const std::vector<double>& cand) {
    op.apply(cand, ap);
    double s = 0.0;
    for (std::size_t i = 0; i < ap.size(); ++i) {
      double d = ap[i] - rhs[i];
      s += d * d;
    }
    return std::sqrt(s) / bnorm;
  };

  for (int it = 1; it <= max_iter; ++it) {
    op.apply(p, ap);
    double pap = detail::dot(p, ap);
    if (!std::isfinite(pap) || pap <= 0.0) {
      throw SolveError("conjugate gradient breakdown: operator not positive definite on probe",
                       std::sqrt(rs_old) / bnorm, it);
    }
    double alpha = rs_old / pap;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    double rs_new = detail::dot(r, r);
    if (!std::isfinite(rs_new)) {
      throw SolveError("conjugate gradient produced a non-finite iterate",
                       std::sqrt(rs_old) / bnorm, it);
    }
    double rel = std::sqrt(rs_new) / bnorm;
    if (rel < best_rel) {
      best_rel = rel;
      best_x = x;
    }
    if (rel <= tol) {
      // Confirm with the true residual; the CG recurrence can drift.
      double true_rel = true_rel_residual(x);
      if (true_rel <= tol) {
        result.solution = x;
        result.rel_residual = true_rel;
        result.iterations = it;
        result.converged = true;
        return result;
      }
    }
    double beta = rs_new / rs_old;
    rs_old = rs_new;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
  }

  result.solution = best_x;
  result.rel_residual = true_rel_residual(best_x);
  result.iterations = max_iter;
  result.converged = result.rel_residual <= tol;
  return result;
}

}  // namespace cgdlab::linsolve
