#pragma once

// Update rules: SimGD, frozen single-player GD, Adam (baseline), CGD, and
// adaptive CGD. The second-order methods solve their local game with the
// matrix-free conjugate-gradient solver; one solve for the minimizing
// player, then the maximizing player's step by substitution (algebraically
// identical to the paired solve). Every second-order step reports the
// local-Nash residuals recomputed from the final deltas, so any sign or
// algebra error would surface as a residual, not a silent bias.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cgdlab/autodiff.hpp"
#include "cgdlab/games.hpp"
#include "cgdlab/linsolve.hpp"

namespace cgdlab::optimizers {

using games::ZeroSumGame;

struct StepSizes {
  double eta_x = 0.0;
  double eta_y = 0.0;
};

enum class Player { x, y };

struct AdamHyper {
  double alpha = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AcgdHyper {
  double alpha = 1e-4;
  double beta2 = 0.99;
  double eps = 1e-5;
};

// Everything needed to resume a run bit-identically: parameters, moment
// accumulators, and counters. tx/ty are the per-player moment ages used for
// Adam bias correction; t counts optimizer steps of any kind.
struct OptimizerState {
  std::int64_t t = 0;
  std::int64_t tx = 0;
  std::int64_t ty = 0;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> vx;
  std::vector<double> vy;
  std::vector<double> mx;
  std::vector<double> my;
  bool diverged = false;
};

inline OptimizerState make_state(std::span<const double> x0, std::span<const double> y0) {
  OptimizerState s;
  s.x.assign(x0.begin(), x0.end());
  s.y.assign(y0.begin(), y0.end());
  s.vx.assign(x0.size(), 0.0);
  s.vy.assign(y0.size(), 0.0);
  s.mx.assign(x0.size(), 0.0);
  s.my.assign(y0.size(), 0.0);
  return s;
}

struct StepReport {
  double loss_before = 0.0;
  double loss_after = 0.0;
  double grad_norm_x = 0.0;
  double grad_norm_y = 0.0;
  std::vector<double> delta_x;
  std::vector<double> delta_y;
  int cg_iterations = 0;
  double residual_x = 0.0;
  double residual_y = 0.0;
  bool diverged = false;
};

// A run halts with verdict "diverged" once the combined parameter norm
// crosses this cutoff.
inline constexpr double kDivergenceCutoff = 1e6;

namespace detail {

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double d : v) s += d * d;
  return std::sqrt(s);
}

inline bool all_finite(std::span<const double> v) {
  for (double d : v) {
    if (!std::isfinite(d)) return false;
  }
  return true;
}

// One bound evaluation point: forward + reverse once, then any number of
// Hessian-vector products against the same values (two passes each).
class BoundEval {
 public:
  BoundEval(const ZeroSumGame& game, const autodiff::Graph& graph,
            std::span<const autodiff::ParamGroup> extra)
      : game_(game), graph_(graph) {
    gx_ = graph.group_index_checked(game.min_group);
    gy_ = graph.group_index_checked(game.max_group);
    at_.push_back({game.min_group, {}});
    at_.push_back({game.max_group, {}});
    for (const autodiff::ParamGroup& g : game.bound_constants) {
      if (graph.group_index(g.name) >= 0) at_.push_back(g);
    }
    for (const autodiff::ParamGroup& g : extra) {
      if (graph.group_index(g.name) >= 0) at_.push_back(g);
    }
  }

  // Binds (x, y), runs forward + reverse, fills loss and both gradients.
  void eval_grads(std::span<const double> x, std::span<const double> y) {
    at_[0].values.assign(x.begin(), x.end());
    at_[1].values.assign(y.begin(), y.end());
    ws_.bind(graph_, at_);
    loss = ws_.forward();
    ws_.reverse();
    grad_x.resize(x.size());
    grad_y.resize(y.size());
    ws_.extract_bar(gx_, grad_x);
    ws_.extract_bar(gy_, grad_y);
  }

  double eval_only(std::span<const double> x, std::span<const double> y) {
    at_[0].values.assign(x.begin(), x.end());
    at_[1].values.assign(y.begin(), y.end());
    ws_.bind(graph_, at_);
    return ws_.forward();
  }

  // D^2_{y,x} f * v (x-dim in, y-dim out). Requires a prior eval_grads.
  std::vector<double> hvp_yx(std::span<const double> v) { return hvp(gx_, gy_, v); }
  // D^2_{x,y} f * v (y-dim in, x-dim out).
  std::vector<double> hvp_xy(std::span<const double> v) { return hvp(gy_, gx_, v); }

  double loss = 0.0;
  std::vector<double> grad_x;
  std::vector<double> grad_y;

 private:
  std::vector<double> hvp(int from, int to, std::span<const double> v) {
    ws_.forward_dot(from, v);
    ws_.reverse_dot();
    std::vector<double> out(static_cast<std::size_t>(graph_.group(to).dim));
    ws_.extract_bar_dot(to, out);
    return out;
  }

  const ZeroSumGame& game_;
  const autodiff::Graph& graph_;
  int gx_ = -1;
  int gy_ = -1;
  std::vector<autodiff::ParamGroup> at_;
  autodiff::Workspace ws_;
};

// Applies deltas and fills the after-step report fields; reverts and flags
// divergence if the updated parameters are not finite.
inline void apply_deltas(const ZeroSumGame& game, OptimizerState& state,
                         std::span<const autodiff::ParamGroup> extra, BoundEval& eval,
                         StepReport& report) {
  std::vector<double> nx(state.x);
  std::vector<double> ny(state.y);
  for (std::size_t i = 0; i < nx.size(); ++i) nx[i] += report.delta_x[i];
  for (std::size_t i = 0; i < ny.size(); ++i) ny[i] += report.delta_y[i];
  if (!all_finite(nx) || !all_finite(ny)) {
    report.diverged = true;
    state.diverged = true;
    return;
  }
  state.x = std::move(nx);
  state.y = std::move(ny);
  state.t += 1;
  try {
    report.loss_after = eval.eval_only(state.x, state.y);
  } catch (const autodiff::NonFiniteError&) {
    report.loss_after = std::numeric_limits<double>::infinity();
    report.diverged = true;
    state.diverged = true;
  }
  (void)game;
  (void)extra;
}

inline void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be positive and finite");
  }
}

}  // namespace detail

inline double combined_param_norm(const OptimizerState& state) {
  double nx = detail::norm2(state.x);
  double ny = detail::norm2(state.y);
  return std::sqrt(nx * nx + ny * ny);
}

inline bool exceeds_divergence_cutoff(const OptimizerState& state) {
  return combined_param_norm(state) > kDivergenceCutoff;
}

// x <- x - eta_x * grad_x f;  y <- y + eta_y * grad_y f (ascent for the
// maximizing player), both from the same point.
inline StepReport simgd_step(const ZeroSumGame& game, OptimizerState& state, StepSizes steps,
                             std::span<const autodiff::ParamGroup> extra = {}) {
  detail::require_positive(steps.eta_x, "eta_x");
  detail::require_positive(steps.eta_y, "eta_y");
  StepReport report;
  detail::BoundEval eval(game, game.payoff, extra);
  try {
    eval.eval_grads(state.x, state.y);
  } catch (const autodiff::NonFiniteError&) {
    report.diverged = true;
    state.diverged = true;
    return report;
  }
  report.loss_before = eval.loss;
  report.grad_norm_x = detail::norm2(eval.grad_x);
  report.grad_norm_y = detail::norm2(eval.grad_y);
  report.delta_x.resize(state.x.size());
  report.delta_y.resize(state.y.size());
  for (std::size_t i = 0; i < state.x.size(); ++i) report.delta_x[i] = -steps.eta_x * eval.grad_x[i];
  for (std::size_t i = 0; i < state.y.size(); ++i) report.delta_y[i] = steps.eta_y * eval.grad_y[i];
  detail::apply_deltas(game, state, extra, eval, report);
  return report;
}

// Gradient descent (x) or ascent (y) on the named player only; the other
// player's parameters are held fixed.
inline StepReport frozen_step(const ZeroSumGame& game, OptimizerState& state, Player trained,
                              double eta, std::span<const autodiff::ParamGroup> extra = {}) {
  detail::require_positive(eta, "eta");
  StepReport report;
  detail::BoundEval eval(game, game.payoff, extra);
  try {
    eval.eval_grads(state.x, state.y);
  } catch (const autodiff::NonFiniteError&) {
    report.diverged = true;
    state.diverged = true;
    return report;
  }
  report.loss_before = eval.loss;
  report.grad_norm_x = detail::norm2(eval.grad_x);
  report.grad_norm_y = detail::norm2(eval.grad_y);
  report.delta_x.assign(state.x.size(), 0.0);
  report.delta_y.assign(state.y.size(), 0.0);
  if (trained == Player::x) {
    for (std::size_t i = 0; i < state.x.size(); ++i) report.delta_x[i] = -eta * eval.grad_x[i];
  } else {
    for (std::size_t i = 0; i < state.y.size(); ++i) report.delta_y[i] = eta * eval.grad_y[i];
  }
  detail::apply_deltas(game, state, extra, eval, report);
  return report;
}

// Simultaneous Adam: both players' moments update from gradients at the same
// point. min_objective, when given, replaces the payoff as the minimizing
// player's objective (the non-saturating generator loss); the maximizing
// player always ascends the payoff.
inline StepReport adam_step_simultaneous(const ZeroSumGame& game, OptimizerState& state,
                                         AdamHyper hyper,
                                         std::span<const autodiff::ParamGroup> extra = {},
                                         const autodiff::Graph* min_objective = nullptr) {
  detail::require_positive(hyper.alpha, "alpha");
  StepReport report;
  detail::BoundEval eval(game, game.payoff, extra);
  try {
    eval.eval_grads(state.x, state.y);
  } catch (const autodiff::NonFiniteError&) {
    report.diverged = true;
    state.diverged = true;
    return report;
  }
  report.loss_before = eval.loss;
  std::vector<double> gx = eval.grad_x;
  if (min_objective != nullptr) {
    detail::BoundEval alt(game, *min_objective, extra);
    try {
      alt.eval_grads(state.x, state.y);
    } catch (const autodiff::NonFiniteError&) {
      report.diverged = true;
      state.diverged = true;
      return report;
    }
    gx = alt.grad_x;
  }
  report.grad_norm_x = detail::norm2(gx);
  report.grad_norm_y = detail::norm2(eval.grad_y);

  state.tx += 1;
  state.ty += 1;
  double bc1x = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.tx));
  double bc2x = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.tx));
  double bc1y = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.ty));
  double bc2y = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.ty));
  report.delta_x.resize(state.x.size());
  report.delta_y.resize(state.y.size());
  for (std::size_t i = 0; i < state.x.size(); ++i) {
    state.mx[i] = hyper.beta1 * state.mx[i] + (1.0 - hyper.beta1) * gx[i];
    state.vx[i] = hyper.beta2 * state.vx[i] + (1.0 - hyper.beta2) * gx[i] * gx[i];
    double mhat = state.mx[i] / bc1x;
    double vhat = state.vx[i] / bc2x;
    report.delta_x[i] = -hyper.alpha * mhat / (std::sqrt(vhat) + hyper.eps);
  }
  for (std::size_t i = 0; i < state.y.size(); ++i) {
    state.my[i] = hyper.beta1 * state.my[i] + (1.0 - hyper.beta1) * eval.grad_y[i];
    state.vy[i] = hyper.beta2 * state.vy[i] + (1.0 - hyper.beta2) * eval.grad_y[i] * eval.grad_y[i];
    double mhat = state.my[i] / bc1y;
    double vhat = state.vy[i] / bc2y;
    report.delta_y[i] = hyper.alpha * mhat / (std::sqrt(vhat) + hyper.eps);
  }
  detail::apply_deltas(game, state, extra, eval, report);
  return report;
}

// Single-player Adam step (descent for x, ascent for y). objective_override
// replaces the payoff for the trained player when given.
inline StepReport adam_step(const ZeroSumGame& game, OptimizerState& state, Player trained,
                            AdamHyper hyper, std::span<const autodiff::ParamGroup> extra = {},
                            const autodiff::Graph* objective_override = nullptr) {
  detail::require_positive(hyper.alpha, "alpha");
  StepReport report;
  const autodiff::Graph& graph =
      (objective_override != nullptr) ? *objective_override : game.payoff;
  detail::BoundEval eval(game, graph, extra);
  try {
    eval.eval_grads(state.x, state.y);
  } catch (const autodiff::NonFiniteError&) {
    report.diverged = true;
    state.diverged = true;
    return report;
  }
  report.loss_before = eval.loss;
  report.grad_norm_x = detail::norm2(eval.grad_x);
  report.grad_norm_y = detail::norm2(eval.grad_y);
  report.delta_x.assign(state.x.size(), 0.0);
  report.delta_y.assign(state.y.size(), 0.0);
  if (trained == Player::x) {
    state.tx += 1;
    double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.tx));
    double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.tx));
    for (std::size_t i = 0; i < state.x.size(); ++i) {
      state.mx[i] = hyper.beta1 * state.mx[i] + (1.0 - hyper.beta1) * eval.grad_x[i];
      state.vx[i] = hyper.beta2 * state.vx[i] + (1.0 - hyper.beta2) * eval.grad_x[i] * eval.grad_x[i];
      report.delta_x[i] =
          -hyper.alpha * (state.mx[i] / bc1) / (std::sqrt(state.vx[i] / bc2) + hyper.eps);
    }
  } else {
    state.ty += 1;
    double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.ty));
    double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.ty));
    for (std::size_t i = 0; i < state.y.size(); ++i) {
      state.my[i] = hyper.beta1 * state.my[i] + (1.0 - hyper.beta1) * eval.grad_y[i];
      state.vy[i] = hyper.beta2 * state.vy[i] + (1.0 - hyper.beta2) * eval.grad_y[i] * eval.grad_y[i];
      report.delta_y[i] =
          hyper.alpha * (state.my[i] / bc1) / (std::sqrt(state.vy[i] / bc2) + hyper.eps);
    }
  }
  detail::apply_deltas(game, state, extra, eval, report);
  return report;
}

namespace detail {

// Shared second-order core: given per-coordinate positive scale diagonals
// A_x, A_y, solve
//   (I + A_x^{1/2} D_xy A_y D_yx A_x^{1/2}) w = A_x^{1/2} (g_x + D_xy A_y g_y)
//   delta_x = -A_x^{1/2} w,   delta_y = A_y (g_y + D_yx delta_x).
// The substitution for delta_y equals the symmetric solve exactly (push the
// inverse through D_yx). Residuals are recomputed from the final deltas.
inline void second_order_core(BoundEval& eval, std::span<const double> a_x,
                              std::span<const double> a_y, StepReport& report) {
  std::size_t nx = eval.grad_x.size();
  std::vector<double> sx(a_x.begin(), a_x.end());
  for (double& d : sx) d = std::sqrt(d);

  std::vector<double> ay_gy(eval.grad_y);
  for (std::size_t j = 0; j < ay_gy.size(); ++j) ay_gy[j] *= a_y[j];
  std::vector<double> rhs = eval.hvp_xy(ay_gy);
  for (std::size_t i = 0; i < nx; ++i) rhs[i] = sx[i] * (eval.grad_x[i] + rhs[i]);

  linsolve::LinearOperator op = linsolve::make_cgd_operator(
      [&eval](std::span<const double> v) { return eval.hvp_xy(v); },
      [&eval](std::span<const double> v) { return eval.hvp_yx(v); }, a_x, a_y);
  linsolve::SolveResult sol = linsolve::cg_solve(op, rhs);
  if (!sol.converged) {
    throw linsolve::SolveError("second-order step: conjugate gradient did not converge",
                               sol.rel_residual, sol.iterations);
  }
  report.cg_iterations = sol.iterations;

  report.delta_x.resize(nx);
  for (std::size_t i = 0; i < nx; ++i) report.delta_x[i] = -sx[i] * sol.solution[i];
  std::vector<double> dyx_dx = eval.hvp_yx(report.delta_x);
  report.delta_y.resize(eval.grad_y.size());
  for (std::size_t j = 0; j < report.delta_y.size(); ++j) {
    report.delta_y[j] = a_y[j] * (eval.grad_y[j] + dyx_dx[j]);
  }

  // Local-Nash first-order conditions of the bilinearly coupled local game.
  std::vector<double> dxy_dy = eval.hvp_xy(report.delta_y);
  double rx = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    double r = report.delta_x[i] + a_x[i] * (eval.grad_x[i] + dxy_dy[i]);
    rx += r * r;
  }
  std::vector<double> dyx_dx2 = eval.hvp_yx(report.delta_x);
  double ry = 0.0;
  for (std::size_t j = 0; j < report.delta_y.size(); ++j) {
    double r = report.delta_y[j] - a_y[j] * (eval.grad_y[j] + dyx_dx2[j]);
    ry += r * r;
  }
  report.residual_x = std::sqrt(rx);
  report.residual_y = std::sqrt(ry);
}

}  // namespace detail

// CGD with the single shared step size eta: the unscaled solve
// delta_x = -eta (I + eta^2 D_xy D_yx)^{-1} (g_x + eta D_xy g_y),
// delta_y by substitution. Kept as a separate code path from the square-root
// form so the two can be compared against each other.
inline StepReport cgd_step(const ZeroSumGame& game, OptimizerState& state, double eta,
                           std::span<const autodiff::ParamGroup> extra = {}) {
  detail::require_positive(eta, "eta");
  StepReport report;
  detail::BoundEval eval(game, game.payoff, extra);
  try {
    eval.eval_grads(state.x, state.y);
  } catch (const autodiff::NonFiniteError&) {
    report.diverged = true;
    state.diverged = true;
    return report;
  }
  report.loss_before = eval.loss;
  report.grad_norm_x = detail::norm2(eval.grad_x);
  report.grad_norm_y = detail::norm2(eval.grad_y);

  std::size_t nx = state.x.size();
  std::vector<double> rhs = eval.hvp_xy(eval.grad_y);
  for (std::size_t i = 0; i < nx; ++i) rhs[i] = eval.grad_x[i] + eta * rhs[i];

  linsolve::LinearOperator op;
  op.dim = static_cast<int>(nx);
  op.spd = true;
  op.apply = [&eval, eta](std::span<const double> in, std::span<double> out) {
    std::vector<double> t = eval.hvp_yx(in);
    std::vector<double> t2 = eval.hvp_xy(t);
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] + eta * eta * t2[i];
  };
  linsolve::SolveResult sol = linsolve::cg_solve(op, rhs);
  if (!sol.converged) {
    throw linsolve::SolveError("cgd_step: conjugate gradient did not converge", sol.rel_residual,
                               sol.iterations);
  }
  report.cg_iterations = sol.iterations;

  report.delta_x.resize(nx);
  for (std::size_t i = 0; i < nx; ++i) report.delta_x[i] = -eta * sol.solution[i];
  std::vector<double> dyx_dx = eval.hvp_yx(report.delta_x);
  report.delta_y.resize(state.y.size());
  for (std::size_t j = 0; j < report.delta_y.size(); ++j) {
    report.delta_y[j] = eta * (eval.grad_y[j] + dyx_dx[j]);
  }

  std::vector<double> dxy_dy = eval.hvp_xy(report.delta_y);
  double rx = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    double r = report.delta_x[i] + eta * (eval.grad_x[i] + dxy_dy[i]);
    rx += r * r;
  }
  std::vector<double> dyx_dx2 = eval.hvp_yx(report.delta_x);
  double ry = 0.0;
  for (std::size_t j = 0; j < report.delta_y.size(); ++j) {
    double r = report.delta_y[j] - eta * (eval.grad_y[j] + dyx_dx2[j]);
    ry += r * r;
  }
  report.residual_x = std::sqrt(rx);
  report.residual_y = std::sqrt(ry);

  detail::apply_deltas(game, state, extra, eval, report);
  return report;
}

// Test hook: one adaptive-form step with injected constant diagonal scale
// matrices (no moment update). With A_x = A_y = eta*I this must reproduce
// cgd_step through a different code path.
inline StepReport acgd_step_with_scales(const ZeroSumGame& game, OptimizerState& state,
                                        std::span<const double> a_x, std::span<const double> a_y,
                                        std::span<const autodiff::ParamGroup> extra = {}) {
  if (a_x.size() != state.x.size() || a_y.size() != state.y.size()) {
    throw std::invalid_argument("scale diagonal dimensions must match the players");
  }
  StepReport report;
  detail::BoundEval eval(game, game.payoff, extra);
  try {
    eval.eval_grads(state.x, state.y);
  } catch (const autodiff::NonFiniteError&) {
    report.diverged = true;
    state.diverged = true;
    return report;
  }
  report.loss_before = eval.loss;
  report.grad_norm_x = detail::norm2(eval.grad_x);
  report.grad_norm_y = detail::norm2(eval.grad_y);
  detail::second_order_core(eval, a_x, a_y, report);
  detail::apply_deltas(game, state, extra, eval, report);
  return report;
}

// Adaptive CGD: RMSProp-type second-moment estimates with bias correction
// feed per-coordinate step-size diagonals A = alpha / (sqrt(vhat) + eps);
// the raw moments stay in the state, the bias-corrected copy only shapes A.
// Gradients are computed once per step and reused inside the solve.
inline StepReport acgd_step(const ZeroSumGame& game, OptimizerState& state, AcgdHyper hyper,
                            std::span<const autodiff::ParamGroup> extra = {}) {
  detail::require_positive(hyper.alpha, "alpha");
  detail::require_positive(hyper.eps, "eps");
  if (!(hyper.beta2 > 0.0 && hyper.beta2 < 1.0)) {
    throw std::invalid_argument("beta2 must lie in (0, 1)");
  }
  StepReport report;
  detail::BoundEval eval(game, game.payoff, extra);
  try {
    eval.eval_grads(state.x, state.y);
  } catch (const autodiff::NonFiniteError&) {
    report.diverged = true;
    state.diverged = true;
    return report;
  }
  report.loss_before = eval.loss;
  report.grad_norm_x = detail::norm2(eval.grad_x);
  report.grad_norm_y = detail::norm2(eval.grad_y);

  state.tx += 1;
  state.ty += 1;
  double bias_x = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.tx));
  double bias_y = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.ty));
  std::vector<double> a_x(state.x.size()), a_y(state.y.size());
  for (std::size_t i = 0; i < state.x.size(); ++i) {
    state.vx[i] = hyper.beta2 * state.vx[i] + (1.0 - hyper.beta2) * eval.grad_x[i] * eval.grad_x[i];
    a_x[i] = hyper.alpha / (std::sqrt(state.vx[i] / bias_x) + hyper.eps);
  }
  for (std::size_t j = 0; j < state.y.size(); ++j) {
    state.vy[j] = hyper.beta2 * state.vy[j] + (1.0 - hyper.beta2) * eval.grad_y[j] * eval.grad_y[j];
    a_y[j] = hyper.alpha / (std::sqrt(state.vy[j] / bias_y) + hyper.eps);
  }
  detail::second_order_core(eval, a_x, a_y, report);
  detail::apply_deltas(game, state, extra, eval, report);
  return report;
}

}  // namespace cgdlab::optimizers
