#pragma once

// Fixed-point analysis of the discrete update maps. For the 1-D quadratic
// game with Hessian entries a = Dxx f, b = Dxy f, c = Dyy f, the SimGD update
// is (x, y) <- (Id - M)(x, y) with
//   M = [[eta_x a, eta_x b], [-eta_y b, -eta_y c]],
// so the map's eigenvalues are 1 - lambda for lambda an eigenvalue of M, and
// the closed-form characteristic polynomial of M doubles as an oracle for
// the assembled-matrix path. Multidimensional maps (and the CGD map, which
// has no convenient closed form) go through dense Jacobians and a QR
// eigensolver.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "cgdlab/autodiff.hpp"
#include "cgdlab/games.hpp"
#include "cgdlab/optimizers.hpp"

namespace cgdlab::stability {

// Half-width of the indecisive band around spectral radius 1.
inline constexpr double kMarginalBand = 1e-9;

enum class Classification { stable, unstable, marginal };

inline std::string classification_name(Classification c) {
  switch (c) {
    case Classification::stable: return "stable";
    case Classification::unstable: return "unstable";
    case Classification::marginal: return "marginal";
  }
  throw std::logic_error("unreachable classification");
}

inline Classification classify_radius(double spectral_radius) {
  if (std::abs(spectral_radius - 1.0) <= kMarginalBand) return Classification::marginal;
  return spectral_radius < 1.0 ? Classification::stable : Classification::unstable;
}

struct CharPoly1d {
  double linear_coef = 0.0;
  double constant_coef = 0.0;
};

// p(lambda) = lambda^2 + linear_coef * lambda + constant_coef for the 2x2
// matrix M above: trace eta_x a - eta_y c, determinant eta_x eta_y (b^2 - ac).
inline CharPoly1d char_poly_1d(double a, double b, double c, double eta_x, double eta_y) {
  return {-(eta_x * a - eta_y * c), eta_x * eta_y * (b * b - a * c)};
}

// Roots of char_poly_1d by the quadratic formula.
inline std::array<std::complex<double>, 2> eigvals_of_M_1d(double a, double b, double c,
                                                           double eta_x, double eta_y) {
  CharPoly1d p = char_poly_1d(a, b, c, eta_x, eta_y);
  double half_trace = -p.linear_coef / 2.0;
  double disc = half_trace * half_trace - p.constant_coef;
  if (disc >= 0.0) {
    double r = std::sqrt(disc);
    return {std::complex<double>(half_trace - r, 0.0), std::complex<double>(half_trace + r, 0.0)};
  }
  double r = std::sqrt(-disc);
  return {std::complex<double>(half_trace, -r), std::complex<double>(half_trace, r)};
}

// Eigenvalue moduli of the update map Id - M.
inline std::array<double, 2> update_map_moduli_1d(double a, double b, double c, double eta_x,
                                                  double eta_y) {
  std::array<std::complex<double>, 2> ev = eigvals_of_M_1d(a, b, c, eta_x, eta_y);
  return {std::abs(1.0 - ev[0]), std::abs(1.0 - ev[1])};
}

// True iff the roots of the characteristic polynomial have positive real
// part: eta_x a > eta_y c and eta_x eta_y b^2 > eta_x eta_y a c (both strict).
inline bool positive_real_part_check(double a, double b, double c, double eta_x, double eta_y) {
  return (eta_x * a > eta_y * c) && (eta_x * eta_y * b * b > eta_x * eta_y * a * c);
}

enum class OptimizerKind { simgd, cgd };

inline std::string optimizer_kind_name(OptimizerKind k) {
  return k == OptimizerKind::simgd ? "simgd" : "cgd";
}

struct StabilityReport {
  std::vector<double> fixed_point;
  Eigen::MatrixXd jacobian;
  std::vector<std::complex<double>> eigenvalues;
  double spectral_radius = 0.0;
  Classification classification = Classification::marginal;
};

inline constexpr int kMaxEigenDim = 128;

// Max eigenvalue modulus of a dense real square matrix (Hessenberg QR).
inline double spectral_radius(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("spectral_radius: matrix must be square");
  if (m.rows() == 0 || m.rows() > kMaxEigenDim) {
    throw std::invalid_argument("spectral_radius: dimension out of range");
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("spectral_radius: eigenvalue iteration did not converge");
  }
  double r = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) r = std::max(r, std::abs(solver.eigenvalues()[i]));
  return r;
}

inline std::vector<std::complex<double>> eigenvalues_of(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0 || m.rows() > kMaxEigenDim) {
    throw std::invalid_argument("eigenvalues_of: dimension out of range");
  }
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigenvalues_of: eigenvalue iteration did not converge");
  }
  std::vector<std::complex<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = solver.eigenvalues()[i];
  return out;
}

namespace detail {

// Step width for the central-difference CGD Jacobian.
inline constexpr double kCgdJacobianStep = 1e-6;

inline std::vector<autodiff::ParamGroup> bind_point(const games::ZeroSumGame& game,
                                                    std::span<const double> x,
                                                    std::span<const double> y) {
  std::vector<autodiff::ParamGroup> at;
  at.push_back({game.min_group, {x.begin(), x.end()}});
  at.push_back({game.max_group, {y.begin(), y.end()}});
  for (const autodiff::ParamGroup& g : game.bound_constants) at.push_back(g);
  return at;
}

// One application of the CGD update map at an arbitrary point.
inline std::vector<double> cgd_map_image(const games::ZeroSumGame& game, double eta,
                                         std::span<const double> x, std::span<const double> y) {
  optimizers::OptimizerState state = optimizers::make_state(x, y);
  optimizers::StepReport report = optimizers::cgd_step(game, state, eta);
  if (report.diverged) throw std::runtime_error("cgd update map: non-finite step");
  std::vector<double> image(state.x);
  image.insert(image.end(), state.y.begin(), state.y.end());
  return image;
}

}  // namespace detail

// Dense Jacobian of the one-step update map at (x, y). SimGD assembles
// Id - M from Hessian blocks; CGD differentiates the step map by central
// finite differences (shared step size required).
inline Eigen::MatrixXd update_map_jacobian(const games::ZeroSumGame& game, OptimizerKind kind,
                                           optimizers::StepSizes steps, std::span<const double> x,
                                           std::span<const double> y) {
  int nx = static_cast<int>(x.size());
  int ny = static_cast<int>(y.size());
  int n = nx + ny;
  if (n == 0 || n > kMaxEigenDim) {
    throw std::invalid_argument("update_map_jacobian: dimension out of range");
  }
  if (kind == OptimizerKind::simgd) {
    std::vector<autodiff::ParamGroup> at = detail::bind_point(game, x, y);
    autodiff::Workspace ws;
    Eigen::MatrixXd dxx = autodiff::hessian_block(game.payoff, at, game.min_group, game.min_group, ws);
    Eigen::MatrixXd dxy = autodiff::hessian_block(game.payoff, at, game.min_group, game.max_group, ws);
    Eigen::MatrixXd dyx = autodiff::hessian_block(game.payoff, at, game.max_group, game.min_group, ws);
    Eigen::MatrixXd dyy = autodiff::hessian_block(game.payoff, at, game.max_group, game.max_group, ws);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Identity(n, n);
    jac.topLeftCorner(nx, nx) -= steps.eta_x * dxx;
    jac.topRightCorner(nx, ny) -= steps.eta_x * dxy;
    jac.bottomLeftCorner(ny, nx) += steps.eta_y * dyx;
    jac.bottomRightCorner(ny, ny) += steps.eta_y * dyy;
    return jac;
  }
  if (steps.eta_x != steps.eta_y) {
    throw std::invalid_argument("update_map_jacobian: the cgd map uses one shared step size");
  }
  double eta = steps.eta_x;
  std::vector<double> base(x.begin(), x.end());
  base.insert(base.end(), y.begin(), y.end());
  double h = detail::kCgdJacobianStep;
  Eigen::MatrixXd jac(n, n);
  std::vector<double> p(base);
  for (int k = 0; k < n; ++k) {
    p[static_cast<std::size_t>(k)] = base[static_cast<std::size_t>(k)] + h;
    std::vector<double> plus = detail::cgd_map_image(
        game, eta, std::span<const double>(p.data(), static_cast<std::size_t>(nx)),
        std::span<const double>(p.data() + nx, static_cast<std::size_t>(ny)));
    p[static_cast<std::size_t>(k)] = base[static_cast<std::size_t>(k)] - h;
    std::vector<double> minus = detail::cgd_map_image(
        game, eta, std::span<const double>(p.data(), static_cast<std::size_t>(nx)),
        std::span<const double>(p.data() + nx, static_cast<std::size_t>(ny)));
    p[static_cast<std::size_t>(k)] = base[static_cast<std::size_t>(k)];
    for (int r = 0; r < n; ++r) {
      jac(r, k) = (plus[static_cast<std::size_t>(r)] - minus[static_cast<std::size_t>(r)]) / (2.0 * h);
    }
  }
  return jac;
}

inline StabilityReport analyze_fixed_point(const games::ZeroSumGame& game, OptimizerKind kind,
                                           optimizers::StepSizes steps, std::span<const double> x,
                                           std::span<const double> y) {
  StabilityReport report;
  report.fixed_point.assign(x.begin(), x.end());
  report.fixed_point.insert(report.fixed_point.end(), y.begin(), y.end());
  report.jacobian = update_map_jacobian(game, kind, steps, x, y);
  report.eigenvalues = eigenvalues_of(report.jacobian);
  double r = 0.0;
  for (const std::complex<double>& ev : report.eigenvalues) r = std::max(r, std::abs(ev));
  report.spectral_radius = r;
  report.classification = classify_radius(r);
  return report;
}

struct SweepGrid {
  struct Cell {
    double eta_x = 0.0;
    double eta_y = 0.0;
    double spectral_radius = 0.0;
    Classification classification = Classification::marginal;
  };

  std::vector<double> eta_x_values;
  std::vector<double> eta_y_values;
  // Row-major: cell (i, j) = eta_x_values[i] x eta_y_values[j].
  std::vector<Cell> cells;

  const Cell& at(std::size_t i, std::size_t j) const {
    return cells.at(i * eta_y_values.size() + j);
  }

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "eta_x,eta_y,spectral_radius,classification\n";
    for (const Cell& c : cells) {
      out << c.eta_x << ',' << c.eta_y << ',' << c.spectral_radius << ','
          << classification_name(c.classification) << '\n';
    }
    return out.str();
  }
};

// Classifies every (eta_x, eta_y) cell at the given point. The CGD map uses
// the cell's eta_x as its shared step size.
inline SweepGrid stability_sweep(const games::ZeroSumGame& game, OptimizerKind kind,
                                 std::span<const double> eta_x_values,
                                 std::span<const double> eta_y_values, std::span<const double> x,
                                 std::span<const double> y) {
  if (eta_x_values.empty() || eta_y_values.empty()) {
    throw std::invalid_argument("stability_sweep: step-size grids must be nonempty");
  }
  SweepGrid grid;
  grid.eta_x_values.assign(eta_x_values.begin(), eta_x_values.end());
  grid.eta_y_values.assign(eta_y_values.begin(), eta_y_values.end());
  grid.cells.reserve(eta_x_values.size() * eta_y_values.size());
  for (double ex : eta_x_values) {
    for (double ey : eta_y_values) {
      optimizers::StepSizes steps{ex, ey};
      if (kind == OptimizerKind::cgd) steps = {ex, ex};
      StabilityReport rep = analyze_fixed_point(game, kind, steps, x, y);
      grid.cells.push_back({ex, ey, rep.spectral_radius, rep.classification});
    }
  }
  return grid;
}

// Smallest gamma in {1, 1/2, 1/4, ...} >= floor with a stable classification
// at (gamma eta_x, gamma eta_y), using the closed-form 1-D moduli.
inline std::optional<double> stabilizing_scale_1d(double a, double b, double c, double eta_x,
                                                  double eta_y, double floor_gamma = 1e-4) {
  for (double gamma = 1.0; gamma >= floor_gamma; gamma /= 2.0) {
    std::array<double, 2> moduli = update_map_moduli_1d(a, b, c, gamma * eta_x, gamma * eta_y);
    double r = std::max(moduli[0], moduli[1]);
    if (classify_radius(r) == Classification::stable) return gamma;
  }
  return std::nullopt;
}

}  // namespace cgdlab::stability
