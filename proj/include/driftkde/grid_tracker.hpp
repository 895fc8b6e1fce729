#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "driftkde/kernels.hpp"
#include "driftkde/schedules.hpp"

namespace driftkde {

/// A 1-D grid with quadrature weights and the auxiliary weighting density
/// h(x) of the projection inner product <u, v>_hw = sum h_i w_i u_i v_i.
struct GridSpec {
  Eigen::VectorXd points;        // strictly increasing
  Eigen::VectorXd cell_weights;  // positive quadrature weights
  Eigen::VectorXd aux_density;   // positive h(x_i), default uniform

  /// Uniform midpoint grid of m cells on [a, b], uniform h.
  static GridSpec uniform(double a, double b, int m) {
    if (m < 2) throw std::invalid_argument("grid needs at least 2 points");
    if (!(a < b)) throw std::invalid_argument("grid interval requires a < b");
    GridSpec g;
    const double dx = (b - a) / m;
    g.points = Eigen::VectorXd::LinSpaced(m, a + 0.5 * dx, b - 0.5 * dx);
    g.cell_weights = Eigen::VectorXd::Constant(m, dx);
    g.aux_density = Eigen::VectorXd::Constant(m, 1.0 / (b - a));
    return g;
  }

  int size() const { return static_cast<int>(points.size()); }

  void validate() const {
    const int m = size();
    if (m < 2) throw std::invalid_argument("grid needs at least 2 points");
    if (cell_weights.size() != m || aux_density.size() != m) {
      throw std::invalid_argument("grid field sizes disagree");
    }
    for (int i = 0; i + 1 < m; ++i) {
      if (!(points[i] < points[i + 1])) {
        throw std::invalid_argument("grid points must be strictly increasing");
      }
    }
    if ((cell_weights.array() <= 0.0).any() ||
        (aux_density.array() <= 0.0).any()) {
      throw std::invalid_argument("grid weights and h must be positive");
    }
  }
};

/// Whole-curve density estimate on a grid with per-point box bounds and an
/// optional normalization constraint sum w_i z_i = 1.
struct GridEstimate {
  Eigen::VectorXd values;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  bool normalized = false;
};

/// Weighted Euclidean projection onto {box} or {box} ∩ {sum w_i y_i = 1}.
/// Minimizes sum h_i w_i (y_i - v_i)^2. With the normalization active the
/// solution is y_i(lambda) = clamp(v_i + lambda / h_i, [lo_i, hi_i]) where
/// lambda solves sum w_i y_i(lambda) = 1; the residual is monotone and
/// piecewise linear in lambda, so bisection is exact up to tolerance.
inline Eigen::VectorXd project_onto_G(const Eigen::VectorXd& values,
                                      const GridSpec& grid,
                                      const Eigen::VectorXd& lower,
                                      const Eigen::VectorXd& upper,
                                      bool normalized) {
  const int m = static_cast<int>(values.size());
  if (lower.size() != m || upper.size() != m || grid.size() != m) {
    throw std::invalid_argument("project_onto_G: size mismatch");
  }
  if (!normalized) {
    return values.cwiseMax(lower).cwiseMin(upper);
  }
  const auto& w = grid.cell_weights;
  const auto& h = grid.aux_density;
  const double lo_mass = w.dot(lower);
  const double hi_mass = w.dot(upper);
  if (lo_mass > 1.0 + 1e-12 || hi_mass < 1.0 - 1e-12) {
    throw std::runtime_error(
        "projection infeasible: box forces sum w_i z_i in [" +
        std::to_string(lo_mass) + ", " + std::to_string(hi_mass) +
        "], cannot equal 1");
  }

  const auto mass_at = [&](double lambda) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) {
      s += w[i] * std::clamp(values[i] + lambda / h[i], lower[i], upper[i]);
    }
    return s;
  };

  // Bracket from the extreme shifts that pin every coordinate at a bound.
  double lam_lo = 0.0, lam_hi = 0.0;
  for (int i = 0; i < m; ++i) {
    lam_lo = std::min(lam_lo, (lower[i] - values[i]) * h[i]);
    lam_hi = std::max(lam_hi, (upper[i] - values[i]) * h[i]);
  }
  double f_lo = mass_at(lam_lo) - 1.0;
  double f_hi = mass_at(lam_hi) - 1.0;
  if (f_lo > 0.0 || f_hi < 0.0) {
    throw std::runtime_error("projection infeasible: constraint residual has "
                             "no sign change over the shift bracket");
  }
  double lam = 0.0;
  for (int it = 0; it < 200; ++it) {
    lam = 0.5 * (lam_lo + lam_hi);
    const double f = mass_at(lam) - 1.0;
    if (std::abs(f) <= 1e-12) break;
    if (f < 0.0) {
      lam_lo = lam;
    } else {
      lam_hi = lam;
    }
  }
  Eigen::VectorXd out(m);
  for (int i = 0; i < m; ++i) {
    out[i] = std::clamp(values[i] + lam / h[i], lower[i], upper[i]);
  }
  return out;
}

inline Eigen::VectorXd project_onto_G(const Eigen::VectorXd& values,
                                      const GridSpec& grid,
                                      const GridEstimate& est) {
  return project_onto_G(values, grid, est.lower, est.upper, est.normalized);
}

/// One SQG step of the whole estimated curve from a single sample, followed
/// by projection onto the constraint set.
inline GridEstimate grid_sqg_step(GridEstimate est, const GridSpec& grid,
                                  double sample, double rho, double theta,
                                  const KernelSpec& kernel) {
  if (!std::isfinite(sample)) throw std::invalid_argument("non-finite sample");
  if (!(rho > 0.0 && theta > 0.0)) {
    throw std::invalid_argument("rho and theta must be positive");
  }
  if (kernel.dimension != 1) {
    throw std::invalid_argument("grid tracker requires a 1-D kernel");
  }
  const int m = grid.size();
  Eigen::VectorXd raw(m);
  for (int i = 0; i < m; ++i) {
    const double k = scaled_evaluate(kernel, sample, grid.points[i], theta);
    raw[i] = est.values[i] - rho * (est.values[i] - k);
  }
  est.values = project_onto_G(raw, grid, est.lower, est.upper, est.normalized);
  return est;
}

/// Weighted integrated squared error ||z - g||^2_h on the grid.
inline double weighted_ise(const GridSpec& grid, const Eigen::VectorXd& z,
                           const Eigen::VectorXd& g) {
  return (grid.aux_density.array() * grid.cell_weights.array() *
          (z - g).array().square())
      .sum();
}

}  // namespace driftkde
