#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <functional>
#include <span>
#include <stdexcept>

#include "driftkde/kernels.hpp"
#include "driftkde/quadrature.hpp"
#include "driftkde/schedules.hpp"

namespace driftkde {

/// Feasible interval for the density value at one query point, plus the
/// global cap over all query points.
struct DensityBounds {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  double global_cap = std::numeric_limits<double>::infinity();

  DensityBounds() = default;
  DensityBounds(double lo, double hi, double cap)
      : lower(lo), upper(hi), global_cap(cap) {
    if (!(0.0 <= lo && lo <= hi && hi <= cap)) {
      throw std::invalid_argument("density bounds require 0 <= lo <= hi <= cap");
    }
  }
};

/// Recursive density estimate at a single query point: the current value z,
/// the step counter and the weighted running-average accumulators. A step is
/// a value transition; states are freely copyable and serializable.
struct DensityTrackerState {
  Eigen::VectorXd query_point;
  double z = 0.0;
  long t = 0;
  double cesaro_num = 0.0;  // sum of rho_j * z^{j+1}
  double cesaro_den = 0.0;  // sum of rho_j
  DensityBounds bounds;
  KernelSpec kernel;
  ScheduleSpec schedule;
  bool warned_large_rho = false;
};

inline DensityTrackerState make_density_tracker(Eigen::VectorXd x, double z0,
                                                DensityBounds bounds,
                                                KernelSpec kernel,
                                                ScheduleSpec schedule) {
  if (kernel.dimension != x.size()) {
    throw std::invalid_argument("query point dimension != kernel dimension");
  }
  DensityTrackerState s;
  s.query_point = std::move(x);
  s.z = std::clamp(z0, bounds.lower, bounds.upper);
  s.bounds = bounds;
  s.kernel = kernel;
  s.schedule = std::move(schedule);
  return s;
}

inline DensityTrackerState make_density_tracker(double x, double z0,
                                                DensityBounds bounds,
                                                KernelSpec kernel,
                                                ScheduleSpec schedule) {
  Eigen::VectorXd p(1);
  p[0] = x;
  return make_density_tracker(std::move(p), z0, bounds, kernel,
                              std::move(schedule));
}

namespace detail {

inline DensityTrackerState density_step_impl(DensityTrackerState s,
                                             double kernel_mean) {
  const double rho = rho_at(s.schedule, s.t);
  if (rho > 1.0 && !s.warned_large_rho) {
    std::fprintf(stderr,
                 "driftkde: warning: rho_t = %g > 1 at t = %ld; accuracy "
                 "theorems assume rho <= 1/2\n",
                 rho, s.t);
    s.warned_large_rho = true;
  }
  const double xi = s.z - kernel_mean;
  s.z = std::clamp(s.z - rho * xi, s.bounds.lower, s.bounds.upper);
  s.t += 1;
  s.cesaro_num += rho * s.z;
  s.cesaro_den += rho;
  return s;
}

}  // namespace detail

/// One projected SQG step from a mini-batch of samples drawn from the
/// current density. The stochastic gradient is
///   xi_t = z^t - (1/(N theta_t^r)) sum_i K((xbar_i - x)/theta_t),
/// and z^{t+1} = clamp(z^t - rho_t xi_t, [lower, upper]).
inline DensityTrackerState sqg_density_step(DensityTrackerState s,
                                            std::span<const double> batch) {
  if (batch.empty()) throw std::invalid_argument("empty sample batch");
  if (s.kernel.dimension != 1) {
    throw std::invalid_argument("scalar batch requires a 1-D kernel");
  }
  const double theta = theta_at(s.schedule, s.t);
  const double x = s.query_point[0];
  double acc = 0.0;
  for (double xb : batch) {
    if (!std::isfinite(xb)) throw std::invalid_argument("non-finite sample");
    acc += scaled_evaluate(s.kernel, xb, x, theta);
  }
  return detail::density_step_impl(std::move(s), acc / batch.size());
}

inline DensityTrackerState sqg_density_step(
    DensityTrackerState s, std::span<const Eigen::VectorXd> batch) {
  if (batch.empty()) throw std::invalid_argument("empty sample batch");
  const double theta = theta_at(s.schedule, s.t);
  double acc = 0.0;
  for (const auto& xb : batch) {
    acc += scaled_evaluate(s.kernel, xb, s.query_point, theta);
  }
  return detail::density_step_impl(std::move(s), acc / batch.size());
}

/// Weighted running average sum rho_j z^{j+1} / sum rho_j over the realized
/// step history.
inline double cesaro_density(const DensityTrackerState& s) {
  if (s.t < 1 || s.cesaro_den <= 0.0) {
    throw std::logic_error("cesaro_density requires at least one step");
  }
  return s.cesaro_num / s.cesaro_den;
}

/// Classical batch kernel density estimate (1/(N theta^r)) sum_i K(...).
inline double parzen_estimate(std::span<const double> samples, double x,
                              double theta, const KernelSpec& kernel) {
  if (samples.empty()) throw std::invalid_argument("empty sample list");
  double acc = 0.0;
  for (double xb : samples) acc += scaled_evaluate(kernel, xb, x, theta);
  return acc / samples.size();
}

inline double parzen_estimate(std::span<const Eigen::VectorXd> samples,
                              const Eigen::VectorXd& x, double theta,
                              const KernelSpec& kernel) {
  if (samples.empty()) throw std::invalid_argument("empty sample list");
  double acc = 0.0;
  for (const auto& xb : samples) acc += scaled_evaluate(kernel, xb, x, theta);
  return acc / samples.size();
}

/// Mollified density: the convolution theta^{-r} int K((xbar-x)/theta)
/// g(xbar) dxbar, computed by adaptive quadrature over the intersection of
/// the kernel window with the support [g_lo, g_hi] of g. Throws on
/// quadrature non-convergence.
inline double mollified_density(const std::function<double(double)>& g,
                                double g_lo, double g_hi, double x,
                                double theta, const KernelSpec& kernel,
                                double abs_tol = 1e-8) {
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
  if (kernel.dimension != 1) {
    throw std::invalid_argument("scalar mollified_density needs a 1-D kernel");
  }
  const double half_window =
      kernel.compact_support() ? kernel.support_radius() * theta : 10.0 * theta;
  const double lo = std::max(g_lo, x - half_window);
  const double hi = std::min(g_hi, x + half_window);
  if (!(lo < hi)) return 0.0;
  return quad::integrate(
      [&](double xb) { return scaled_evaluate(kernel, xb, x, theta) * g(xb); },
      lo, hi, abs_tol);
}

inline double mollified_density(
    const std::function<double(double, double)>& g, double g_lo1, double g_hi1,
    double g_lo2, double g_hi2, const Eigen::VectorXd& x, double theta,
    const KernelSpec& kernel, double abs_tol = 1e-8) {
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
  if (kernel.dimension != 2 || x.size() != 2) {
    throw std::invalid_argument("2-D mollified_density needs a 2-D kernel");
  }
  const double hw =
      kernel.compact_support() ? kernel.support_radius() * theta : 10.0 * theta;
  const double lo1 = std::max(g_lo1, x[0] - hw), hi1 = std::min(g_hi1, x[0] + hw);
  const double lo2 = std::max(g_lo2, x[1] - hw), hi2 = std::min(g_hi2, x[1] + hw);
  if (!(lo1 < hi1) || !(lo2 < hi2)) return 0.0;
  return quad::integrate2d(
      [&](double x1, double x2) {
        Eigen::VectorXd p(2);
        p << x1, x2;
        return scaled_evaluate(kernel, p, x, theta) * g(x1, x2);
      },
      lo1, hi1, lo2, hi2, abs_tol);
}

}  // namespace driftkde
