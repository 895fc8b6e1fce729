#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "driftkde/kernels.hpp"
#include "driftkde/schedules.hpp"

namespace driftkde {

/// Convex compact constraint set Y(x) in R^m: a box or a ball.
struct RegressionConstraint {
  enum class Kind { Box, Ball };
  Kind kind = Kind::Box;
  Eigen::VectorXd lo, hi;    // box
  Eigen::VectorXd center;    // ball
  double radius = 0.0;       // ball

  static RegressionConstraint box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
    if (lo.size() != hi.size() || ((hi - lo).array() < 0.0).any()) {
      throw std::invalid_argument("box constraint requires lo <= hi");
    }
    RegressionConstraint c;
    c.kind = Kind::Box;
    c.lo = std::move(lo);
    c.hi = std::move(hi);
    return c;
  }

  static RegressionConstraint ball(Eigen::VectorXd center, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("ball radius must be > 0");
    RegressionConstraint c;
    c.kind = Kind::Ball;
    c.center = std::move(center);
    c.radius = radius;
    return c;
  }

  int dimension() const {
    return static_cast<int>(kind == Kind::Box ? lo.size() : center.size());
  }

  /// sup of ||y|| over the set.
  double norm_bound() const {
    if (kind == Kind::Ball) return center.norm() + radius;
    return lo.cwiseAbs().cwiseMax(hi.cwiseAbs()).norm();
  }
};

/// Euclidean projection onto Y(x): per-component clamp for a box, radial
/// scaling for a ball.
inline Eigen::VectorXd project_Y(const Eigen::VectorXd& v,
                                 const RegressionConstraint& c) {
  if (v.size() != c.dimension()) {
    throw std::invalid_argument("project_Y: dimension mismatch");
  }
  if (c.kind == RegressionConstraint::Kind::Box) {
    return v.cwiseMax(c.lo).cwiseMin(c.hi);
  }
  const Eigen::VectorXd d = v - c.center;
  const double n = d.norm();
  if (n <= c.radius) return v;
  return c.center + d * (c.radius / n);
}

/// One input-output observation (xbar, ybar).
struct RegressionPair {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

/// Recursive vector regression estimate at one query point.
struct RegressionTrackerState {
  Eigen::VectorXd query_point;
  Eigen::VectorXd z;
  long t = 0;
  Eigen::VectorXd cesaro_num;
  double cesaro_den = 0.0;
  RegressionConstraint constraint;
  KernelSpec kernel;
  ScheduleSpec schedule;
  bool warned_large_rho = false;
};

inline RegressionTrackerState make_regression_tracker(
    Eigen::VectorXd x, Eigen::VectorXd z0, RegressionConstraint constraint,
    KernelSpec kernel, ScheduleSpec schedule) {
  if (kernel.dimension != x.size()) {
    throw std::invalid_argument("query point dimension != kernel dimension");
  }
  RegressionTrackerState s;
  s.z = project_Y(z0, constraint);
  s.query_point = std::move(x);
  s.cesaro_num = Eigen::VectorXd::Zero(z0.size());
  s.constraint = std::move(constraint);
  s.kernel = kernel;
  s.schedule = std::move(schedule);
  return s;
}

/// One projected SQG step from a batch of pairs observed at time t:
///   xi_t = (1/(N theta_t^r)) sum_i K((xbar_i - x)/theta_t) (z^t - ybar_i),
///   z^{t+1} = Pi_{Y(x)}(z^t - rho_t xi_t).
inline RegressionTrackerState sqg_regression_step(
    RegressionTrackerState s, std::span<const RegressionPair> batch) {
  if (batch.empty()) throw std::invalid_argument("empty observation batch");
  const double theta = theta_at(s.schedule, s.t);
  const double rho = rho_at(s.schedule, s.t);
  if (rho > 1.0 && !s.warned_large_rho) {
    std::fprintf(stderr,
                 "driftkde: warning: rho_t = %g > 1 at t = %ld; accuracy "
                 "theorems assume rho <= 1/g1_bar\n",
                 rho, s.t);
    s.warned_large_rho = true;
  }
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(s.z.size());
  for (const auto& p : batch) {
    if (!p.y.allFinite()) throw std::invalid_argument("non-finite observation");
    const double k = scaled_evaluate(s.kernel, p.x, s.query_point, theta);
    if (k != 0.0) xi += k * (s.z - p.y);
  }
  xi /= static_cast<double>(batch.size());
  s.z = project_Y(s.z - rho * xi, s.constraint);
  s.t += 1;
  s.cesaro_num += rho * s.z;
  s.cesaro_den += rho;
  return s;
}

inline Eigen::VectorXd cesaro_regression(const RegressionTrackerState& s) {
  if (s.t < 1 || s.cesaro_den <= 0.0) {
    throw std::logic_error("cesaro_regression requires at least one step");
  }
  return s.cesaro_num / s.cesaro_den;
}

/// Nadaraya-Watson estimate: kernel-weighted mean of outputs. Empty optional
/// signals the no-mass-at-query condition (zero denominator).
inline std::optional<Eigen::VectorXd> nadaraya_watson(
    std::span<const RegressionPair> samples, const Eigen::VectorXd& x,
    double theta, const KernelSpec& kernel) {
  if (samples.empty()) throw std::invalid_argument("empty sample list");
  Eigen::VectorXd num = Eigen::VectorXd::Zero(samples.front().y.size());
  double den = 0.0;
  for (const auto& p : samples) {
    const double k = evaluate(kernel, (p.x - x) / theta);
    if (k != 0.0) {
      num += k * p.y;
      den += k;
    }
  }
  if (den <= 0.0) return std::nullopt;
  return num / den;
}

/// Empirical weighted least-squares objective
///   (1/(2N theta^r)) sum_i K((xbar_i - x)/theta) ||z - ybar_i||^2,
/// whose unconstrained minimizer is the Nadaraya-Watson estimate.
inline double empirical_objective(std::span<const RegressionPair> samples,
                                  const Eigen::VectorXd& x, double theta,
                                  const KernelSpec& kernel,
                                  const Eigen::VectorXd& z) {
  if (samples.empty()) throw std::invalid_argument("empty sample list");
  double acc = 0.0;
  for (const auto& p : samples) {
    const double k = scaled_evaluate(kernel, p.x, x, theta);
    if (k != 0.0) acc += k * (z - p.y).squaredNorm();
  }
  return 0.5 * acc / samples.size();
}

}  // namespace driftkde
