#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

#include "driftkde/quadrature.hpp"

namespace driftkde {

enum class KernelFamily { UniformBox, Epanechnikov, Gaussian };

/// A kernel density K on R^r together with its certified constants.
/// Multidimensional compact kernels are tensor products of the 1-D profile;
/// the gaussian kernel is the isotropic standard normal. Immutable.
struct KernelSpec {
  KernelFamily family = KernelFamily::Gaussian;
  int dimension = 1;

  KernelSpec() = default;
  KernelSpec(KernelFamily f, int r) : family(f), dimension(r) {
    if (r < 1) throw std::invalid_argument("kernel dimension must be >= 1");
  }

  bool compact_support() const { return family != KernelFamily::Gaussian; }

  /// sup_x K(x).
  double sup_bound() const {
    switch (family) {
      case KernelFamily::UniformBox:
        return 1.0;
      case KernelFamily::Epanechnikov:
        return std::pow(0.75, dimension);
      case KernelFamily::Gaussian:
        return std::pow(2.0 * M_PI, -0.5 * dimension);
    }
    return 0.0;
  }

  /// Half-width of the support along each coordinate (inf for gaussian).
  double support_radius() const {
    switch (family) {
      case KernelFamily::UniformBox:
        return 0.5;
      case KernelFamily::Epanechnikov:
        return 1.0;
      case KernelFamily::Gaussian:
        return std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }
};

namespace detail {

inline double profile1d(KernelFamily family, double u) {
  switch (family) {
    case KernelFamily::UniformBox:
      return std::abs(u) <= 0.5 ? 1.0 : 0.0;
    case KernelFamily::Epanechnikov:
      return std::abs(u) <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
    case KernelFamily::Gaussian:
      return std::exp(-0.5 * u * u) / std::sqrt(2.0 * M_PI);
  }
  return 0.0;
}

inline double eval(const KernelSpec& k, const double* x, int n) {
  if (n != k.dimension) {
    throw std::invalid_argument("kernel dimension mismatch: point has " +
                                std::to_string(n) + " components, kernel is " +
                                std::to_string(k.dimension) + "-dimensional");
  }
  if (k.family == KernelFamily::Gaussian) {
    double sq = 0.0;
    for (int i = 0; i < n; ++i) sq += x[i] * x[i];
    return std::exp(-0.5 * sq) * std::pow(2.0 * M_PI, -0.5 * n);
  }
  double v = 1.0;
  for (int i = 0; i < n; ++i) {
    v *= profile1d(k.family, x[i]);
    if (v == 0.0) return 0.0;
  }
  return v;
}

}  // namespace detail

/// K(x) for a scalar point (r = 1).
inline double evaluate(const KernelSpec& k, double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("kernel point not finite");
  return detail::eval(k, &x, 1);
}

/// K(x) for a point in R^r.
inline double evaluate(const KernelSpec& k, const Eigen::VectorXd& x) {
  if (!x.allFinite()) throw std::invalid_argument("kernel point not finite");
  return detail::eval(k, x.data(), static_cast<int>(x.size()));
}

/// theta^{-r} K((xbar - x) / theta), the scaled kernel weight of an
/// observation xbar at the query point x.
inline double scaled_evaluate(const KernelSpec& k, double xbar, double x,
                              double theta) {
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
  return evaluate(k, (xbar - x) / theta) / theta;
}

inline double scaled_evaluate(const KernelSpec& k, const Eigen::VectorXd& xbar,
                              const Eigen::VectorXd& x, double theta) {
  if (!(theta > 0.0)) throw std::invalid_argument("theta must be positive");
  const Eigen::VectorXd u = (xbar - x) / theta;
  return evaluate(k, u) * std::pow(theta, -k.dimension);
}

/// Width characteristic A(nu) = integral of ||y||^nu K(y) dy.
/// Closed form where available, adaptive quadrature (1e-8) otherwise.
inline double width_characteristic(const KernelSpec& k, double nu) {
  if (!(nu > 0.0 && nu <= 1.0)) {
    throw std::invalid_argument("holder exponent nu must lie in (0, 1]");
  }
  const int r = k.dimension;
  if (k.family == KernelFamily::Gaussian) {
    // E||Z||^nu for Z ~ N(0, I_r): 2^{nu/2} Gamma((r+nu)/2) / Gamma(r/2).
    return std::pow(2.0, 0.5 * nu) * std::tgamma(0.5 * (r + nu)) /
           std::tgamma(0.5 * r);
  }
  if (r == 1) {
    if (k.family == KernelFamily::UniformBox) {
      return std::pow(0.5, nu) / (nu + 1.0);
    }
    return 3.0 / ((nu + 1.0) * (nu + 3.0));  // epanechnikov
  }
  if (r == 2) {
    const double s = k.support_radius();
    return quad::integrate2d(
        [&](double y1, double y2) {
          const double p[2] = {y1, y2};
          return std::pow(std::hypot(y1, y2), nu) * detail::eval(k, p, 2);
        },
        -s, s, -s, s, 1e-8);
  }
  throw std::invalid_argument(
      "width_characteristic: compact kernels supported for r <= 2 only");
}

inline KernelSpec kernel_by_name(const std::string& name, int r) {
  if (name == "box") return {KernelFamily::UniformBox, r};
  if (name == "epanechnikov") return {KernelFamily::Epanechnikov, r};
  if (name == "gaussian") return {KernelFamily::Gaussian, r};
  throw std::invalid_argument("unknown kernel '" + name +
                              "' (expected box, epanechnikov or gaussian)");
}

inline std::string kernel_name(const KernelSpec& k) {
  switch (k.family) {
    case KernelFamily::UniformBox:
      return "box";
    case KernelFamily::Epanechnikov:
      return "epanechnikov";
    case KernelFamily::Gaussian:
      return "gaussian";
  }
  return "?";
}

}  // namespace driftkde
