#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace driftkde {

/// Adaptive Gauss-Kronrod (G7/K15) quadrature on a finite interval.
/// Intervals are bisected until the local K15-G7 discrepancy meets the
/// tolerance share assigned to the interval.
namespace quad {

namespace detail {

// K15 abscissae (positive half), G7 weights (zero where the node is
// Kronrod-only) and K15 weights.
inline constexpr double kNodes[8] = {
    0.000000000000000, 0.405845151377397, 0.741531185599394,
    0.949107912342759, 0.207784955007898, 0.586087235467691,
    0.864864423359769, 0.991455371120813};
inline constexpr double kGauss[8] = {
    0.417959183673469, 0.381830050505119, 0.279705391489277,
    0.129484966168870, 0.0, 0.0, 0.0, 0.0};
inline constexpr double kKronrod[8] = {
    0.209482141084728, 0.190350578064785, 0.140653259715525,
    0.063092092629979, 0.204432940075298, 0.169004726639267,
    0.104790010322250, 0.022935322010529};

template <class F>
double gk15(const F& f, double a, double b, double& err) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double y0 = f(mid);
  double g7 = kGauss[0] * y0;
  double k15 = kKronrod[0] * y0;
  for (int i = 1; i < 8; ++i) {
    const double dx = half * kNodes[i];
    const double yi = f(mid + dx) + f(mid - dx);
    g7 += kGauss[i] * yi;
    k15 += kKronrod[i] * yi;
  }
  g7 *= half;
  k15 *= half;
  err = std::abs(k15 - g7);
  return k15;
}

template <class F>
double integrate_rec(const F& f, double a, double b, double tol, int depth) {
  double err = 0.0;
  const double val = gk15(f, a, b, err);
  if (err <= tol || b - a <= 1e-14 * (std::abs(a) + std::abs(b) + 1.0)) {
    return val;
  }
  if (depth <= 0) {
    throw std::runtime_error("quadrature did not converge on [" +
                             std::to_string(a) + ", " + std::to_string(b) +
                             "], residual " + std::to_string(err));
  }
  const double mid = 0.5 * (a + b);
  return integrate_rec(f, a, mid, 0.5 * tol, depth - 1) +
         integrate_rec(f, mid, b, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Integrates f over [a, b] to absolute tolerance abs_tol.
/// Throws std::runtime_error on non-convergence.
template <class F>
double integrate(const F& f, double a, double b, double abs_tol = 1e-10) {
  if (!(a <= b)) throw std::invalid_argument("integrate: requires a <= b");
  if (a == b) return 0.0;
  return detail::integrate_rec(f, a, b, abs_tol, 48);
}

/// Iterated 1-D quadrature over the rectangle [ax,bx] x [ay,by].
template <class F>
double integrate2d(const F& f, double ax, double bx, double ay, double by,
                   double abs_tol = 1e-8) {
  return integrate(
      [&](double x) {
        return integrate([&](double y) { return f(x, y); }, ay, by,
                         abs_tol / (8.0 * std::max(1.0, bx - ax)));
      },
      ax, bx, abs_tol);
}

}  // namespace quad
}  // namespace driftkde
