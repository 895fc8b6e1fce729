#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include <doctest.h>
#include <Eigen/Dense>

#include "driftkde/kernels.hpp"
#include "driftkde/quadrature.hpp"
#include "driftkde/regression_tracker.hpp"
#include "driftkde/rng.hpp"
#include "driftkde/scenarios.hpp"
#include "driftkde/schedules.hpp"

using namespace driftkde;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

ScheduleSpec const_sched(double rho, double theta) {
  ScheduleSpec s;
  s.rho_rule = SequenceRule::constant(rho);
  s.theta_rule = SequenceRule::constant(theta);
  return s;
}

RegressionPair pair1(double x, double y) {
  RegressionPair p;
  p.x = vec({x});
  p.y = vec({y});
  return p;
}

// Expected squared-error objective Phi(x, z) = (1/2) int ||z - y||^2 g(x, y) dy
// at a fixed query point, by adaptive quadrature over the output space (m = 1).
double objective_exact(const RegressionScenario& sc, long t, double x,
                       double z) {
  const double m = sc.regression_truth(t, x)[0];
  const double a = sc.noise_amp();
  return 0.5 * quad::integrate(
                   [&](double y) {
                     return (z - y) * (z - y) * sc.input_density(x) *
                            sc.noise_density(y - m);
                   },
                   m - a, m + a, 1e-11);
}

// Smoothed objective Phi_theta(x, z) =
//   (1/2) int K_theta(xb - x) int ||z - y||^2 g(xb, y) dy dxb; the inner
// integral closes to g1(xb) ((z - m(xb))^2 + noise variance).
double objective_smoothed(const RegressionScenario& sc, long t, double x,
                          double z, double theta, const KernelSpec& k) {
  const double noise_var = sc.noise_amp() * sc.noise_amp() / 6.0;
  const double half = (k.compact_support() ? k.support_radius() : 10.0) * theta;
  const double lo = std::max(sc.input_lo(), x - half);
  const double hi = std::min(sc.input_hi(), x + half);
  if (!(lo < hi)) return 0.0;
  return 0.5 * quad::integrate(
                   [&](double xb) {
                     const double m = sc.regression_truth(t, xb)[0];
                     return scaled_evaluate(k, xb, x, theta) *
                            sc.input_density(xb) *
                            ((z - m) * (z - m) + noise_var);
                   },
                   lo, hi, 1e-11);
}

}  // namespace

TEST_CASE("constraint projection worked examples") {
  const auto box = RegressionConstraint::box(vec({-1.0, -1.0}), vec({1.0, 1.0}));
  CHECK((project_Y(vec({2.0, -0.5}), box) - vec({1.0, -0.5})).norm() == 0.0);

  const auto ball1 = RegressionConstraint::ball(vec({0.0, 0.0}), 1.0);
  const Eigen::VectorXd inside = vec({0.3, -0.2});
  CHECK((project_Y(inside, ball1) - inside).norm() == 0.0);

  const auto ball2 = RegressionConstraint::ball(vec({1.0, 0.0}), 2.0);
  CHECK((project_Y(vec({5.0, 0.0}), ball2) - vec({3.0, 0.0})).norm() <= 1e-15);

  CHECK_THROWS_AS(RegressionConstraint::box(vec({1.0}), vec({0.0})),
                  std::invalid_argument);
  CHECK_THROWS_AS(RegressionConstraint::ball(vec({0.0}), 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(project_Y(vec({1.0, 2.0}), RegressionConstraint::box(
                                                 vec({0.0}), vec({1.0}))),
                  std::invalid_argument);
}

TEST_CASE("constraint norm bounds") {
  CHECK(RegressionConstraint::box(vec({-1.0, -2.0}), vec({3.0, 1.0}))
            .norm_bound() == doctest::Approx(std::sqrt(9.0 + 4.0)));
  CHECK(RegressionConstraint::ball(vec({3.0, 4.0}), 2.0).norm_bound() ==
        doctest::Approx(7.0));
}

TEST_CASE("projection is idempotent, non-expansive and feasible") {
  CounterRng rng(21);
  const auto box = RegressionConstraint::box(vec({-1.0, 0.0}), vec({0.5, 2.0}));
  const auto ball = RegressionConstraint::ball(vec({0.5, -0.5}), 1.25);
  for (const auto& c : {box, ball}) {
    for (int it = 0; it < 100; ++it) {
      const Eigen::VectorXd u = vec({6.0 * rng.uniform() - 3.0,
                                     6.0 * rng.uniform() - 3.0});
      const Eigen::VectorXd v = vec({6.0 * rng.uniform() - 3.0,
                                     6.0 * rng.uniform() - 3.0});
      const Eigen::VectorXd pu = project_Y(u, c);
      const Eigen::VectorXd pv = project_Y(v, c);
      CHECK((project_Y(pu, c) - pu).norm() <= 1e-12);
      CHECK((pu - pv).norm() <= (u - v).norm() + 1e-12);
      if (c.kind == RegressionConstraint::Kind::Box) {
        CHECK((pu.array() >= c.lo.array() - 1e-15).all());
        CHECK((pu.array() <= c.hi.array() + 1e-15).all());
      } else {
        CHECK((pu - c.center).norm() <= c.radius + 1e-12);
      }
    }
  }
}

TEST_CASE("single regression update arithmetic") {
  const KernelSpec box = kernel_by_name("box", 1);
  auto s = make_regression_tracker(
      vec({0.0}), vec({0.0}),
      RegressionConstraint::box(vec({-1.0}), vec({1.0})), box,
      const_sched(0.1, 1.0));
  const RegressionPair batch[] = {pair1(0.0, 2.0)};
  s = sqg_regression_step(std::move(s), std::span<const RegressionPair>(batch));
  // xi = K(0) (0 - 2) = -2; z' = clamp(0 + 0.2) = 0.2.
  CHECK(s.z[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(s.t == 1);
}

TEST_CASE("observation outside the kernel window leaves z unchanged") {
  const KernelSpec box = kernel_by_name("box", 1);
  auto s = make_regression_tracker(
      vec({0.0}), vec({0.4}),
      RegressionConstraint::box(vec({-1.0}), vec({1.0})), box,
      const_sched(0.5, 1.0));
  const RegressionPair batch[] = {pair1(50.0, 2.0)};
  s = sqg_regression_step(std::move(s), std::span<const RegressionPair>(batch));
  CHECK(s.z[0] == 0.4);
}

TEST_CASE("ball projection after an aggressive update") {
  const KernelSpec box = kernel_by_name("box", 1);
  auto s = make_regression_tracker(
      vec({0.0}), vec({0.0, 0.0}),
      RegressionConstraint::ball(vec({0.0, 0.0}), 1.0), box,
      const_sched(1.0, 1.0));
  RegressionPair p;
  p.x = vec({0.0});
  p.y = vec({3.0, 4.0});  // xi = -y, raw = rho * y = (3, 4)
  const RegressionPair batch[] = {p};
  s = sqg_regression_step(std::move(s), std::span<const RegressionPair>(batch));
  CHECK(s.z[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(s.z[1] == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("regression update input validation") {
  const KernelSpec box = kernel_by_name("box", 1);
  auto s = make_regression_tracker(
      vec({0.0}), vec({0.0}),
      RegressionConstraint::box(vec({-1.0}), vec({1.0})), box,
      const_sched(0.1, 1.0));
  CHECK_THROWS_AS(
      sqg_regression_step(s, std::span<const RegressionPair>()),
      std::invalid_argument);
  RegressionPair bad = pair1(0.0, std::nan(""));
  const RegressionPair batch[] = {bad};
  CHECK_THROWS_AS(
      sqg_regression_step(s, std::span<const RegressionPair>(batch)),
      std::invalid_argument);
}

TEST_CASE("weighted running average over a forced history") {
  const KernelSpec box = kernel_by_name("box", 1);
  SUBCASE("constant weights, vector history") {
    auto s = make_regression_tracker(
        vec({0.0}), vec({0.0, 0.0}),
        RegressionConstraint::box(vec({0.0, 0.0}), vec({0.0, 0.0})), box,
        const_sched(0.5, 1.0));
    const RegressionPair batch[] = {pair1(0.0, 0.0)};
    // Pinning lo = hi forces z^1 = (0,0), then z^2 = (1,1).
    RegressionPair p2;
    p2.x = vec({0.0});
    p2.y = vec({0.0, 0.0});
    const RegressionPair b2[] = {p2};
    s = sqg_regression_step(std::move(s), std::span<const RegressionPair>(b2));
    s.constraint = RegressionConstraint::box(vec({1.0, 1.0}), vec({1.0, 1.0}));
    s = sqg_regression_step(std::move(s), std::span<const RegressionPair>(b2));
    const Eigen::VectorXd c = cesaro_regression(s);
    CHECK(c[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(c[1] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("single step returns that step's value") {
    auto s = make_regression_tracker(
        vec({0.0}), vec({0.7}),
        RegressionConstraint::box(vec({0.7}), vec({0.7})), box,
        const_sched(0.25, 1.0));
    const RegressionPair batch[] = {pair1(0.0, 0.7)};
    s = sqg_regression_step(std::move(s),
                            std::span<const RegressionPair>(batch));
    CHECK(cesaro_regression(s)[0] == doctest::Approx(0.7).epsilon(1e-15));
  }
  SUBCASE("weights 1, 1/2 over history 0, 0.6") {
    ScheduleSpec sched;
    sched.rho_rule = SequenceRule::power(1.0, 1.0);
    sched.theta_rule = SequenceRule::constant(1.0);
    auto s = make_regression_tracker(
        vec({0.0}), vec({0.0}),
        RegressionConstraint::box(vec({0.0}), vec({0.0})), box, sched);
    const RegressionPair batch[] = {pair1(0.0, 0.0)};
    s = sqg_regression_step(std::move(s),
                            std::span<const RegressionPair>(batch));
    s.constraint = RegressionConstraint::box(vec({0.6}), vec({0.6}));
    s = sqg_regression_step(std::move(s),
                            std::span<const RegressionPair>(batch));
    CHECK(cesaro_regression(s)[0] == doctest::Approx(0.2).epsilon(1e-15));
  }
  SUBCASE("requires at least one step") {
    const auto s = make_regression_tracker(
        vec({0.0}), vec({0.0}),
        RegressionConstraint::box(vec({-1.0}), vec({1.0})), box,
        const_sched(0.1, 1.0));
    CHECK_THROWS_AS(cesaro_regression(s), std::logic_error);
  }
}

TEST_CASE("kernel-weighted mean worked examples") {
  const KernelSpec box = kernel_by_name("box", 1);
  {
    const std::vector<RegressionPair> pairs{pair1(0.0, 1.0), pair1(0.4, 3.0)};
    const auto nw = nadaraya_watson(pairs, vec({0.0}), 1.0, box);
    REQUIRE(nw.has_value());
    CHECK((*nw)[0] == doctest::Approx(2.0).epsilon(1e-15));
  }
  {
    const std::vector<RegressionPair> pairs{pair1(0.0, 5.0)};
    const auto nw = nadaraya_watson(pairs, vec({0.0}), 1.0, box);
    REQUIRE(nw.has_value());
    CHECK((*nw)[0] == 5.0);
  }
  {
    const std::vector<RegressionPair> pairs{pair1(10.0, 1.0), pair1(20.0, 2.0)};
    CHECK(!nadaraya_watson(pairs, vec({0.0}), 1.0, box).has_value());
  }
  CHECK_THROWS_AS(
      nadaraya_watson(std::span<const RegressionPair>(), vec({0.0}), 1.0, box),
      std::invalid_argument);
}

TEST_CASE("weighted least-squares objective worked examples") {
  const KernelSpec box = kernel_by_name("box", 1);
  {
    const std::vector<RegressionPair> pairs{pair1(0.0, 1.0)};
    CHECK(empirical_objective(pairs, vec({0.0}), 1.0, box, vec({3.0})) ==
          doctest::Approx(2.0).epsilon(1e-15));
  }
  {
    // Only one pair has kernel mass; z equal to its output gives 0.
    const std::vector<RegressionPair> pairs{pair1(0.0, 1.5), pair1(9.0, 7.0)};
    CHECK(empirical_objective(pairs, vec({0.0}), 1.0, box, vec({1.5})) == 0.0);
  }
}

TEST_CASE("kernel-weighted mean minimizes the empirical objective") {
  const KernelSpec gauss = kernel_by_name("gaussian", 1);
  CounterRng rng(1001);
  for (int it = 0; it < 200; ++it) {
    const int n = 3 + static_cast<int>(rng.uniform() * 8.0);
    std::vector<RegressionPair> pairs;
    for (int i = 0; i < n; ++i) {
      pairs.push_back(
          pair1(2.0 * rng.uniform() - 1.0, 4.0 * rng.uniform() - 2.0));
    }
    const Eigen::VectorXd x = vec({0.5 * rng.uniform() - 0.25});
    const double theta = 0.3 + rng.uniform();
    const auto nw = nadaraya_watson(pairs, x, theta, gauss);
    REQUIRE(nw.has_value());
    // Independent closed form: kernel-weighted mean of the outputs.
    double num = 0.0, den = 0.0;
    for (const auto& p : pairs) {
      const double k = evaluate(gauss, (p.x[0] - x[0]) / theta);
      num += k * p.y[0];
      den += k;
    }
    CHECK(std::abs((*nw)[0] - num / den) <= 1e-12 * std::max(1.0, std::abs(num / den)));
    // First-order optimality: the objective is a parabola with vertex at nw.
    const double f0 = empirical_objective(pairs, x, theta, gauss, *nw);
    for (double h : {1e-3, -1e-3}) {
      CHECK(empirical_objective(pairs, x, theta, gauss,
                                vec({(*nw)[0] + h})) >= f0 - 1e-15);
    }
  }
}

TEST_CASE("stochastic gradient is unbiased for the smoothed objective") {
  const RegressionScenario sc = RegressionScenario::sine(1.0, 2.0, 0.5);
  const KernelSpec epan = kernel_by_name("epanechnikov", 1);
  const Eigen::VectorXd x = vec({0.2});
  const double theta = 0.3, z = 0.4;
  // Quadrature gradient of the smoothed objective:
  //   int K_theta(xb - x) g1(xb) (z - m(xb)) dxb.
  const double target = quad::integrate(
      [&](double xb) {
        return scaled_evaluate(epan, xb, x[0], theta) * sc.input_density(xb) *
               (z - sc.regression_truth(0, xb)[0]);
      },
      std::max(-1.0, x[0] - theta), std::min(1.0, x[0] + theta), 1e-11);
  CounterRng rng(9);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const RegressionPair p = sc.sample_pair(0, rng);
    const double k = scaled_evaluate(epan, p.x[0], x[0], theta);
    const double xi = k * (z - p.y[0]);
    sum += xi;
    sumsq += xi * xi;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean - target) <= 4.0 * std::sqrt(var / n));
}

TEST_CASE("expected objective is minimized at the regression curve") {
  const RegressionScenario sc = RegressionScenario::sine(1.0, 2.0, 0.5);
  for (double x : {-0.6, 0.3, 0.5}) {
    // The objective is quadratic in z; recover the vertex from three values.
    const double fm = objective_exact(sc, 0, x, -1.0);
    const double f0 = objective_exact(sc, 0, x, 0.0);
    const double fp = objective_exact(sc, 0, x, 1.0);
    const double vertex = (fm - fp) / (2.0 * (fp + fm - 2.0 * f0));
    CHECK(std::abs(vertex - sc.regression_truth(0, x)[0]) <= 1e-6);
  }
}

TEST_CASE("smoothed objective converges uniformly as the window shrinks") {
  const RegressionScenario sc = RegressionScenario::sine(1.0, 2.0, 0.5);
  const KernelSpec epan = kernel_by_name("epanechnikov", 1);
  const double x = 0.2;
  double prev = std::numeric_limits<double>::infinity();
  for (double theta : {0.5, 0.2, 0.1, 0.05}) {
    double worst = 0.0;
    for (int i = 0; i <= 8; ++i) {
      const double z = -1.5 + 3.0 * i / 8.0;
      worst = std::max(worst,
                       std::abs(objective_smoothed(sc, 0, x, z, theta, epan) -
                                objective_exact(sc, 0, x, z)));
    }
    CHECK(worst < prev);
    prev = worst;
  }
}

TEST_CASE("smoothed objective error obeys the certified envelope") {
  const RegressionScenario sc = RegressionScenario::sine(1.0, 2.0, 0.5);
  const KernelSpec epan = kernel_by_name("epanechnikov", 1);
  const auto certs = sc.holder_certificates(0);
  const double A = width_characteristic(epan, certs.nu);
  const double x = 0.2;
  for (double theta : {0.5, 0.2, 0.1, 0.05}) {
    for (double z : {-1.5, -0.5, 0.0, 0.7, 1.5}) {
      const double lhs = std::abs(objective_smoothed(sc, 0, x, z, theta, epan) -
                                  objective_exact(sc, 0, x, z));
      const double rhs =
          A * (z * z * certs.B + certs.C) * std::pow(theta, certs.nu);
      CHECK_MESSAGE(lhs <= rhs + 1e-9, "theta=" << theta << " z=" << z);
    }
  }
}

TEST_CASE("estimates stay inside the constraint set") {
  const RegressionScenario sc = RegressionScenario::sincos(0.8, 2.0, 0.4);
  const KernelSpec gauss = kernel_by_name("gaussian", 1);
  const auto c = sc.default_constraint(1);
  auto s = make_regression_tracker(vec({0.3}), Eigen::VectorXd::Zero(2), c,
                                   gauss, const_sched(0.4, 0.3));
  CounterRng rng(14);
  for (long t = 0; t < 1000; ++t) {
    const RegressionPair p = sc.sample_pair(t, rng);
    const RegressionPair batch[] = {p};
    s = sqg_regression_step(std::move(s),
                            std::span<const RegressionPair>(batch));
    CHECK((s.z - c.center).norm() <= c.radius + 1e-12);
  }
}
