#include <cmath>
#include <memory>
#include <stdexcept>

#include <doctest.h>

#include "driftkde/schedules.hpp"

using namespace driftkde;

TEST_CASE("sequence rules evaluate per the power law") {
  ScheduleSpec s;
  s.rho_rule = SequenceRule::constant(0.1);
  CHECK(rho_at(s, 57) == 0.1);
  s.rho_rule = SequenceRule::power(1.0, 1.0);
  CHECK(rho_at(s, 3) == doctest::Approx(0.25));
  s.rho_rule = SequenceRule::power(2.0, 0.5);
  CHECK(rho_at(s, 3) == doctest::Approx(1.0));

  s.theta_rule = SequenceRule::constant(0.5);
  CHECK(theta_at(s, 0) == 0.5);
  s.theta_rule = SequenceRule::power(1.0, 0.5);
  CHECK(theta_at(s, 3) == doctest::Approx(0.5));
  s.theta_rule = SequenceRule::power(1.0, 0.0);
  CHECK(theta_at(s, 1000000) == 1.0);
}

TEST_CASE("sequence rule validation") {
  CHECK_THROWS_AS(SequenceRule::constant(0.0), std::invalid_argument);
  CHECK_THROWS_AS(SequenceRule::power(-1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(SequenceRule::power(1.0, -0.1), std::invalid_argument);
}

TEST_CASE("power rules are positive and non-increasing") {
  const SequenceRule r = SequenceRule::power(0.7, 0.4);
  double prev = std::numeric_limits<double>::infinity();
  for (long t = 0; t < 1000; ++t) {
    const double v = r.at(t);
    CHECK(v > 0.0);
    CHECK(v <= prev);
    prev = v;
  }
}

TEST_CASE("optimal drift exponents") {
  {
    const auto [a, b] = optimal_drift_exponents(1, 1.0);
    CHECK(a == doctest::Approx(0.75));
    CHECK(b == doctest::Approx(0.25));
  }
  {
    const auto [a, b] = optimal_drift_exponents(2, 1.0);
    CHECK(a == doctest::Approx(5.0 / 6.0));
    CHECK(b == doctest::Approx(1.0 / 6.0));
  }
  {
    const auto [a, b] = optimal_drift_exponents(1, 0.5);
    CHECK(a == doctest::Approx(5.0 / 6.0));
    CHECK(b == doctest::Approx(1.0 / 3.0));
  }
  // 0 < beta* < alpha* < 1 across the admissible range.
  for (int r = 1; r <= 4; ++r) {
    for (double nu : {0.1, 0.25, 0.5, 0.75, 1.0}) {
      const auto [a, b] = optimal_drift_exponents(r, nu);
      CHECK(0.0 < b);
      CHECK(b < a);
      CHECK(a < 1.0);
    }
  }
  CHECK_THROWS_AS(optimal_drift_exponents(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(optimal_drift_exponents(1, 0.0), std::invalid_argument);
}

TEST_CASE("optimal stationary exponents") {
  {
    const auto e = optimal_stationary_exponents(1, 1.0);
    CHECK(e.p == 1.0);
    CHECK(e.q == doctest::Approx(0.5));
    CHECK(e.gamma == doctest::Approx(0.5));
  }
  {
    const auto e = optimal_stationary_exponents(2, 1.0);
    CHECK(e.p == 1.0);
    CHECK(e.q == doctest::Approx(1.0 / 3.0));
    CHECK(e.gamma == doctest::Approx(1.0 / 3.0));
  }
  {
    const auto e = optimal_stationary_exponents(1, 0.5);
    CHECK(e.p == 1.0);
    CHECK(e.q == doctest::Approx(2.0 / 3.0));
    CHECK(e.gamma == doctest::Approx(1.0 / 3.0));
  }
}

TEST_CASE("rate exponent formula") {
  CHECK(theorem5_gamma(1.0, 0.5, 1, 1.0) == doctest::Approx(0.5));
  CHECK(theorem5_gamma(1.0, 0.0, 3, 0.7) == 0.0);
  CHECK(theorem5_gamma(0.8, 0.3, 2, 1.0) == doctest::Approx(0.2));
  CHECK_THROWS_AS(theorem5_gamma(0.0, 0.5, 1, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(theorem5_gamma(1.0, -0.1, 1, 1.0), std::invalid_argument);
}

TEST_CASE("stationary exponents attain the maximal rate exponent") {
  for (int r : {1, 2, 3}) {
    for (double nu : {0.25, 0.5, 1.0}) {
      const auto e = optimal_stationary_exponents(r, nu);
      CHECK(theorem5_gamma(e.p, e.q, r, nu) == doctest::Approx(e.gamma));
      // Independent oracle: grid search over (p, q) never beats gamma*.
      double best = 0.0;
      for (int i = 1; i <= 100; ++i) {
        const double p = i / 100.0;
        for (int j = 0; j <= 400; ++j) {
          const double q = j / 400.0;
          best = std::max(best, theorem5_gamma(p, q, r, nu));
        }
      }
      CHECK(best <= e.gamma + 1e-9);
    }
  }
}

TEST_CASE("p = 1 power rule has divergent partial sums") {
  const SequenceRule r = SequenceRule::power(0.6, 1.0);
  const long T = 100000;
  double sum = 0.0;
  for (long t = 0; t < T; ++t) sum += r.at(t);
  CHECK(sum >= 0.6 * std::log(1.0 + T));
}

TEST_CASE("rule parsing and round trip") {
  const SequenceRule c = parse_rule("const:0.125");
  CHECK(c.kind == SequenceRule::Kind::Constant);
  CHECK(c.coeff == doctest::Approx(0.125));
  const SequenceRule p = parse_rule("pow:1.5,0.5");
  CHECK(p.kind == SequenceRule::Kind::Power);
  CHECK(p.coeff == doctest::Approx(1.5));
  CHECK(p.exponent == doctest::Approx(0.5));

  for (const char* text : {"const:0.1", "pow:2,1", "pow:0.75,0.333"}) {
    const SequenceRule r1 = parse_rule(text);
    const SequenceRule r2 = parse_rule(rule_to_string(r1));
    CHECK(r1.kind == r2.kind);
    CHECK(r1.coeff == doctest::Approx(r2.coeff));
    CHECK(r1.exponent == doctest::Approx(r2.exponent));
  }

  CHECK_THROWS_AS(parse_rule("0.1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rule("linear:0.1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rule("pow:1"), std::invalid_argument);
  CHECK_THROWS_AS(parse_rule("const:x"), std::invalid_argument);
}

TEST_CASE("drift overlay lifts the base rules") {
  ScheduleSpec s;
  s.rho_rule = SequenceRule::power(1.0, 1.0);
  s.theta_rule = SequenceRule::power(1.0, 0.5);
  auto overlay = std::make_shared<ScheduleSpec::DriftOverlay>();
  overlay->delta = [](long) { return 1e-4; };
  overlay->alpha = 0.75;
  overlay->beta = 0.25;
  overlay->r = 1;
  s.drift = overlay;
  const double rho_floor = std::pow(1e-4, 0.75);
  const double theta_floor = std::pow(1e-4, 0.25);
  // Early on the base rule dominates; eventually the drift floor holds.
  CHECK(rho_at(s, 0) == doctest::Approx(1.0));
  CHECK(theta_at(s, 0) == doctest::Approx(1.0));
  CHECK(rho_at(s, 10000000) == doctest::Approx(rho_floor));
  CHECK(theta_at(s, 10000000) == doctest::Approx(theta_floor));
  for (long t : {0L, 10L, 1000L, 100000L}) {
    CHECK(rho_at(s, t) >= rho_floor - 1e-15);
    CHECK(theta_at(s, t) >= theta_floor - 1e-15);
  }
}
