#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "driftkde/regression_tracker.hpp"
#include "driftkde/rng.hpp"

namespace driftkde {

/// Per-step motion of the scenario parameters.
struct DriftRule {
  enum class Kind { None, Linear, Sine };
  Kind kind = Kind::None;
  double rate = 0.0;   // linear: offset(t) = rate * t
  double amp = 0.0;    // sine: offset(t) = amp * sin(omega * t)
  double omega = 0.0;

  static DriftRule none() { return {}; }
  static DriftRule linear(double rate) {
    return {Kind::Linear, rate, 0.0, 0.0};
  }
  static DriftRule sine(double amp, double omega) {
    return {Kind::Sine, 0.0, amp, omega};
  }

  double offset(long t) const {
    switch (kind) {
      case Kind::None:
        return 0.0;
      case Kind::Linear:
        return rate * static_cast<double>(t);
      case Kind::Sine:
        return amp * std::sin(omega * static_cast<double>(t));
    }
    return 0.0;
  }

  /// Upper bound on |offset(t+1) - offset(t)|.
  double per_step_cap() const {
    switch (kind) {
      case Kind::None:
        return 0.0;
      case Kind::Linear:
        return std::abs(rate);
      case Kind::Sine:
        return std::abs(amp) * std::min(2.0, std::abs(omega));
    }
    return 0.0;
  }

  /// Range of offsets over all t.
  std::pair<double, double> offset_range(long horizon) const {
    switch (kind) {
      case Kind::None:
        return {0.0, 0.0};
      case Kind::Linear: {
        const double end = rate * static_cast<double>(horizon);
        return {std::min(0.0, end), std::max(0.0, end)};
      }
      case Kind::Sine:
        return {-std::abs(amp), std::abs(amp)};
    }
    return {0.0, 0.0};
  }
};

/// Ground-truth density family g^t on R with exact evaluation, exact
/// sampling and certified constants. Immutable after construction; the
/// constructor cross-checks every analytic certificate on a dense grid.
class DensityScenario {
 public:
  enum class Family { Uniform, Triangular, GaussianMixture };

  struct GaussComponent {
    double weight, mu, sigma;
  };

  static DensityScenario uniform(double a, double b) {
    DensityScenario s;
    s.family_ = Family::Uniform;
    s.a_ = a;
    s.b_ = b;
    if (!(a < b)) throw std::invalid_argument("uniform: requires a < b");
    s.gbar_ = 1.0 / (b - a);
    s.has_holder_ = false;  // jump discontinuities at the endpoints
    s.name_ = "uniform";
    s.validate();
    return s;
  }

  static DensityScenario triangular(double a, double c, double b) {
    DensityScenario s;
    s.family_ = Family::Triangular;
    s.a_ = a;
    s.c_ = c;
    s.b_ = b;
    if (!(a < c && c < b)) {
      throw std::invalid_argument("triangular: requires a < c < b");
    }
    s.gbar_ = 2.0 / (b - a);
    s.has_holder_ = true;
    s.nu_ = 1.0;
    s.H_ = s.gbar_ * std::max(1.0 / (c - a), 1.0 / (b - c));
    s.name_ = "triangular";
    s.validate();
    return s;
  }

  static DensityScenario gaussian(double mu, double sigma,
                                  DriftRule drift = DriftRule::none()) {
    return mixture({{1.0, mu, sigma}}, drift, "normal");
  }

  static DensityScenario mixture(std::vector<GaussComponent> comps,
                                 DriftRule drift = DriftRule::none(),
                                 std::string name = "normal-mixture") {
    DensityScenario s;
    s.family_ = Family::GaussianMixture;
    s.comps_ = std::move(comps);
    s.drift_ = drift;
    double wsum = 0.0;
    s.gbar_ = 0.0;
    s.H_ = 0.0;
    for (const auto& c : s.comps_) {
      if (!(c.weight > 0.0 && c.sigma > 0.0)) {
        throw std::invalid_argument("mixture: weights and sigmas must be > 0");
      }
      wsum += c.weight;
      s.gbar_ += c.weight / (c.sigma * std::sqrt(2.0 * M_PI));
      // sup |d/dx phi((x-mu)/sigma)/sigma| = 1/(sigma^2 sqrt(2 pi e))
      s.H_ += c.weight / (c.sigma * c.sigma * std::sqrt(2.0 * M_PI * M_E));
    }
    if (std::abs(wsum - 1.0) > 1e-12) {
      throw std::invalid_argument("mixture: weights must sum to 1");
    }
    s.has_holder_ = true;
    s.nu_ = 1.0;
    s.name_ = std::move(name);
    s.validate();
    return s;
  }

  const std::string& name() const { return name_; }
  Family family() const { return family_; }
  bool drifting() const { return drift_.kind != DriftRule::Kind::None; }

  /// Exact g^t(x).
  double density_at(long t, double x) const {
    switch (family_) {
      case Family::Uniform:
        return (x >= a_ && x <= b_) ? 1.0 / (b_ - a_) : 0.0;
      case Family::Triangular:
        if (x <= a_ || x >= b_) return 0.0;
        if (x <= c_) return 2.0 * (x - a_) / ((b_ - a_) * (c_ - a_));
        return 2.0 * (b_ - x) / ((b_ - a_) * (b_ - c_));
      case Family::GaussianMixture: {
        const double shift = drift_.offset(t);
        double g = 0.0;
        for (const auto& c : comps_) {
          const double u = (x - c.mu - shift) / c.sigma;
          g += c.weight * std::exp(-0.5 * u * u) /
               (c.sigma * std::sqrt(2.0 * M_PI));
        }
        return g;
      }
    }
    return 0.0;
  }

  /// Exact draw from g^t; deterministic given the generator state.
  double sample(long t, CounterRng& rng) const {
    switch (family_) {
      case Family::Uniform:
        return a_ + (b_ - a_) * rng.uniform();
      case Family::Triangular: {
        const double u = rng.uniform();
        const double fc = (c_ - a_) / (b_ - a_);
        if (u < fc) return a_ + std::sqrt(u * (b_ - a_) * (c_ - a_));
        return b_ - std::sqrt((1.0 - u) * (b_ - a_) * (b_ - c_));
      }
      case Family::GaussianMixture: {
        const double shift = drift_.offset(t);
        double u = rng.uniform();
        std::size_t i = 0;
        while (i + 1 < comps_.size() && u >= comps_[i].weight) {
          u -= comps_[i].weight;
          ++i;
        }
        return comps_[i].mu + shift + comps_[i].sigma * rng.normal();
      }
    }
    return 0.0;
  }

  /// Validated upper bound on sup_x |g^{t+1}(x) - g^t(x)|.
  double certify_drift(long t) const {
    if (family_ != Family::GaussianMixture) return 0.0;
    const double shift =
        std::abs(drift_.offset(t + 1) - drift_.offset(t));
    return shift * H_;
  }

  /// sup over t of certify_drift.
  double drift_cap() const {
    if (family_ != Family::GaussianMixture) return 0.0;
    return drift_.per_step_cap() * H_;
  }

  double gbar() const { return gbar_; }
  bool holder_available() const { return has_holder_; }
  double holder_H() const {
    if (!has_holder_) {
      throw std::logic_error("scenario has no Holder certificate");
    }
    return H_;
  }
  double holder_nu() const { return nu_; }

  /// Effective support of g^t (tails below 1e-14 for gaussians).
  double support_lo(long t) const {
    if (family_ != Family::GaussianMixture) return a_;
    double lo = std::numeric_limits<double>::infinity();
    const double shift = drift_.offset(t);
    for (const auto& c : comps_) {
      lo = std::min(lo, c.mu + shift - 8.0 * c.sigma);
    }
    return lo;
  }
  double support_hi(long t) const {
    if (family_ != Family::GaussianMixture) return b_;
    double hi = -std::numeric_limits<double>::infinity();
    const double shift = drift_.offset(t);
    for (const auto& c : comps_) {
      hi = std::max(hi, c.mu + shift + 8.0 * c.sigma);
    }
    return hi;
  }

 private:
  void validate() const {
    // Certificates are caps; cross-check them against dense-grid maxima.
    const int n = 10001;
    const double lo = support_lo(0), hi = support_hi(1);
    double gmax = 0.0, dmax = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = lo + (hi - lo) * i / (n - 1);
      const double g0 = density_at(0, x);
      gmax = std::max(gmax, g0);
      if (drifting()) dmax = std::max(dmax, std::abs(density_at(1, x) - g0));
    }
    if (gmax > gbar_ * (1.0 + 1e-9)) {
      throw std::logic_error("scenario certificate violated: grid max of g "
                             "exceeds the certified gbar");
    }
    if (drifting() && dmax > certify_drift(0) * (1.0 + 1e-9)) {
      throw std::logic_error("scenario certificate violated: grid drift "
                             "exceeds the certified per-step cap");
    }
    if (has_holder_) {
      // Eq.-style Holder check on grid pairs.
      const int pairs = 200;
      for (int i = 0; i < pairs; ++i) {
        const double x = lo + (hi - lo) * (i + 0.31) / pairs;
        const double y = lo + (hi - lo) * ((i * 37) % pairs + 0.71) / pairs;
        const double lhs = std::abs(density_at(0, x) - density_at(0, y));
        if (lhs > H_ * std::pow(std::abs(x - y), nu_) * (1.0 + 1e-9) + 1e-15) {
          throw std::logic_error("scenario certificate violated: Holder "
                                 "constant too small on grid pair");
        }
      }
    }
  }

  Family family_ = Family::Uniform;
  double a_ = 0.0, b_ = 1.0, c_ = 0.5;
  std::vector<GaussComponent> comps_;
  DriftRule drift_;
  double gbar_ = 1.0;
  bool has_holder_ = false;
  double H_ = 0.0;
  double nu_ = 1.0;
  std::string name_;
};

/// Joint input-output family g^t(x, y) = g1(x) n(y - m_t(x)) with triangular
/// input density on [-1, 1], independent per-component triangular noise of
/// half-width noise_amp, and a closed-form regression curve m_t(x). The
/// drift rule moves the curve amplitude.
class RegressionScenario {
 public:
  enum class Curve { Linear, Sine, SinCos };

  static RegressionScenario make(Curve curve, double amp0, double freq,
                                 double noise_amp,
                                 DriftRule drift = DriftRule::none(),
                                 std::string name = "regression") {
    RegressionScenario s;
    s.curve_ = curve;
    s.amp0_ = amp0;
    s.freq_ = freq;
    s.noise_amp_ = noise_amp;
    s.drift_ = drift;
    s.name_ = std::move(name);
    if (!(noise_amp > 0.0)) {
      throw std::invalid_argument("noise amplitude must be > 0");
    }
    s.validate_conditional_mean();
    return s;
  }

  static RegressionScenario linear(double slope, double noise_amp,
                                   DriftRule drift = DriftRule::none()) {
    return make(Curve::Linear, slope, 0.0, noise_amp, drift,
                "regression-linear");
  }
  static RegressionScenario sine(double amp, double freq, double noise_amp,
                                 DriftRule drift = DriftRule::none()) {
    return make(Curve::Sine, amp, freq, noise_amp, drift, "regression-sine");
  }
  static RegressionScenario sincos(double amp, double freq, double noise_amp,
                                   DriftRule drift = DriftRule::none()) {
    return make(Curve::SinCos, amp, freq, noise_amp, drift,
                "regression-sincos");
  }

  const std::string& name() const { return name_; }
  int output_dim() const { return curve_ == Curve::SinCos ? 2 : 1; }
  bool drifting() const { return drift_.kind != DriftRule::Kind::None; }
  double noise_amp() const { return noise_amp_; }

  double amplitude(long t) const { return amp0_ + drift_.offset(t); }

  /// Closed-form y^t(x), the conditional mean of the sampler.
  Eigen::VectorXd regression_truth(long t, double x) const {
    const double a = amplitude(t);
    Eigen::VectorXd y(output_dim());
    switch (curve_) {
      case Curve::Linear:
        y[0] = a * x;
        break;
      case Curve::Sine:
        y[0] = a * std::sin(freq_ * x);
        break;
      case Curve::SinCos:
        y[0] = a * std::sin(freq_ * x);
        y[1] = a * std::cos(freq_ * x);
        break;
    }
    return y;
  }

  /// Input density g1(x) = 1 - |x| on [-1, 1] (time-invariant).
  double input_density(double x) const {
    return std::abs(x) <= 1.0 ? 1.0 - std::abs(x) : 0.0;
  }
  double input_lo() const { return -1.0; }
  double input_hi() const { return 1.0; }
  double g1_bar() const { return 1.0; }
  double g1_lower_at(double x) const { return input_density(x); }

  /// Triangular noise density of one output component.
  double noise_density(double u) const {
    const double a = noise_amp_;
    return std::abs(u) <= a ? (a - std::abs(u)) / (a * a) : 0.0;
  }

  /// Joint density g^t(x, y).
  double joint_density(long t, double x, const Eigen::VectorXd& y) const {
    double g = input_density(x);
    if (g == 0.0) return 0.0;
    const Eigen::VectorXd m = regression_truth(t, x);
    for (int j = 0; j < m.size(); ++j) g *= noise_density(y[j] - m[j]);
    return g;
  }

  RegressionPair sample_pair(long t, CounterRng& rng) const {
    RegressionPair p;
    p.x.resize(1);
    // triangular(-1, 0, 1) input draw
    const double u = rng.uniform();
    p.x[0] = u < 0.5 ? -1.0 + std::sqrt(2.0 * u) : 1.0 - std::sqrt(2.0 * (1 - u));
    p.y = regression_truth(t, p.x[0]);
    for (int j = 0; j < p.y.size(); ++j) {
      // sum of two uniforms, triangular on [-noise_amp, noise_amp]
      p.y[j] += noise_amp_ * (rng.uniform() + rng.uniform() - 1.0);
    }
    return p;
  }

  /// Max |amplitude| over the run horizon.
  double amp_cap(long horizon = 1) const {
    const auto [lo, hi] = drift_.offset_range(horizon);
    return std::max(std::abs(amp0_ + lo), std::abs(amp0_ + hi));
  }

  /// sup_x ||m_t(x)|| over the input support, any t up to the horizon.
  double curve_norm_cap(long horizon = 1) const {
    const double a = amp_cap(horizon);
    switch (curve_) {
      case Curve::Linear:
        return a;  // |x| <= 1
      case Curve::Sine:
        return a;
      case Curve::SinCos:
        return a * std::sqrt(2.0);
    }
    return a;
  }

  /// sup ||y|| over the support of g^t(x, .), all x (certificate ||Y_x||).
  double yx_norm_cap(long horizon = 1) const {
    return curve_norm_cap(horizon) +
           noise_amp_ * std::sqrt(static_cast<double>(output_dim()));
  }

  /// Cap on the output second moment, integral ||y||^2 g2(y) dy.
  double g2_bar(long horizon = 1) const {
    const double c = curve_norm_cap(horizon);
    return c * c + output_dim() * noise_amp_ * noise_amp_ / 6.0;
  }

  /// Validated cap on ||y^{t+1}(x) - y^t(x)|| over the input support.
  double certify_drift(long /*t*/) const {
    const double da = drift_.per_step_cap();
    switch (curve_) {
      case Curve::Linear:
      case Curve::Sine:
        return da;
      case Curve::SinCos:
        return da * std::sqrt(2.0);
    }
    return da;
  }

  /// A constraint set guaranteed to contain y^t(x) for all t, x.
  RegressionConstraint default_constraint(long horizon = 1) const {
    const double c = curve_norm_cap(horizon) * 1.25 + 0.1;
    if (curve_ == Curve::SinCos) {
      return RegressionConstraint::ball(Eigen::VectorXd::Zero(2), c);
    }
    Eigen::VectorXd lo(1), hi(1);
    lo[0] = -c;
    hi[0] = c;
    return RegressionConstraint::box(lo, hi);
  }

  /// Lipschitz certificates (B, C) of the joint density in x:
  /// L(y) >= sup_x |d g(x, y)/dx|, B = int L, C = int ||y||^2 L, computed by
  /// grid maximization and trapezoid quadrature with a 1.05 safety factor.
  struct HolderCertificates {
    double B, C, nu;
  };
  HolderCertificates holder_certificates(long t = 0) const {
    const int m = output_dim();
    const double span = yx_norm_cap(std::max<long>(t, 1)) + 0.1;
    const int ny = m == 1 ? 801 : 81;
    const int nx = 401;
    const double dx = 1e-5;
    std::vector<double> ygrid(ny);
    for (int i = 0; i < ny; ++i) {
      ygrid[i] = -span + 2.0 * span * i / (ny - 1);
    }
    const double dy = 2.0 * span / (ny - 1);
    double B = 0.0, C = 0.0;
    Eigen::VectorXd y(m);
    const auto accumulate = [&](const Eigen::VectorXd& yv, double cell) {
      double L = 0.0;
      for (int ix = 0; ix < nx; ++ix) {
        const double x = -1.0 + 2.0 * ix / (nx - 1);
        const double d = std::abs(joint_density(t, x + dx, yv) -
                                  joint_density(t, x - dx, yv)) /
                         (2.0 * dx);
        L = std::max(L, d);
      }
      B += L * cell;
      C += L * yv.squaredNorm() * cell;
    };
    if (m == 1) {
      for (int i = 0; i < ny; ++i) {
        y[0] = ygrid[i];
        accumulate(y, dy);
      }
    } else {
      for (int i = 0; i < ny; ++i) {
        for (int j = 0; j < ny; ++j) {
          y[0] = ygrid[i];
          y[1] = ygrid[j];
          accumulate(y, dy * dy);
        }
      }
    }
    return {1.05 * B, 1.05 * C, 1.0};
  }

 private:
  void validate_conditional_mean() const {
    // Monte Carlo check (fixed internal stream): the sampler's conditional
    // mean in a narrow window around x = 0 matches the closed form.
    CounterRng rng(0x5ce9a5105ULL);
    const double w = 0.1;
    const int draws = 200000;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(output_dim());
    Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(output_dim());
    long hits = 0;
    for (int i = 0; i < draws; ++i) {
      const RegressionPair p = sample_pair(0, rng);
      if (std::abs(p.x[0]) <= w) {
        sum += p.y;
        sumsq += p.y.cwiseProduct(p.y);
        ++hits;
      }
    }
    if (hits < 100) {
      throw std::logic_error("conditional-mean validation: no mass near 0");
    }
    // Window-averaged truth: E[m_0(x) | |x| <= w] under g1.
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(output_dim());
    const int nq = 2001;
    double mass = 0.0;
    for (int i = 0; i < nq; ++i) {
      const double x = -w + 2.0 * w * i / (nq - 1);
      const double g = input_density(x);
      truth += g * regression_truth(0, x);
      mass += g;
    }
    truth /= mass;
    for (int j = 0; j < output_dim(); ++j) {
      const double mean = sum[j] / hits;
      const double var =
          std::max(sumsq[j] / hits - mean * mean, 1e-12);
      const double se = std::sqrt(var / hits);
      if (std::abs(mean - truth[j]) > 4.0 * se + 1e-4) {
        throw std::logic_error(
            "scenario certificate violated: sampler conditional mean "
            "disagrees with the closed-form regression curve");
      }
    }
  }

  Curve curve_ = Curve::Linear;
  double amp0_ = 1.0;
  double freq_ = 1.0;
  double noise_amp_ = 0.5;
  DriftRule drift_;
  std::string name_;
};

}  // namespace driftkde
