#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace driftkde {

/// Problem certificates and run parameters feeding the density error bounds.
struct DensityBoundInputs {
  double gbar = 1.0;   // sup of the density class
  double Kbar = 1.0;   // sup of the kernel
  double A = 1.0;      // kernel width characteristic at nu
  double H = 1.0;      // Holder constant
  double nu = 1.0;     // Holder exponent
  int r = 1;           // dimension
  double delta = 0.0;  // per-step drift cap
  double rho = 0.1;    // constant adjustment coefficient
  double theta = 1.0;  // constant window parameter
  long t = 0;          // step count
  double v0 = 0.0;     // initial squared error
};

struct ErrorBound {
  double deterministic = 0.0;
  double variance_cap = 0.0;
};

/// Tracking-error bound for constant rho <= 1/2, theta:
///   4 gbar delta / rho + 2 gbar A H theta^nu + gbar^2 rho
///   + Kbar^2 rho theta^{-2r} + (1-2rho)^t v0,
/// with stochastic variance capped by 2 rho gbar^3 (gbar + Kbar theta^{-r}).
inline ErrorBound theorem1_bound(const DensityBoundInputs& in) {
  if (!(in.rho > 0.0 && in.rho <= 0.5)) {
    throw std::invalid_argument("theorem1_bound requires 0 < rho <= 1/2");
  }
  const double th_mr = std::pow(in.theta, -in.r);
  ErrorBound b;
  b.deterministic = 4.0 * in.gbar * in.delta / in.rho +
                    2.0 * in.gbar * in.A * in.H * std::pow(in.theta, in.nu) +
                    in.gbar * in.gbar * in.rho +
                    in.Kbar * in.Kbar * in.rho * th_mr * th_mr +
                    std::pow(1.0 - 2.0 * in.rho, static_cast<double>(in.t)) *
                        in.v0;
  b.variance_cap = 2.0 * in.rho * std::pow(in.gbar, 3) *
                   (in.gbar + in.Kbar * th_mr);
  return b;
}

/// Rate bound E|z^t - g(x)|^2 <= Q/(1+t)^gamma for the power schedules
/// rho_t = rho/(1+t)^p, theta_t = theta/(1+t)^q.
inline double theorem5_bound(double v0, double rho, double p, double theta,
                             double q, int r, double nu, double A, double H,
                             double gbar, double Kbar, long t) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw std::invalid_argument("theorem5_bound requires 0 < p <= 1");
  }
  if (!(2.0 * rho > p)) {
    throw std::invalid_argument("theorem5_bound requires 2 rho > p");
  }
  const double C =
      std::max({4.0 * A * H * gbar * rho * std::pow(theta, nu),
                2.0 * gbar * gbar * rho * rho,
                2.0 * Kbar * gbar * rho * rho * std::pow(theta, -r)});
  const double gamma = std::min({nu * q, p, p - r * q});
  const double Q = std::max(v0, C / (2.0 * rho - p));
  return Q / std::pow(1.0 + static_cast<double>(t), gamma);
}

struct CesaroBound {
  double initial = 0.0;
  double deterministic = 0.0;
  double variance_cap = 0.0;
};

/// Error components of the Cesaro average under constant rho, theta at the
/// checkpoints t + 1 = k / rho.
inline CesaroBound cesaro_bound(const DensityBoundInputs& in, double k) {
  if (!(k > 0.0)) throw std::invalid_argument("cesaro_bound requires k > 0");
  if (!(in.rho > 0.0 && in.theta > 0.0)) {
    throw std::invalid_argument("cesaro_bound requires rho, theta > 0");
  }
  const double th_mr = std::pow(in.theta, -in.r);
  CesaroBound b;
  b.initial = in.v0 / (2.0 * k);
  b.deterministic = 2.0 * in.gbar * in.A * in.H * std::pow(in.theta, in.nu) +
                    in.gbar * in.gbar * in.rho +
                    in.Kbar * in.Kbar * in.rho * th_mr * th_mr;
  b.variance_cap = std::pow(in.gbar, 3) / k *
                   (in.gbar + in.Kbar * in.Kbar * th_mr);
  return b;
}

/// Certificates of a regression scenario feeding the Theorem 7 evaluator.
struct RegressionBoundInputs {
  double g1_lower = 1.0;   // lower bound on the input density at x
  double g1_bar = 1.0;     // sup of the input density
  double Y_norm = 1.0;     // sup ||y|| over the constraint set Y(x)
  double Yx_norm = 1.0;    // sup ||y|| over the support of g(x, .)
  double A = 1.0;          // kernel width characteristic
  double B = 1.0;          // integral of the Holder constant L(y)
  double C = 1.0;          // integral of ||y||^2 L(y)
  double g3_bar = 1.0;     // second-moment bound of the output marginal
  double Kbar = 1.0;
  double nu = 1.0;
  int r = 1;
  long batch_min = 1;      // min_i N_i
  double delta = 0.0;
  double rho = 0.1;
  double theta = 1.0;
  long t = 0;
  double v0 = 0.0;
};

/// Regression tracking-error bound with
///   Q(x) = max{6 ||Y||, 4 ||Y|| g1_bar, 4 A (B ||Y||^2 + C),
///              2 Kbar^2 (||Y||^2 + ||Y_x||^2)}.
inline ErrorBound theorem7_bound(const RegressionBoundInputs& in) {
  if (!(in.g1_lower > 0.0)) {
    throw std::invalid_argument("theorem7_bound requires g1_lower > 0");
  }
  if (!(in.rho > 0.0 && in.rho <= 1.0 / in.g1_bar)) {
    throw std::invalid_argument("theorem7_bound requires 0 < rho <= 1/g1_bar");
  }
  const double Y2 = in.Y_norm * in.Y_norm;
  const double Q = std::max({6.0 * in.Y_norm, 4.0 * in.Y_norm * in.g1_bar,
                             4.0 * in.A * (in.B * Y2 + in.C),
                             2.0 * in.Kbar * in.Kbar *
                                 (Y2 + in.Yx_norm * in.Yx_norm)});
  const double th_mr = std::pow(in.theta, -in.r);
  ErrorBound b;
  b.deterministic =
      std::pow(1.0 - in.g1_lower * in.rho, static_cast<double>(in.t)) * in.v0 +
      Q / in.g1_lower *
          (in.delta / in.rho + in.delta + std::pow(in.theta, in.nu) +
           in.rho * th_mr * th_mr);
  b.variance_cap = in.rho * th_mr * 16.0 * in.Kbar * Y2 *
                   (Y2 * in.g1_bar + in.g3_bar) /
                   (in.g1_lower * static_cast<double>(in.batch_min));
  return b;
}

// ---------------------------------------------------------------------------
// Verifiers for the recursive number-sequence lemmas. Each simulates the
// equality case of the recursion (the worst case admitted by the hypothesis)
// and checks the claimed closed-form estimate along the whole trace.
// ---------------------------------------------------------------------------

struct LemmaTrace {
  bool pass = true;
  double worst_margin = std::numeric_limits<double>::infinity();  // min(bound - v)
  std::vector<double> v;
  std::vector<double> bound;
};

/// v_{t+1} = (1 - q rho_t) v_t + rho_t alpha_t + rho_t eta_t must stay below
/// v_0 prod(1 - q rho_i) + alpha_cap/q + sum eta_i rho_i prod_{j>i}(1 - q rho_j).
inline LemmaTrace lemma_a1_verify(double v0, double q,
                                  const std::vector<double>& rho,
                                  const std::vector<double>& alpha,
                                  double alpha_cap,
                                  const std::vector<double>& eta,
                                  bool keep_trace = false) {
  const std::size_t T = rho.size();
  if (alpha.size() != T || eta.size() != T) {
    throw std::invalid_argument("lemma_a1_verify: sequence lengths disagree");
  }
  if (!(q > 0.0)) throw std::invalid_argument("lemma_a1_verify: q must be > 0");
  LemmaTrace out;
  double v = v0;
  double decay = 1.0;   // prod (1 - q rho_i)
  double noise = 0.0;   // sum eta_i rho_i prod_{j>i} (1 - q rho_j)
  if (keep_trace) {
    out.v.reserve(T + 1);
    out.bound.reserve(T + 1);
    out.v.push_back(v0);
    out.bound.push_back(v0 + alpha_cap / q);
  }
  for (std::size_t t = 0; t < T; ++t) {
    if (q * rho[t] > 1.0 + 1e-15) {
      throw std::invalid_argument("lemma_a1_verify: q rho_t must be <= 1");
    }
    if (alpha[t] < 0.0 || alpha[t] > alpha_cap + 1e-15) {
      throw std::invalid_argument("lemma_a1_verify: alpha_t out of [0, cap]");
    }
    v = (1.0 - q * rho[t]) * v + rho[t] * alpha[t] + rho[t] * eta[t];
    decay *= 1.0 - q * rho[t];
    noise = noise * (1.0 - q * rho[t]) + eta[t] * rho[t];
    const double bound = v0 * decay + alpha_cap / q + noise;
    out.worst_margin = std::min(out.worst_margin, bound - v);
    if (v > bound + 1e-12) out.pass = false;
    if (keep_trace) {
      out.v.push_back(v);
      out.bound.push_back(bound);
    }
  }
  return out;
}

struct LemmaA2Result {
  bool pass = false;
  double v_final = 0.0;
  double epsilon = 0.0;
};

/// Simulates v_{t+1} = (1 - rho_t) v_t + rho_t alpha_t and checks that v_T
/// fell below a tolerance assembled from the tail of alpha plus the
/// geometric remainder accumulated over the tail of rho.
inline LemmaA2Result lemma_a2_verify(const std::vector<double>& rho,
                                     const std::vector<double>& alpha,
                                     double v0) {
  const std::size_t T = rho.size();
  if (alpha.size() != T || T == 0) {
    throw std::invalid_argument("lemma_a2_verify: bad sequence lengths");
  }
  double v = v0;
  double alpha_max = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    if (!(rho[t] > 0.0 && rho[t] <= 1.0) || alpha[t] < 0.0) {
      throw std::invalid_argument("lemma_a2_verify: rho in (0,1], alpha >= 0");
    }
    v = (1.0 - rho[t]) * v + rho[t] * alpha[t];
    alpha_max = std::max(alpha_max, alpha[t]);
  }
  // Split at sqrt(T): early mass decays through the tail rho-sum, late mass
  // is bounded by the tail sup of alpha.
  const std::size_t split = static_cast<std::size_t>(std::sqrt(double(T)));
  double tail_rho_sum = 0.0, tail_alpha_sup = 0.0;
  for (std::size_t t = split; t < T; ++t) {
    tail_rho_sum += rho[t];
    tail_alpha_sup = std::max(tail_alpha_sup, alpha[t]);
  }
  LemmaA2Result res;
  res.epsilon = std::max(v0, alpha_max) * std::exp(-tail_rho_sum) +
                tail_alpha_sup + 1e-12;
  res.v_final = v;
  res.pass = v <= res.epsilon;
  return res;
}

/// Simulates the equality case of
///   v_{t+1} = (1 - rho/(1+t)^beta) v_t + C/(1+t)^{beta+gamma}
/// and checks v_t <= Q/(1+t)^gamma with Q = max{v0, C/(rho - beta)}.
inline LemmaTrace lemma_a3_verify(double v0, double rho, double beta,
                                  double gamma, double C, long T,
                                  bool keep_trace = false) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("lemma_a3_verify: beta in (0, 1]");
  }
  if (!(gamma > 0.0 && gamma < rho)) {
    throw std::invalid_argument("lemma_a3_verify: requires 0 < gamma < rho");
  }
  if (!(rho > beta)) {
    throw std::invalid_argument("lemma_a3_verify: requires rho > beta");
  }
  if (!(C > 0.0) || v0 < 0.0) {
    throw std::invalid_argument("lemma_a3_verify: C > 0, v0 >= 0");
  }
  const double Q = std::max(v0, C / (rho - beta));
  LemmaTrace out;
  double v = v0;
  for (long t = 0; t <= T; ++t) {
    const double bound = Q / std::pow(1.0 + double(t), gamma);
    out.worst_margin = std::min(out.worst_margin, bound - v);
    if (v > bound + 1e-12) out.pass = false;
    if (keep_trace) {
      out.v.push_back(v);
      out.bound.push_back(bound);
    }
    v = (1.0 - rho / std::pow(1.0 + double(t), beta)) * v +
        C / std::pow(1.0 + double(t), beta + gamma);
  }
  return out;
}

/// Numerical diagnostics of the Lemma A4 hypotheses on a recorded run
/// decomposed as v_{t+1} <= v_t - rho_t w_t + gamma_t.
struct LemmaA4Report {
  double rho_sum = 0.0;
  double rho_tail_sum = 0.0;       // sum over the second half
  double rho_final = 0.0;
  double gamma_sum = 0.0;
  double gamma_tail_sum = 0.0;
  double v_final = 0.0;
  bool rho_tends_to_zero = false;  // condition (ii), first part
  bool rho_sum_diverges = false;   // condition (ii), second part
  bool gamma_summable = false;     // condition (iii)
};

inline LemmaA4Report lemma_a4_conditions_check(
    const std::vector<double>& v, const std::vector<double>& rho,
    const std::vector<double>& gamma) {
  const std::size_t T = rho.size();
  if (v.size() != T + 1 || gamma.size() != T || T < 4) {
    throw std::invalid_argument(
        "lemma_a4_conditions_check: malformed trace (need |v| = T+1, "
        "|rho| = |gamma| = T >= 4)");
  }
  LemmaA4Report rep;
  double rho_max = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    rep.rho_sum += rho[t];
    rep.gamma_sum += gamma[t];
    if (t >= T / 2) {
      rep.rho_tail_sum += rho[t];
      rep.gamma_tail_sum += std::abs(gamma[t]);
    }
    rho_max = std::max(rho_max, rho[t]);
  }
  rep.rho_final = rho[T - 1];
  rep.v_final = v[T];
  rep.rho_tends_to_zero = rep.rho_final <= 0.05 * rho_max + 1e-300;
  // Divergent series keep a non-vanishing share of their mass in the tail.
  rep.rho_sum_diverges = rep.rho_tail_sum >= 0.02 * rep.rho_sum;
  rep.gamma_summable =
      rep.gamma_tail_sum <= 0.25 * std::abs(rep.gamma_sum) + 1e-12;
  return rep;
}

}  // namespace driftkde
