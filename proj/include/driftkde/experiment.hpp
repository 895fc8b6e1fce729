#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "driftkde/bounds.hpp"
#include "driftkde/config.hpp"
#include "driftkde/csv.hpp"
#include "driftkde/density_tracker.hpp"
#include "driftkde/grid_tracker.hpp"
#include "driftkde/kernels.hpp"
#include "driftkde/regression_tracker.hpp"
#include "driftkde/rng.hpp"
#include "driftkde/scenarios.hpp"
#include "driftkde/schedules.hpp"

namespace driftkde {

enum class ExperimentMode {
  TrackDensity,
  TrackRegression,
  TrackGrid,
  RateFit,
  DriftSweep,
  CesaroCompare,
  VerifyLemmas,
};

inline ExperimentMode mode_by_name(const std::string& name) {
  if (name == "track-density") return ExperimentMode::TrackDensity;
  if (name == "track-regression") return ExperimentMode::TrackRegression;
  if (name == "track-grid") return ExperimentMode::TrackGrid;
  if (name == "rate-fit") return ExperimentMode::RateFit;
  if (name == "drift-sweep") return ExperimentMode::DriftSweep;
  if (name == "cesaro-compare") return ExperimentMode::CesaroCompare;
  if (name == "verify-lemmas") return ExperimentMode::VerifyLemmas;
  throw ConfigError("unknown mode `" + name + "`");
}

/// Fully resolved experiment description. Built from a Config by
/// parse_experiment_config; every config key is listed in the README.
struct ExperimentConfig {
  ExperimentMode mode = ExperimentMode::TrackDensity;
  std::string mode_name = "track-density";
  std::string scenario_name = "stationary-normal";
  double drift = 0.0;                 // certified per-step drift cap
  std::string drift_style;            // empty = mode default (sweep: sine,
                                      // everything else: linear)
  std::string kernel_name = "gaussian";
  std::string rho_text, theta_text;   // empty when `auto` is used
  std::string auto_text;              // "stationary" or "drift:<delta>"
  double rho_scale = 0.75, theta_scale = 0.75;  // coefficients for auto rules
  std::vector<double> query{0.0};
  long steps = 0;                     // 0 = mode-dependent default
  long replicas = 1;
  long batch = 1;
  std::uint64_t seed = 1;
  std::string out_dir = ".";          // empty = do not write files
  double z0 = 0.0;
  double z_lo = 0.0;
  double z_hi = std::numeric_limits<double>::quiet_NaN();  // NaN = scenario cap
  double window_lo = 100.0;           // rate-fit window in t
  double window_hi = std::numeric_limits<double>::infinity();
  std::vector<double> deltas;         // drift-sweep
  double burn_in_factor = 5.0;        // burn-in = ceil(factor / rho)
  std::vector<double> cesaro_ks{1, 2, 4, 8, 16};
  double grid_a = -4.0, grid_b = 4.0;
  long grid_m = 64;
  bool normalized = true;
  std::string constraint_text = "auto";
  std::vector<std::pair<std::string, std::string>> echo;  // raw config items
};

inline ExperimentConfig parse_experiment_config(Config& cfg) {
  ExperimentConfig e;
  e.echo = cfg.items();
  e.mode_name = cfg.get_string("mode");
  e.mode = mode_by_name(e.mode_name);
  e.scenario_name = cfg.get_string("scenario", e.scenario_name);
  e.drift = cfg.get_double("drift", 0.0);
  e.drift_style = cfg.get_string("drift_style", "");
  e.kernel_name = cfg.get_string("kernel", "gaussian");
  if (cfg.has("auto")) {
    e.auto_text = cfg.get_string("auto");
    if (cfg.has("rho") || cfg.has("theta")) {
      throw ConfigError("`auto` conflicts with explicit `rho`/`theta` keys");
    }
  } else {
    e.rho_text = cfg.get_string("rho", "");
    e.theta_text = cfg.get_string("theta", "");
  }
  e.rho_scale = cfg.get_double("rho_scale", e.rho_scale);
  e.theta_scale = cfg.get_double("theta_scale", e.theta_scale);
  if (cfg.has("query")) e.query = cfg.get_double_list("query");
  e.steps = cfg.get_long("steps", 0);
  e.replicas = cfg.get_long("replicas", 1);
  e.batch = cfg.get_long("batch", 1);
  e.seed = static_cast<std::uint64_t>(cfg.get_long("seed", 1));
  e.out_dir = cfg.get_string("out", ".");
  e.z0 = cfg.get_double("z0", 0.0);
  e.z_lo = cfg.get_double("z_lo", 0.0);
  e.z_hi = cfg.get_double("z_hi", e.z_hi);
  e.window_lo = cfg.get_double("window_lo", e.window_lo);
  e.window_hi = cfg.get_double("window_hi", e.window_hi);
  if (cfg.has("deltas")) e.deltas = cfg.get_double_list("deltas");
  e.burn_in_factor = cfg.get_double("burn_in_factor", e.burn_in_factor);
  if (cfg.has("cesaro_ks")) e.cesaro_ks = cfg.get_double_list("cesaro_ks");
  if (cfg.has("grid")) {
    const auto g = cfg.get_double_list("grid");
    if (g.size() != 3) throw ConfigError("`grid` expects a,b,M");
    e.grid_a = g[0];
    e.grid_b = g[1];
    e.grid_m = static_cast<long>(g[2]);
    if (e.grid_m < 2 || g[2] != std::floor(g[2])) {
      throw ConfigError("`grid` point count must be an integer >= 2");
    }
  }
  e.normalized = cfg.get_bool("normalized", true);
  e.constraint_text = cfg.get_string("constraint", "auto");
  cfg.require_all_consumed();
  if (e.replicas < 1) throw ConfigError("replicas must be >= 1");
  if (e.batch < 1) throw ConfigError("batch must be >= 1");
  if (e.steps < 0) throw ConfigError("steps must be >= 1");
  return e;
}

inline ExperimentConfig parse_experiment_string(const std::string& text) {
  Config cfg = Config::parse_string(text);
  return parse_experiment_config(cfg);
}

inline ExperimentConfig parse_experiment_file(const std::string& path) {
  Config cfg = Config::parse_file(path);
  return parse_experiment_config(cfg);
}

// ---------------------------------------------------------------------------
// Scenario and schedule resolution
// ---------------------------------------------------------------------------

namespace detail {

inline DriftRule drift_rule_for(double delta, const std::string& style,
                                double param_scale) {
  // param_scale converts the certified output-space cap `delta` into the
  // per-step motion of the scenario parameter.
  if (delta <= 0.0) return DriftRule::none();
  const double rate = delta / param_scale;
  if (style == "linear") return DriftRule::linear(rate);
  if (style == "sine") {
    const double amp = 1.0;
    if (rate / amp > 2.0) {
      throw ConfigError("drift too large for the sine drift style");
    }
    return DriftRule::sine(amp, rate / amp);
  }
  throw ConfigError("unknown drift_style `" + style + "`");
}

}  // namespace detail

inline bool is_regression_scenario(const std::string& name) {
  return name.rfind("regression-", 0) == 0;
}

inline DensityScenario density_scenario_by_name(const std::string& name,
                                                double delta,
                                                const std::string& style) {
  const auto require_stationary = [&] {
    if (delta > 0.0) {
      throw ConfigError("scenario `" + name + "` does not support drift");
    }
  };
  if (name == "stationary-normal") {
    require_stationary();
    return DensityScenario::gaussian(0.0, 1.0);
  }
  if (name == "drifting-normal") {
    const double H = 1.0 / std::sqrt(2.0 * M_PI * M_E);  // sup|g'| for sigma=1
    return DensityScenario::gaussian(0.0, 1.0,
                                     detail::drift_rule_for(delta, style, H));
  }
  if (name == "normal-mixture") {
    const std::vector<DensityScenario::GaussComponent> comps{
        {0.6, -1.0, 0.6}, {0.4, 1.2, 0.9}};
    double H = 0.0;
    for (const auto& c : comps) {
      H += c.weight / (c.sigma * c.sigma * std::sqrt(2.0 * M_PI * M_E));
    }
    return DensityScenario::mixture(comps,
                                    detail::drift_rule_for(delta, style, H));
  }
  if (name == "triangular") {
    require_stationary();
    return DensityScenario::triangular(-1.0, 0.0, 1.0);
  }
  if (name == "uniform") {
    require_stationary();
    return DensityScenario::uniform(0.0, 1.0);
  }
  throw ConfigError("unknown density scenario `" + name + "`");
}

inline RegressionScenario regression_scenario_by_name(const std::string& name,
                                                      double delta,
                                                      const std::string& style) {
  if (name == "regression-linear") {
    return RegressionScenario::linear(1.0, 0.5,
                                      detail::drift_rule_for(delta, style, 1.0));
  }
  if (name == "regression-sine") {
    return RegressionScenario::sine(1.0, 2.0, 0.5,
                                    detail::drift_rule_for(delta, style, 1.0));
  }
  if (name == "regression-sincos") {
    return RegressionScenario::sincos(
        0.8, 2.0, 0.4,
        detail::drift_rule_for(delta, style, std::sqrt(2.0)));
  }
  throw ConfigError("unknown regression scenario `" + name + "`");
}

/// Resolves the schedule from explicit rules or the `auto` shorthand.
inline ScheduleSpec resolve_schedule(const ExperimentConfig& e, int r,
                                     double nu) {
  ScheduleSpec s;
  if (!e.auto_text.empty()) {
    if (e.auto_text == "stationary") {
      const auto opt = optimal_stationary_exponents(r, nu);
      s.rho_rule = SequenceRule::power(e.rho_scale, opt.p);
      s.theta_rule = SequenceRule::power(e.theta_scale, opt.q);
      return s;
    }
    if (e.auto_text.rfind("drift:", 0) == 0) {
      double delta = 0.0;
      try {
        delta = std::stod(e.auto_text.substr(6));
      } catch (const std::exception&) {
        throw ConfigError("bad `auto = drift:<delta>` value");
      }
      if (!(delta > 0.0)) throw ConfigError("auto drift delta must be > 0");
      const auto [alpha, beta] = optimal_drift_exponents(r, nu);
      s.rho_rule = SequenceRule::constant(std::pow(delta, alpha));
      s.theta_rule = SequenceRule::constant(std::pow(delta, beta / r));
      return s;
    }
    throw ConfigError("unknown `auto` value `" + e.auto_text +
                      "` (expected stationary or drift:<delta>)");
  }
  if (e.rho_text.empty() || e.theta_text.empty()) {
    throw ConfigError("schedule requires `rho` and `theta` keys (or `auto`)");
  }
  try {
    s.rho_rule = parse_rule(e.rho_text);
    s.theta_rule = parse_rule(e.theta_text);
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  return s;
}

inline RegressionConstraint resolve_constraint(const ExperimentConfig& e,
                                               const RegressionScenario& sc,
                                               long horizon) {
  const std::string& text = e.constraint_text;
  if (text == "auto") return sc.default_constraint(horizon);
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw ConfigError("bad constraint `" + text +
                      "` (expected auto, box:..., or ball:...)");
  }
  const std::string kind = text.substr(0, colon);
  std::vector<double> args;
  {
    std::string rest = text.substr(colon + 1);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      const auto comma = rest.find(',', pos);
      const std::string tok = rest.substr(
          pos, comma == std::string::npos ? rest.size() - pos : comma - pos);
      try {
        args.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ConfigError("bad constraint number `" + tok + "`");
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  const int m = sc.output_dim();
  if (kind == "box") {
    if (static_cast<int>(args.size()) != 2 * m) {
      throw ConfigError("box constraint needs lo_1..lo_m,hi_1..hi_m");
    }
    Eigen::VectorXd lo(m), hi(m);
    for (int j = 0; j < m; ++j) {
      lo[j] = args[j];
      hi[j] = args[m + j];
    }
    return RegressionConstraint::box(lo, hi);
  }
  if (kind == "ball") {
    if (static_cast<int>(args.size()) != m + 1) {
      throw ConfigError("ball constraint needs c_1..c_m,radius");
    }
    Eigen::VectorXd c(m);
    for (int j = 0; j < m; ++j) c[j] = args[j];
    return RegressionConstraint::ball(c, args[m]);
  }
  throw ConfigError("unknown constraint kind `" + kind + "`");
}

// ---------------------------------------------------------------------------
// Rate fitting and checkpoints
// ---------------------------------------------------------------------------

struct RateFit {
  double slope = 0.0;
  double stderr_ = 0.0;
  int points = 0;
};

namespace detail {

inline RateFit ols_loglog(const std::vector<std::pair<double, double>>& xy) {
  const int n = static_cast<int>(xy.size());
  if (n < 3) throw std::invalid_argument("rate fit needs >= 3 points");
  double sx = 0.0, sy = 0.0;
  std::vector<double> lx(n), ly(n);
  for (int i = 0; i < n; ++i) {
    if (!(xy[i].second > 0.0)) {
      throw std::invalid_argument("rate fit requires positive values");
    }
    lx[i] = std::log(xy[i].first);
    ly[i] = std::log(xy[i].second);
    sx += lx[i];
    sy += ly[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (int i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("rate fit: degenerate abscissa");
  RateFit f;
  f.slope = sxy / sxx;
  f.points = n;
  double rss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = ly[i] - my - f.slope * (lx[i] - mx);
    rss += r * r;
  }
  f.stderr_ = n > 2 ? std::sqrt(rss / (n - 2) / sxx) : 0.0;
  return f;
}

}  // namespace detail

/// Ordinary least squares of log(mse) on log(1+t) over the checkpoints with
/// t in [t_lo, t_hi]. Series entries are (t, mse) pairs.
inline RateFit fit_rate(const std::vector<std::pair<double, double>>& series,
                        double t_lo, double t_hi) {
  std::vector<std::pair<double, double>> xy;
  for (const auto& [t, mse] : series) {
    if (t >= t_lo && t <= t_hi) xy.emplace_back(1.0 + t, mse);
  }
  return detail::ols_loglog(xy);
}

/// Geometric trace checkpoints t = ceil(1.2^k) <= T, deduplicated, with T
/// itself always included.
inline std::vector<long> geometric_checkpoints(long T) {
  if (T < 1) throw std::invalid_argument("horizon must be >= 1");
  std::vector<long> ts;
  double v = 1.0;
  while (true) {
    const long t = static_cast<long>(std::ceil(v));
    if (t > T) break;
    if (ts.empty() || ts.back() != t) ts.push_back(t);
    v *= 1.2;
  }
  if (ts.empty() || ts.back() != T) ts.push_back(T);
  return ts;
}

// ---------------------------------------------------------------------------
// Run report
// ---------------------------------------------------------------------------

struct RunReport {
  bool ok = true;
  double fitted_slope = std::numeric_limits<double>::quiet_NaN();
  double fitted_stderr = std::numeric_limits<double>::quiet_NaN();
  double sqg_var_slope = std::numeric_limits<double>::quiet_NaN();
  double cesaro_var_slope = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::array<double, 3>> rate_rows;    // t, mse, stderr
  std::vector<std::array<double, 5>> sweep_rows;   // delta,rho,theta,mse,stderr
  std::vector<std::array<double, 4>> cesaro_rows;  // k,t,var_sqg,var_cesaro
  std::vector<std::string> files;
  std::string lemma_summary;
};

namespace detail {

inline void parallel_replicas(long R, int workers,
                              const std::function<void(long)>& body) {
  workers = static_cast<int>(std::clamp<long>(workers, 1, R));
  if (workers == 1) {
    for (long rep = 0; rep < R; ++rep) body(rep);
    return;
  }
  std::mutex mu;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (long rep = w; rep < R; rep += workers) body(rep);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// Recorded values of one density run family: value[rep][checkpoint][query].
struct DensityRunValues {
  std::vector<long> ts;
  std::vector<std::vector<std::vector<double>>> z, cesaro;
};

inline DensityRunValues run_density_replicas(
    const DensityScenario& sc, const std::vector<double>& query,
    const ScheduleSpec& sched, const DensityBounds& bounds,
    const KernelSpec& kernel, double z0, long T, long R, long batch,
    std::uint64_t seed, const std::vector<long>& record_ts, int workers) {
  DensityRunValues out;
  out.ts = record_ts;
  const std::size_t nq = query.size(), nt = record_ts.size();
  out.z.assign(R, {});
  out.cesaro.assign(R, {});
  parallel_replicas(R, workers, [&](long rep) {
    CounterRng rng = CounterRng::replica_stream(seed, static_cast<std::uint64_t>(rep));
    std::vector<DensityTrackerState> trackers;
    trackers.reserve(nq);
    for (double x : query) {
      trackers.push_back(make_density_tracker(x, z0, bounds, kernel, sched));
    }
    auto& zrows = out.z[rep];
    auto& crows = out.cesaro[rep];
    zrows.assign(nt, std::vector<double>(nq));
    crows.assign(nt, std::vector<double>(nq));
    std::vector<double> samples(batch);
    std::size_t next = 0;
    for (long t = 0; t < T; ++t) {
      for (long i = 0; i < batch; ++i) samples[i] = sc.sample(t, rng);
      for (auto& tr : trackers) {
        tr = sqg_density_step(std::move(tr), std::span<const double>(samples));
      }
      if (next < nt && record_ts[next] == t + 1) {
        for (std::size_t q = 0; q < nq; ++q) {
          zrows[next][q] = trackers[q].z;
          crows[next][q] = cesaro_density(trackers[q]);
        }
        ++next;
      }
    }
  });
  return out;
}

/// value[rep][checkpoint][query] is the full output vector (m components).
struct RegressionRunValues {
  std::vector<long> ts;
  std::vector<std::vector<std::vector<Eigen::VectorXd>>> z, cesaro;
};

inline RegressionRunValues run_regression_replicas(
    const RegressionScenario& sc, const std::vector<double>& query,
    const ScheduleSpec& sched, const RegressionConstraint& constraint,
    const KernelSpec& kernel, long T, long R, long batch, std::uint64_t seed,
    const std::vector<long>& record_ts, int workers) {
  RegressionRunValues out;
  out.ts = record_ts;
  const std::size_t nq = query.size(), nt = record_ts.size();
  out.z.assign(R, {});
  out.cesaro.assign(R, {});
  const int m = sc.output_dim();
  parallel_replicas(R, workers, [&](long rep) {
    CounterRng rng = CounterRng::replica_stream(seed, static_cast<std::uint64_t>(rep));
    std::vector<RegressionTrackerState> trackers;
    trackers.reserve(nq);
    for (double x : query) {
      Eigen::VectorXd xv(1);
      xv[0] = x;
      trackers.push_back(make_regression_tracker(
          xv, Eigen::VectorXd::Zero(m), constraint, kernel, sched));
    }
    auto& zrows = out.z[rep];
    auto& crows = out.cesaro[rep];
    zrows.assign(nt, std::vector<Eigen::VectorXd>(nq));
    crows.assign(nt, std::vector<Eigen::VectorXd>(nq));
    std::vector<RegressionPair> pairs(batch);
    std::size_t next = 0;
    for (long t = 0; t < T; ++t) {
      for (long i = 0; i < batch; ++i) pairs[i] = sc.sample_pair(t, rng);
      for (auto& tr : trackers) {
        tr = sqg_regression_step(std::move(tr),
                                 std::span<const RegressionPair>(pairs));
      }
      if (next < nt && record_ts[next] == t + 1) {
        for (std::size_t q = 0; q < nq; ++q) {
          zrows[next][q] = trackers[q].z;
          crows[next][q] = cesaro_regression(trackers[q]);
        }
        ++next;
      }
    }
  });
  return out;
}

inline void emit_common_header(csv::Table& table, const ExperimentConfig& e) {
  table.comment("drift-kde experiment output");
  for (const auto& [k, v] : e.echo) table.comment("config " + k + " = " + v);
  table.comment("resolved seed = " + std::to_string(e.seed));
  table.comment("resolved replicas = " + std::to_string(e.replicas));
  table.comment("resolved batch = " + std::to_string(e.batch));
}

inline void emit_schedule_header(csv::Table& table, const ScheduleSpec& s,
                                 int r, double nu) {
  table.comment("resolved rho_rule = " + rule_to_string(s.rho_rule));
  table.comment("resolved theta_rule = " + rule_to_string(s.theta_rule));
  const auto opt = optimal_stationary_exponents(r, nu);
  table.comment("resolved p_star = " + csv::format_double(opt.p));
  table.comment("resolved q_star = " + csv::format_double(opt.q));
  table.comment("resolved gamma_star = " + csv::format_double(opt.gamma));
  const auto [alpha, beta] = optimal_drift_exponents(r, nu);
  table.comment("resolved alpha_star = " + csv::format_double(alpha));
  table.comment("resolved beta_star = " + csv::format_double(beta));
}

inline void emit_density_certificates(csv::Table& table,
                                      const DensityScenario& sc,
                                      const KernelSpec& kernel) {
  table.comment("certificate scenario = " + sc.name());
  table.comment("certificate gbar = " + csv::format_double(sc.gbar()));
  if (sc.holder_available()) {
    table.comment("certificate H = " + csv::format_double(sc.holder_H()));
    table.comment("certificate nu = " + csv::format_double(sc.holder_nu()));
    table.comment(
        "certificate A = " +
        csv::format_double(width_characteristic(kernel, sc.holder_nu())));
  }
  table.comment("certificate drift_cap = " + csv::format_double(sc.drift_cap()));
  table.comment("certificate Kbar = " + csv::format_double(kernel.sup_bound()));
}

inline void emit_regression_certificates(csv::Table& table,
                                         const RegressionScenario& sc,
                                         const RegressionConstraint& c,
                                         const KernelSpec& kernel,
                                         long horizon) {
  table.comment("certificate scenario = " + sc.name());
  table.comment("certificate g1_bar = " + csv::format_double(sc.g1_bar()));
  table.comment("certificate Y_norm = " + csv::format_double(c.norm_bound()));
  table.comment("certificate Yx_norm = " +
                csv::format_double(sc.yx_norm_cap(horizon)));
  table.comment("certificate g2_bar = " +
                csv::format_double(sc.g2_bar(horizon)));
  table.comment("certificate drift_cap = " +
                csv::format_double(sc.certify_drift(0)));
  table.comment("certificate Kbar = " + csv::format_double(kernel.sup_bound()));
}

inline std::string out_path(const ExperimentConfig& e, const std::string& name) {
  if (e.out_dir.empty()) return {};
  if (e.out_dir.back() == '/') return e.out_dir + name;
  return e.out_dir + "/" + name;
}

inline void maybe_write(csv::Table& table, const ExperimentConfig& e,
                        const std::string& name, RunReport& report) {
  const std::string path = out_path(e, name);
  if (path.empty()) return;
  table.write_file(path);
  report.files.push_back(path);
}

/// Across-replica mean and standard error of the mean.
inline std::pair<double, double> mean_and_se(const std::vector<double>& v) {
  const std::size_t n = v.size();
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(n);
  if (n < 2) return {m, 0.0};
  double s2 = 0.0;
  for (double x : v) s2 += (x - m) * (x - m);
  s2 /= static_cast<double>(n - 1);
  return {m, std::sqrt(s2 / static_cast<double>(n))};
}

inline double sample_variance(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 2) return 0.0;
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(n);
  double s2 = 0.0;
  for (double x : v) s2 += (x - m) * (x - m);
  return s2 / static_cast<double>(n - 1);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Lemma verification suite (seeded, deterministic)
// ---------------------------------------------------------------------------

/// Runs the recursive-sequence verifiers on their equality cases plus
/// randomized admissible instances, and checks the condition diagnostics on a
/// constant-rho violation. Returns true iff every check passed; `summary`
/// collects one line per sub-suite.
inline bool verify_lemma_suite(std::uint64_t seed, std::string* summary,
                               int instances = 500) {
  CounterRng rng(seed);
  bool ok = true;
  std::string text;
  const auto note = [&](const std::string& line, bool pass) {
    text += std::string(pass ? "PASS " : "FAIL ") + line + "\n";
    ok = ok && pass;
  };

  // Contraction-with-bounded-forcing recursion.
  {
    int failures = 0;
    for (int i = 0; i < instances; ++i) {
      const int T = 200;
      const double q = 0.1 + 1.9 * rng.uniform();
      const double c = rng.uniform_pos() / q;
      const double p = rng.uniform();
      const double cap = rng.uniform();
      std::vector<double> rho(T), alpha(T), eta(T);
      for (int t = 0; t < T; ++t) {
        rho[t] = c / std::pow(1.0 + t, p);
        alpha[t] = cap * rng.uniform();
        eta[t] = rng.uniform() - 0.5;
      }
      const auto res =
          lemma_a1_verify(5.0 * rng.uniform(), q, rho, alpha, cap, eta);
      if (!res.pass) ++failures;
    }
    note("contraction recursion bound: " + std::to_string(instances - failures) +
             "/" + std::to_string(instances) + " instances",
         failures == 0);
  }

  // Vanishing-forcing convergence.
  {
    int failures = 0;
    for (int i = 0; i < instances; ++i) {
      const int T = 5000;
      const double c = rng.uniform_pos();
      const double p = 0.3 + 0.6 * rng.uniform();
      const double a0 = 2.0 * rng.uniform();
      const double s = 0.2 + 0.8 * rng.uniform();
      std::vector<double> rho(T), alpha(T);
      for (int t = 0; t < T; ++t) {
        rho[t] = c / std::pow(1.0 + t, p);
        alpha[t] = a0 / std::pow(1.0 + t, s);
      }
      const auto res = lemma_a2_verify(rho, alpha, 5.0 * rng.uniform());
      if (!res.pass) ++failures;
    }
    note("vanishing-forcing convergence: " +
             std::to_string(instances - failures) + "/" +
             std::to_string(instances) + " instances",
         failures == 0);
  }

  // Power-law decay rate. Instances keep rho <= 1 (so the contraction factor
  // stays in [0, 1) from the first step) and gamma <= beta, the regime in
  // which the max{v0, C/(rho-beta)} constant dominates the inductive
  // requirement C/(rho-gamma); every use of this estimate in the bound
  // module satisfies both.
  {
    int failures = 0;
    for (int i = 0; i < instances; ++i) {
      const double beta = 0.05 + 0.85 * rng.uniform();
      const double rho = beta + (1.0 - beta) * rng.uniform_pos();
      const double gamma = rng.uniform_pos() * std::min(beta, 0.999 * rho);
      const double C = 5.0 * rng.uniform_pos();
      const double v0 = 5.0 * rng.uniform();
      const auto res = lemma_a3_verify(v0, rho, beta, gamma, C, 10000);
      if (!res.pass) ++failures;
    }
    note("power-law decay bound: " + std::to_string(instances - failures) +
             "/" + std::to_string(instances) + " instances",
         failures == 0);
  }

  // Condition diagnostics: a compliant decaying-step run and a constant-step
  // violation.
  {
    const int T = 4096;
    std::vector<double> v(T + 1), rho_good(T), rho_bad(T), gam(T);
    v[0] = 1.0;
    for (int t = 0; t < T; ++t) {
      rho_good[t] = 0.5 / std::pow(1.0 + t, 0.7);
      rho_bad[t] = 0.1;
      gam[t] = 1.0 / std::pow(1.0 + t, 1.6);
      v[t + 1] = v[t] * (1.0 - rho_good[t] * 0.5) + gam[t];
    }
    const auto good = lemma_a4_conditions_check(v, rho_good, gam);
    const auto bad = lemma_a4_conditions_check(v, rho_bad, gam);
    note("convergence conditions hold on decaying-step run",
         good.rho_tends_to_zero && good.rho_sum_diverges && good.gamma_summable);
    note("constant-step violation flagged", !bad.rho_tends_to_zero);
  }

  if (summary) *summary = text;
  return ok;
}

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

inline RunReport run_experiment(const ExperimentConfig& e, int workers = 1) {
  RunReport report;

  if (e.mode == ExperimentMode::VerifyLemmas) {
    report.ok = verify_lemma_suite(e.seed, &report.lemma_summary);
    return report;
  }

  const bool regression = is_regression_scenario(e.scenario_name);
  const int r = 1;
  const KernelSpec kernel = kernel_by_name(e.kernel_name, r);

  // ---- drift sweep over delta (density scenarios only) --------------------
  if (e.mode == ExperimentMode::DriftSweep) {
    if (regression) {
      throw ConfigError("drift-sweep supports density scenarios only");
    }
    if (e.deltas.empty()) throw ConfigError("drift-sweep requires `deltas`");
    csv::Table table;
    detail::emit_common_header(table, e);
    const auto [alpha, beta] = optimal_drift_exponents(r, 1.0);
    table.comment("resolved alpha_star = " + csv::format_double(alpha));
    table.comment("resolved beta_star = " + csv::format_double(beta));
    table.columns({"delta", "rho", "theta", "steady_mse", "stderr"});
    std::vector<std::pair<double, double>> series;
    bool emitted_certs = false;
    for (double delta : e.deltas) {
      if (!(delta > 0.0)) throw ConfigError("sweep deltas must be > 0");
      const DensityScenario sc = density_scenario_by_name(
          e.scenario_name, delta,
          e.drift_style.empty() ? "sine" : e.drift_style);
      if (!emitted_certs) {
        detail::emit_density_certificates(table, sc, kernel);
        emitted_certs = true;
      }
      const double rho = std::pow(delta, alpha);
      const double theta = std::pow(delta, beta / r);
      ScheduleSpec sched;
      sched.rho_rule = SequenceRule::constant(rho);
      sched.theta_rule = SequenceRule::constant(theta);
      const long burn = static_cast<long>(std::ceil(e.burn_in_factor / rho));
      const long T =
          e.steps > 0 ? e.steps : burn + 3 * burn;  // window of 3 burn spans
      if (T <= burn) throw ConfigError("steps too small for the burn-in");
      std::vector<long> record_ts;
      for (long t = burn + 1; t <= T; ++t) record_ts.push_back(t);
      const DensityBounds bounds(
          e.z_lo, std::isnan(e.z_hi) ? sc.gbar() : e.z_hi, sc.gbar());
      const auto vals = detail::run_density_replicas(
          sc, e.query, sched, bounds, kernel, e.z0, T, e.replicas, e.batch,
          e.seed, record_ts, workers);
      // Per-replica window-averaged squared error, then across replicas.
      std::vector<double> per_rep(e.replicas, 0.0);
      for (long rep = 0; rep < e.replicas; ++rep) {
        double acc = 0.0;
        for (std::size_t ti = 0; ti < record_ts.size(); ++ti) {
          for (std::size_t q = 0; q < e.query.size(); ++q) {
            const double truth = sc.density_at(record_ts[ti], e.query[q]);
            const double d = vals.z[rep][ti][q] - truth;
            acc += d * d;
          }
        }
        per_rep[rep] =
            acc / static_cast<double>(record_ts.size() * e.query.size());
      }
      const auto [mse, se] = detail::mean_and_se(per_rep);
      table.comment("sweep delta = " + csv::format_double(delta) +
                    " rho = " + csv::format_double(rho) +
                    " theta = " + csv::format_double(theta) +
                    " burn_in = " + std::to_string(burn) +
                    " steps = " + std::to_string(T));
      table.row().add(delta).add(rho).add(theta).add(mse).add(se);
      report.sweep_rows.push_back({delta, rho, theta, mse, se});
      series.emplace_back(delta, mse);
    }
    if (series.size() >= 3) {
      const RateFit f = detail::ols_loglog(series);
      report.fitted_slope = f.slope;
      report.fitted_stderr = f.stderr_;
      table.comment("fitted log-log slope of steady_mse vs delta = " +
                    csv::format_double(f.slope) + " (stderr " +
                    csv::format_double(f.stderr_) + ")");
    }
    detail::maybe_write(table, e, "sweep.csv", report);
    return report;
  }

  // ---- grid tracking -------------------------------------------------------
  if (e.mode == ExperimentMode::TrackGrid) {
    if (regression) throw ConfigError("track-grid needs a density scenario");
    if (e.steps < 1) throw ConfigError("track-grid requires `steps`");
    const DensityScenario sc =
        density_scenario_by_name(e.scenario_name, e.drift,
                                 e.drift_style.empty() ? "linear"
                                                       : e.drift_style);
    const ScheduleSpec sched = resolve_schedule(
        e, r, sc.holder_available() ? sc.holder_nu() : 1.0);
    const GridSpec grid =
        GridSpec::uniform(e.grid_a, e.grid_b, static_cast<int>(e.grid_m));
    const double hi = std::isnan(e.z_hi) ? sc.gbar() : e.z_hi;
    const std::vector<long> record_ts = geometric_checkpoints(e.steps);

    std::vector<std::vector<double>> ise(e.replicas);
    std::vector<Eigen::VectorXd> final_curve(e.replicas);
    detail::parallel_replicas(e.replicas, workers, [&](long rep) {
      CounterRng rng = CounterRng::replica_stream(e.seed, static_cast<std::uint64_t>(rep));
      GridEstimate est;
      est.lower = Eigen::VectorXd::Constant(grid.size(), e.z_lo);
      est.upper = Eigen::VectorXd::Constant(grid.size(), hi);
      est.normalized = e.normalized;
      est.values = project_onto_G(
          Eigen::VectorXd::Constant(grid.size(), e.z0), grid, est);
      std::vector<double>& rows = ise[rep];
      rows.assign(record_ts.size(), 0.0);
      std::size_t next = 0;
      for (long t = 0; t < e.steps; ++t) {
        const double rho = rho_at(sched, t);
        const double theta = theta_at(sched, t);
        est = grid_sqg_step(std::move(est), grid, sc.sample(t, rng), rho,
                            theta, kernel);
        if (next < record_ts.size() && record_ts[next] == t + 1) {
          Eigen::VectorXd g(grid.size());
          for (int i = 0; i < grid.size(); ++i) {
            g[i] = sc.density_at(t + 1, grid.points[i]);
          }
          rows[next] = weighted_ise(grid, est.values, g);
          ++next;
        }
      }
      final_curve[rep] = est.values;
    });

    csv::Table table;
    detail::emit_common_header(table, e);
    detail::emit_density_certificates(table, sc, kernel);
    detail::emit_schedule_header(table, sched, r,
                                 sc.holder_available() ? sc.holder_nu() : 1.0);
    table.comment("grid = " + csv::format_double(e.grid_a) + "," +
                  csv::format_double(e.grid_b) + "," +
                  std::to_string(e.grid_m) +
                  (e.normalized ? " normalized" : " unnormalized"));
    table.comment("mse column is the weighted integrated squared error");
    table.columns({"t", "mse", "stderr"});
    std::vector<std::pair<double, double>> series;
    for (std::size_t ti = 0; ti < record_ts.size(); ++ti) {
      std::vector<double> per_rep(e.replicas);
      for (long rep = 0; rep < e.replicas; ++rep) per_rep[rep] = ise[rep][ti];
      const auto [m, se] = detail::mean_and_se(per_rep);
      table.row().add(static_cast<long>(record_ts[ti])).add(m).add(se);
      report.rate_rows.push_back({double(record_ts[ti]), m, se});
      series.emplace_back(double(record_ts[ti]), m);
    }
    detail::maybe_write(table, e, "grid_rate.csv", report);

    csv::Table curve;
    detail::emit_common_header(curve, e);
    curve.comment("final estimate of replica 0 at t = " +
                  std::to_string(e.steps));
    curve.columns({"x", "z", "truth"});
    for (int i = 0; i < grid.size(); ++i) {
      curve.row()
          .add(grid.points[i])
          .add(final_curve[0][i])
          .add(sc.density_at(e.steps, grid.points[i]));
    }
    detail::maybe_write(curve, e, "grid_final.csv", report);
    return report;
  }

  if (e.steps < 1) throw ConfigError("this mode requires `steps`");
  const long T = e.steps;

  // Record times: full per-step traces only for small runs.
  const bool full_trace = (e.mode == ExperimentMode::TrackDensity ||
                           e.mode == ExperimentMode::TrackRegression) &&
                          T <= 10000;
  std::vector<long> record_ts;
  if (e.mode == ExperimentMode::CesaroCompare) {
    // checkpoints t = k / rho for a constant rho rule
    ScheduleSpec probe = resolve_schedule(e, r, 1.0);
    if (probe.rho_rule.kind != SequenceRule::Kind::Constant) {
      throw ConfigError("cesaro-compare requires a constant rho rule");
    }
    const double rho = probe.rho_rule.coeff;
    for (double k : e.cesaro_ks) {
      const long t = std::lround(k / rho);
      if (t < 1 || t > T) {
        throw ConfigError("cesaro checkpoint k/rho outside [1, steps]");
      }
      record_ts.push_back(t);
    }
    std::sort(record_ts.begin(), record_ts.end());
    record_ts.erase(std::unique(record_ts.begin(), record_ts.end()),
                    record_ts.end());
  } else if (full_trace) {
    record_ts.resize(T);
    for (long t = 1; t <= T; ++t) record_ts[t - 1] = t;
  } else {
    record_ts = geometric_checkpoints(T);
  }

  // ---- regression modes ----------------------------------------------------
  if (regression) {
    if (e.mode != ExperimentMode::TrackRegression &&
        e.mode != ExperimentMode::RateFit) {
      throw ConfigError("mode `" + e.mode_name +
                        "` does not accept a regression scenario");
    }
    const RegressionScenario sc =
        regression_scenario_by_name(e.scenario_name, e.drift,
                                    e.drift_style.empty() ? "linear"
                                                          : e.drift_style);
    const ScheduleSpec sched = resolve_schedule(e, r, 1.0);
    const RegressionConstraint constraint = resolve_constraint(e, sc, T);
    const auto vals = detail::run_regression_replicas(
        sc, e.query, sched, constraint, kernel, T, e.replicas, e.batch, e.seed,
        record_ts, workers);
    const int m = sc.output_dim();

    if (e.mode == ExperimentMode::TrackRegression) {
      csv::Table table;
      detail::emit_common_header(table, e);
      detail::emit_regression_certificates(table, sc, constraint, kernel, T);
      detail::emit_schedule_header(table, sched, r, 1.0);
      if (m > 1) {
        table.comment("one row per output component; sq_error is "
                      "per-component, total error is their sum");
      }
      table.columns({"replica", "t", "x", "z", "cesaro", "truth", "sq_error"});
      for (long rep = 0; rep < e.replicas; ++rep) {
        for (std::size_t ti = 0; ti < record_ts.size(); ++ti) {
          for (std::size_t q = 0; q < e.query.size(); ++q) {
            const Eigen::VectorXd truth =
                sc.regression_truth(record_ts[ti], e.query[q]);
            for (int j = 0; j < m; ++j) {
              const double z = vals.z[rep][ti][q][j];
              const double d = z - truth[j];
              table.row()
                  .add(rep)
                  .add(static_cast<long>(record_ts[ti]))
                  .add(e.query[q])
                  .add(z)
                  .add(vals.cesaro[rep][ti][q][j])
                  .add(truth[j])
                  .add(d * d);
            }
          }
        }
      }
      detail::maybe_write(table, e, "trace.csv", report);
      return report;
    }

    // rate-fit on ||z - truth||^2
    csv::Table table;
    detail::emit_common_header(table, e);
    detail::emit_regression_certificates(table, sc, constraint, kernel, T);
    detail::emit_schedule_header(table, sched, r, 1.0);
    table.columns({"t", "mse", "stderr"});
    std::vector<std::pair<double, double>> series;
    for (std::size_t ti = 0; ti < record_ts.size(); ++ti) {
      std::vector<double> per_rep(e.replicas, 0.0);
      for (long rep = 0; rep < e.replicas; ++rep) {
        double acc = 0.0;
        for (std::size_t q = 0; q < e.query.size(); ++q) {
          acc += (vals.z[rep][ti][q] -
                  sc.regression_truth(record_ts[ti], e.query[q]))
                     .squaredNorm();
        }
        per_rep[rep] = acc / static_cast<double>(e.query.size());
      }
      const auto [mse, se] = detail::mean_and_se(per_rep);
      table.row().add(static_cast<long>(record_ts[ti])).add(mse).add(se);
      report.rate_rows.push_back({double(record_ts[ti]), mse, se});
      series.emplace_back(double(record_ts[ti]), mse);
    }
    const RateFit f = fit_rate(series, e.window_lo,
                               std::min<double>(e.window_hi, double(T)));
    report.fitted_slope = f.slope;
    report.fitted_stderr = f.stderr_;
    table.comment("fitted log-log slope of mse vs 1+t = " +
                  csv::format_double(f.slope) + " (stderr " +
                  csv::format_double(f.stderr_) + ") over t in [" +
                  csv::format_double(e.window_lo) + ", " +
                  csv::format_double(std::min<double>(e.window_hi, double(T))) +
                  "]");
    detail::maybe_write(table, e, "rate.csv", report);
    return report;
  }

  // ---- density modes: track-density, rate-fit, cesaro-compare --------------
  const DensityScenario sc = density_scenario_by_name(
      e.scenario_name, e.drift,
      e.drift_style.empty() ? "linear" : e.drift_style);
  const double nu = sc.holder_available() ? sc.holder_nu() : 1.0;
  const ScheduleSpec sched = resolve_schedule(e, r, nu);
  const DensityBounds bounds(e.z_lo, std::isnan(e.z_hi) ? sc.gbar() : e.z_hi,
                             sc.gbar());
  const auto vals = detail::run_density_replicas(
      sc, e.query, sched, bounds, kernel, e.z0, T, e.replicas, e.batch, e.seed,
      record_ts, workers);

  if (e.mode == ExperimentMode::TrackDensity) {
    csv::Table table;
    detail::emit_common_header(table, e);
    detail::emit_density_certificates(table, sc, kernel);
    detail::emit_schedule_header(table, sched, r, nu);
    table.columns({"replica", "t", "x", "z", "cesaro", "truth", "sq_error"});
    for (long rep = 0; rep < e.replicas; ++rep) {
      for (std::size_t ti = 0; ti < record_ts.size(); ++ti) {
        for (std::size_t q = 0; q < e.query.size(); ++q) {
          const double truth = sc.density_at(record_ts[ti], e.query[q]);
          const double z = vals.z[rep][ti][q];
          table.row()
              .add(rep)
              .add(static_cast<long>(record_ts[ti]))
              .add(e.query[q])
              .add(z)
              .add(vals.cesaro[rep][ti][q])
              .add(truth)
              .add((z - truth) * (z - truth));
        }
      }
    }
    detail::maybe_write(table, e, "trace.csv", report);
    return report;
  }

  if (e.mode == ExperimentMode::RateFit) {
    csv::Table table;
    detail::emit_common_header(table, e);
    detail::emit_density_certificates(table, sc, kernel);
    detail::emit_schedule_header(table, sched, r, nu);
    table.columns({"t", "mse", "stderr"});
    std::vector<std::pair<double, double>> series;
    for (std::size_t ti = 0; ti < record_ts.size(); ++ti) {
      std::vector<double> per_rep(e.replicas, 0.0);
      for (long rep = 0; rep < e.replicas; ++rep) {
        double acc = 0.0;
        for (std::size_t q = 0; q < e.query.size(); ++q) {
          const double d = vals.z[rep][ti][q] -
                           sc.density_at(record_ts[ti], e.query[q]);
          acc += d * d;
        }
        per_rep[rep] = acc / static_cast<double>(e.query.size());
      }
      const auto [mse, se] = detail::mean_and_se(per_rep);
      table.row().add(static_cast<long>(record_ts[ti])).add(mse).add(se);
      report.rate_rows.push_back({double(record_ts[ti]), mse, se});
      series.emplace_back(double(record_ts[ti]), mse);
    }
    const RateFit f = fit_rate(series, e.window_lo,
                               std::min<double>(e.window_hi, double(T)));
    report.fitted_slope = f.slope;
    report.fitted_stderr = f.stderr_;
    table.comment("fitted log-log slope of mse vs 1+t = " +
                  csv::format_double(f.slope) + " (stderr " +
                  csv::format_double(f.stderr_) + ") over t in [" +
                  csv::format_double(e.window_lo) + ", " +
                  csv::format_double(std::min<double>(e.window_hi, double(T))) +
                  "]");
    detail::maybe_write(table, e, "rate.csv", report);
    return report;
  }

  // cesaro-compare
  {
    csv::Table table;
    detail::emit_common_header(table, e);
    detail::emit_density_certificates(table, sc, kernel);
    detail::emit_schedule_header(table, sched, r, nu);
    table.comment("across-replica variance of the raw and averaged estimates "
                  "at checkpoints t = k / rho");
    table.columns({"k", "t", "var_sqg", "var_cesaro"});
    const double rho = sched.rho_rule.coeff;
    std::vector<std::pair<double, double>> sqg_series, ces_series;
    for (std::size_t ti = 0; ti < record_ts.size(); ++ti) {
      const double k = record_ts[ti] * rho;
      double vz = 0.0, vc = 0.0;
      for (std::size_t q = 0; q < e.query.size(); ++q) {
        std::vector<double> zs(e.replicas), cs(e.replicas);
        for (long rep = 0; rep < e.replicas; ++rep) {
          zs[rep] = vals.z[rep][ti][q];
          cs[rep] = vals.cesaro[rep][ti][q];
        }
        vz += detail::sample_variance(zs);
        vc += detail::sample_variance(cs);
      }
      vz /= static_cast<double>(e.query.size());
      vc /= static_cast<double>(e.query.size());
      table.row().add(k).add(static_cast<long>(record_ts[ti])).add(vz).add(vc);
      report.cesaro_rows.push_back({k, double(record_ts[ti]), vz, vc});
      sqg_series.emplace_back(k, vz);
      ces_series.emplace_back(k, vc);
    }
    if (record_ts.size() >= 3) {
      report.sqg_var_slope = detail::ols_loglog(sqg_series).slope;
      report.cesaro_var_slope = detail::ols_loglog(ces_series).slope;
      table.comment("fitted log-log slope of var_sqg vs k = " +
                    csv::format_double(report.sqg_var_slope));
      table.comment("fitted log-log slope of var_cesaro vs k = " +
                    csv::format_double(report.cesaro_var_slope));
    }
    detail::maybe_write(table, e, "cesaro.csv", report);
  }
  return report;
}

}  // namespace driftkde
