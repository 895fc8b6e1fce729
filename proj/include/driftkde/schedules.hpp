#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

namespace driftkde {

/// One sequence rule: either a constant c, or the power law c / (1+t)^e.
struct SequenceRule {
  enum class Kind { Constant, Power };
  Kind kind = Kind::Constant;
  double coeff = 1.0;
  double exponent = 0.0;

  static SequenceRule constant(double c) {
    if (!(c > 0.0)) throw std::invalid_argument("rule coefficient must be > 0");
    return {Kind::Constant, c, 0.0};
  }
  static SequenceRule power(double c, double e) {
    if (!(c > 0.0)) throw std::invalid_argument("rule coefficient must be > 0");
    if (e < 0.0) throw std::invalid_argument("rule exponent must be >= 0");
    return {Kind::Power, c, e};
  }

  double at(long t) const {
    if (kind == Kind::Constant || exponent == 0.0) return coeff;
    return coeff / std::pow(1.0 + static_cast<double>(t), exponent);
  }
};

/// Adjustment/window sequences {rho_t, theta_t}. The optional drift overlay
/// lifts the base rules to rho_t = max{delta_t^alpha, base}, theta_t =
/// max{delta_t^{beta/r}, base} for a known per-step drift sequence delta_t.
struct ScheduleSpec {
  SequenceRule rho_rule = SequenceRule::constant(0.1);
  SequenceRule theta_rule = SequenceRule::constant(0.5);

  struct DriftOverlay {
    std::function<double(long)> delta;  // certified per-step drift cap
    double alpha = 0.0;
    double beta = 0.0;
    int r = 1;
  };
  std::shared_ptr<const DriftOverlay> drift;  // null when absent
};

inline double rho_at(const ScheduleSpec& s, long t) {
  double v = s.rho_rule.at(t);
  if (s.drift) {
    v = std::max(v, std::pow(s.drift->delta(t), s.drift->alpha));
  }
  return v;
}

inline double theta_at(const ScheduleSpec& s, long t) {
  double v = s.theta_rule.at(t);
  if (s.drift) {
    v = std::max(v, std::pow(s.drift->delta(t), s.drift->beta / s.drift->r));
  }
  return v;
}

/// Asymptotically optimal exponents (alpha*, beta*) for tracking under a
/// drift cap delta: rho = delta^{alpha*}, theta = delta^{beta*}.
inline std::pair<double, double> optimal_drift_exponents(int r, double nu) {
  if (r < 1) throw std::invalid_argument("dimension r must be >= 1");
  if (!(nu > 0.0 && nu <= 1.0)) throw std::invalid_argument("nu in (0,1]");
  const double alpha = (2.0 * r + nu) / (2.0 * (r + nu));
  const double beta = 1.0 / (2.0 * (r + nu));
  return {alpha, beta};
}

/// Optimal power-law exponents (p*, q*) and the resulting rate gamma* for
/// the stationary case.
struct StationaryExponents {
  double p, q, gamma;
};

inline StationaryExponents optimal_stationary_exponents(int r, double nu) {
  if (r < 1) throw std::invalid_argument("dimension r must be >= 1");
  if (!(nu > 0.0 && nu <= 1.0)) throw std::invalid_argument("nu in (0,1]");
  return {1.0, 1.0 / (r + nu), nu / (r + nu)};
}

/// Rate exponent gamma = min{nu q, p, p - r q} achieved by the power rules
/// rho_t = rho/(1+t)^p, theta_t = theta/(1+t)^q.
inline double theorem5_gamma(double p, double q, int r, double nu) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("p in (0,1]");
  if (q < 0.0) throw std::invalid_argument("q >= 0");
  return std::min({nu * q, p, p - r * q});
}

/// Parses "const:<c>" or "pow:<c>,<e>".
inline SequenceRule parse_rule(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw std::invalid_argument("bad rule '" + text +
                                "' (expected const:<c> or pow:<c>,<e>)");
  }
  const std::string kind = text.substr(0, colon);
  const std::string args = text.substr(colon + 1);
  try {
    if (kind == "const") {
      return SequenceRule::constant(std::stod(args));
    }
    if (kind == "pow") {
      const auto comma = args.find(',');
      if (comma == std::string::npos) {
        throw std::invalid_argument("pow rule needs two arguments");
      }
      return SequenceRule::power(std::stod(args.substr(0, comma)),
                                 std::stod(args.substr(comma + 1)));
    }
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad numeric argument in rule '" + text + "'");
  }
  throw std::invalid_argument("unknown rule kind '" + kind + "'");
}

inline std::string rule_to_string(const SequenceRule& r) {
  if (r.kind == SequenceRule::Kind::Constant) {
    return "const:" + std::to_string(r.coeff);
  }
  return "pow:" + std::to_string(r.coeff) + "," + std::to_string(r.exponent);
}

}  // namespace driftkde
