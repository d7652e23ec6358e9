#pragma once

// Gradient method with variable steps and the heavy-ball recursion, plus the
// per-iterate rate certificates for both.

#include "sqcflow/core.hpp"

#include <cstring>
#include <variant>

namespace sqcflow {

struct ConstantStep {
  double beta = 0.0;
};

/// beta_k = betas[k]; the last entry repeats once the sequence is exhausted.
struct StepSequence {
  std::vector<double> betas;
};

/// beta = gamma / (2 L0^2), which minimizes the contraction factor.
struct OptimalStep {
  double gamma = 0.0;
  double L0 = 0.0;
};

using StepRule = std::variant<ConstantStep, StepSequence, OptimalStep>;

inline double optimal_step(double gamma, double L0) {
  require(gamma > 0.0 && L0 > 0.0, ErrorKind::InvalidParameter, "gamma and L0 must be positive");
  return gamma / (2.0 * L0 * L0);
}

inline double step_at(const StepRule& rule, std::size_t k) {
  if (const auto* c = std::get_if<ConstantStep>(&rule)) return c->beta;
  if (const auto* s = std::get_if<StepSequence>(&rule)) return s->betas[std::min(k, s->betas.size() - 1)];
  const auto& o = std::get<OptimalStep>(rule);
  return optimal_step(o.gamma, o.L0);
}

/// [min, max] of the steps a rule can produce.
inline std::pair<double, double> step_bounds(const StepRule& rule) {
  if (const auto* s = std::get_if<StepSequence>(&rule)) {
    require(!s->betas.empty(), ErrorKind::InvalidParameter, "step sequence is empty");
    const auto [lo, hi] = std::minmax_element(s->betas.begin(), s->betas.end());
    return {*lo, *hi};
  }
  const double b = step_at(rule, 0);
  return {b, b};
}

/// Largest admissible step for the contraction certificate: min{gamma/L0^2, 2/L0}
/// (exclusive).
inline double gd_step_cap(double gamma, double L0) {
  return std::min(gamma / (L0 * L0), 2.0 / L0);
}

enum class StopReason { GradientTolerance, FixedPoint, MaxIterations, Radius };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::GradientTolerance: return "gradient_tolerance";
    case StopReason::FixedPoint: return "fixed_point";
    case StopReason::MaxIterations: return "max_iterations";
    case StopReason::Radius: return "radius";
  }
  return "unknown";
}

struct GDConfig {
  Point x0;
  StepRule step_rule = ConstantStep{0.0};
  /// Bounds on beta_k; derived from the step rule when unset.
  std::optional<double> beta_lower;
  std::optional<double> beta_upper;
  std::size_t max_iters = 100000;
  double stop_grad_tol = 1e-10;
  /// Stop once |x^k - x_bar| <= stop_radius (needs x_bar).
  std::optional<double> stop_radius;

  std::pair<double, double> resolved_bounds() const {
    const auto [lo, hi] = step_bounds(step_rule);
    return {beta_lower.value_or(lo), beta_upper.value_or(hi)};
  }

  void validate() const {
    require(x0.size() >= 1 && all_finite(x0), ErrorKind::InvalidParameter, "x0 must be a finite point");
    require(max_iters >= 1, ErrorKind::InvalidParameter, "max_iters must be positive");
    require(stop_grad_tol > 0.0, ErrorKind::InvalidParameter, "stop_grad_tol must be positive");
    if (stop_radius) require(*stop_radius > 0.0, ErrorKind::InvalidParameter, "stop radius must be positive");
    const auto [lo, hi] = resolved_bounds();
    require(lo > 0.0 && lo <= hi && std::isfinite(hi), ErrorKind::InvalidParameter,
            "step bounds must satisfy 0 < beta_lower <= beta_upper");
    const auto [rlo, rhi] = step_bounds(step_rule);
    require(rlo >= lo && rhi <= hi, ErrorKind::InvalidParameter, "step rule leaves [beta_lower, beta_upper]");
  }
};

struct HBConfig {
  Point x0;
  /// x_{-1}; defaults to x0 (no initial momentum).
  std::optional<Point> x_prev;
  double theta = 0.5;
  double beta = 0.0;
  std::size_t max_iters = 100000;
  double stop_grad_tol = 1e-10;

  void validate() const {
    require(x0.size() >= 1 && all_finite(x0), ErrorKind::InvalidParameter, "x0 must be a finite point");
    if (x_prev)
      require(x_prev->size() == x0.size() && all_finite(*x_prev), ErrorKind::InvalidParameter,
              "x_prev must be finite with the dimension of x0");
    // theta = 0 is accepted as the degenerate momentum-free case.
    require(theta >= 0.0 && theta < 1.0, ErrorKind::InvalidParameter, "theta must lie in [0, 1[");
    require(beta > 0.0 && std::isfinite(beta), ErrorKind::InvalidParameter, "beta must be positive");
    require(max_iters >= 1, ErrorKind::InvalidParameter, "max_iters must be positive");
    require(stop_grad_tol > 0.0, ErrorKind::InvalidParameter, "stop_grad_tol must be positive");
  }
};

struct SolverRun {
  Trajectory trajectory;
  StopReason stop_reason = StopReason::MaxIterations;
  std::size_t iterations = 0;
};

namespace detail {

inline void check_iterate(const FunctionOracle& oracle, const Point& x, std::size_t k) {
  if (!all_finite(x)) throw Error(ErrorKind::NumericalBlowup, "non-finite iterate", static_cast<double>(k));
  if (!oracle.domain.contains(x)) throw Error(ErrorKind::DomainExit, "iterate left the domain", static_cast<double>(k));
}

inline bool bitwise_equal(const Point& a, const Point& b) {
  return a.size() == b.size() && std::equal(a.data(), a.data() + a.size(), b.data(), [](double u, double v) {
           return std::memcmp(&u, &v, sizeof(double)) == 0;
         });
}

}  // namespace detail

/// x^{k+1} = x^k - beta_k grad h(x^k). Sample k (t = k) carries h, grad_norm,
/// beta (the step leaving x^k) and dist = |x^k - x_bar| when x_bar is known.
inline SolverRun gradient_descent(const FunctionOracle& oracle, const GDConfig& config,
                                  std::optional<Point> x_bar = std::nullopt) {
  config.validate();
  require(config.x0.size() == oracle.dim, ErrorKind::InvalidParameter, "x0 dimension mismatch");
  require(oracle.domain.contains(config.x0), ErrorKind::DomainViolation, "x0 outside the domain");
  if (!x_bar) x_bar = oracle.known_minimizer;
  require(!config.stop_radius || x_bar.has_value(), ErrorKind::MissingMinimizer, "stop radius needs a minimizer");

  SolverRun run;
  Trajectory& traj = run.trajectory;
  traj.x_bar = x_bar;
  if (x_bar) traj.h_star = oracle.value(*x_bar);

  Point x = config.x0;
  for (std::size_t k = 0;; ++k) {
    const Point g = oracle.gradient(x);
    const double beta = step_at(config.step_rule, k);
    TrajectorySample s;
    s.t = static_cast<double>(k);
    s.state = x;
    s.h = oracle.value(x);
    s.grad_norm = g.norm();
    s.diagnostics["beta"] = beta;
    if (x_bar) s.diagnostics["dist"] = (x - *x_bar).norm();
    traj.append(std::move(s));
    run.iterations = k;

    if (traj.back().grad_norm <= config.stop_grad_tol) {
      run.stop_reason = StopReason::GradientTolerance;
      break;
    }
    if (config.stop_radius && traj.back().diagnostics.at("dist") <= *config.stop_radius) {
      run.stop_reason = StopReason::Radius;
      break;
    }
    if (k == config.max_iters) {
      run.stop_reason = StopReason::MaxIterations;
      break;
    }
    Point next = x - beta * g;
    detail::check_iterate(oracle, next, k + 1);
    if (detail::bitwise_equal(next, x)) {
      run.stop_reason = StopReason::FixedPoint;
      break;
    }
    x = std::move(next);
  }
  return run;
}

/// x_{k+1} = x_k + theta (x_k - x_{k-1}) - beta grad h(x_k). Sample k carries
/// h, grad_norm, step_norm = |x_k - x_{k-1}| and, when h* is known,
/// E = h(x_k) - h* + theta^2/(2 beta) |x_k - x_{k-1}|^2.
inline SolverRun heavy_ball(const FunctionOracle& oracle, const HBConfig& config,
                            std::optional<Point> x_bar = std::nullopt) {
  config.validate();
  require(config.x0.size() == oracle.dim, ErrorKind::InvalidParameter, "x0 dimension mismatch");
  require(oracle.domain.contains(config.x0), ErrorKind::DomainViolation, "x0 outside the domain");
  if (config.x_prev)
    require(oracle.domain.contains(*config.x_prev), ErrorKind::DomainViolation, "x_prev outside the domain");
  if (oracle.known_lipschitz)
    require(config.beta <= (1.0 - config.theta * config.theta) / *oracle.known_lipschitz,
            ErrorKind::ParameterWindowViolation, "beta exceeds (1 - theta^2) / L");
  if (!x_bar) x_bar = oracle.known_minimizer;

  SolverRun run;
  Trajectory& traj = run.trajectory;
  traj.x_bar = x_bar;
  if (x_bar) traj.h_star = oracle.value(*x_bar);

  const double theta = config.theta;
  const double beta = config.beta;
  Point x_prev = config.x_prev.value_or(config.x0);
  Point x = config.x0;
  for (std::size_t k = 0;; ++k) {
    const Point g = oracle.gradient(x);
    const double step = (x - x_prev).norm();
    TrajectorySample s;
    s.t = static_cast<double>(k);
    s.state = x;
    s.h = oracle.value(x);
    s.grad_norm = g.norm();
    s.diagnostics["step_norm"] = step;
    if (traj.h_star) s.diagnostics["E"] = s.h - *traj.h_star + theta * theta / (2.0 * beta) * step * step;
    if (x_bar) s.diagnostics["dist"] = (x - *x_bar).norm();
    traj.append(std::move(s));
    run.iterations = k;

    // A vanishing gradient alone does not stop the recursion while momentum remains.
    if (traj.back().grad_norm <= config.stop_grad_tol && step <= config.stop_grad_tol) {
      run.stop_reason = StopReason::GradientTolerance;
      break;
    }
    if (k == config.max_iters) {
      run.stop_reason = StopReason::MaxIterations;
      break;
    }
    Point next = x + theta * (x - x_prev) - beta * g;
    detail::check_iterate(oracle, next, k + 1);
    if (detail::bitwise_equal(next, x) && detail::bitwise_equal(x, x_prev)) {
      run.stop_reason = StopReason::FixedPoint;
      break;
    }
    x_prev = std::move(x);
    x = std::move(next);
  }
  return run;
}

// ----------------------------------------------------------------------------
// Certificates
// ----------------------------------------------------------------------------

namespace detail {

inline std::vector<double> steps_of(const Trajectory& traj) {
  require(traj.has("beta"), ErrorKind::InvalidParameter, "trajectory carries no step record");
  return traj.column("beta");
}

inline double fit_factor_or_nan(const std::vector<double>& values) {
  std::vector<double> v;
  for (double x : values) {
    if (!(x > 0.0) || !std::isfinite(x)) break;
    v.push_back(x);
  }
  if (v.size() < 3) return std::nan("");
  return fit_linear_rate(v);
}

inline const Point& require_x_bar(const Trajectory& traj, const std::optional<Point>& x_bar) {
  if (x_bar) return *x_bar;
  if (traj.x_bar) return *traj.x_bar;
  throw Error(ErrorKind::MissingMinimizer, "certificate needs a minimizer");
}

}  // namespace detail

/// Per-step check |x^{k+1} - x_bar|^2 <= (1 - beta_k (gamma - beta_k L0^2)) |x^k - x_bar|^2
/// and overall squared factor q^2 = 1 - beta_lo (gamma - beta_hi L0^2) against the
/// fitted squared-distance factor.
inline RateCertificate certify_gd_contraction(const Trajectory& traj, double gamma, double L0,
                                              const std::optional<Point>& x_bar_in = std::nullopt) {
  require(gamma > 0.0 && L0 > 0.0, ErrorKind::InvalidParameter, "gamma and L0 must be positive");
  require(traj.size() >= 1, ErrorKind::InvalidParameter, "empty trajectory");
  const Point& x_bar = detail::require_x_bar(traj, x_bar_in);
  const auto betas = detail::steps_of(traj);
  const std::size_t n_steps = traj.size() - 1;
  double lo = betas.front(), hi = betas.front();
  for (std::size_t k = 0; k < std::max<std::size_t>(n_steps, 1); ++k) {
    lo = std::min(lo, betas[k]);
    hi = std::max(hi, betas[k]);
  }
  const double cap = gd_step_cap(gamma, L0);
  if (!(hi < cap) || !(lo > 0.0))
    throw Error(ErrorKind::ParameterWindowViolation,
                "steps must satisfy 0 < beta_k < min{gamma/L0^2, 2/L0} = " + std::to_string(cap));

  RateCertificate cert;
  cert.kind = CertificateKind::GdContraction;
  cert.label = "|x^{k+1}-x_bar|^2 <= (1 - beta_k (gamma - beta_k L0^2)) |x^k-x_bar|^2";
  cert.reference_based = traj.reference_based;
  const double q2 = 1.0 - lo * (gamma - hi * L0 * L0);
  cert.theoretical_rate = q2;
  cert.constants = {{"gamma", gamma}, {"L0", L0}, {"beta_lower", lo}, {"beta_upper", hi},
                    {"q", std::sqrt(q2)}, {"q_squared", q2}};

  std::vector<double> d2;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto& s = traj[k];
    if (!detail::above_floor(traj, s)) break;
    d2.push_back((s.state - x_bar).squaredNorm());
  }
  for (std::size_t k = 0; k < d2.size() && k + 1 < traj.size(); ++k) {
    const double lhs = (traj[k + 1].state - x_bar).squaredNorm();
    const double factor = 1.0 - betas[k] * (gamma - betas[k] * L0 * L0);
    ++cert.checks;
    if (lhs > factor * d2[k] * (1.0 + kRateSlack) + ineq_tol(lhs, factor * d2[k]) && !cert.first_violation)
      cert.first_violation = static_cast<double>(k + 1);
  }
  cert.empirical_rate = detail::fit_factor_or_nan(d2);
  cert.satisfied = !cert.first_violation && cert.rate_within_bound();
  return cert;
}

/// Function-value envelopes for k >= 1:
///   h(x^k) - h* <= (1 - gamma^2/(4 L0^2))^{k-1} |x^0 - x_bar|^2
///   h(x^k) - h* <= (1 - (gamma^3/(4 L0^3))(1 - gamma/(4 L0)))^{k-1} (h(x^0) - h*)
inline RateCertificate certify_gd_values(const Trajectory& traj, double gamma, double L0,
                                         const std::optional<Point>& x_bar_in = std::nullopt) {
  require(gamma > 0.0 && L0 > 0.0, ErrorKind::InvalidParameter, "gamma and L0 must be positive");
  const Point& x_bar = detail::require_x_bar(traj, x_bar_in);
  require(traj.h_star.has_value(), ErrorKind::MissingMinimizer, "trajectory carries no optimal value");
  if (!(gamma < 2.0 * L0))
    throw Error(ErrorKind::ParameterWindowViolation, "value rates need gamma < 2 L0");
  const auto betas = detail::steps_of(traj);
  for (std::size_t k = 0; k + 1 < traj.size(); ++k)
    if (!(betas[k] < gamma / (L0 * L0)))
      throw Error(ErrorKind::ParameterWindowViolation, "value rates need beta_k < gamma / L0^2");

  RateCertificate cert;
  cert.kind = CertificateKind::GdValue;
  cert.label = "h(x^k)-h* <= min of the distance- and value-based envelopes";
  cert.reference_based = traj.reference_based;
  const double a = 1.0 - gamma * gamma / (4.0 * L0 * L0);
  const double b = 1.0 - gamma * gamma * gamma / (4.0 * L0 * L0 * L0) * (1.0 - gamma / (4.0 * L0));
  const double h_star = *traj.h_star;
  const double d0_sq = (traj.front().state - x_bar).squaredNorm();
  const double gap0 = traj.front().h - h_star;
  cert.theoretical_rate = std::min(a, b);
  cert.constants = {{"gamma", gamma}, {"L0", L0}, {"factor_distance", a}, {"factor_value", b},
                    {"d0_squared", d0_sq}, {"h0_gap", gap0}};

  std::vector<double> gaps;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto& s = traj[k];
    if (!detail::above_floor(traj, s)) break;
    const double gap = s.h - h_star;
    gaps.push_back(gap);
    if (k == 0) continue;
    const double e = static_cast<double>(k - 1);
    const double bound_a = std::pow(a, e) * d0_sq;
    const double bound_b = std::pow(b, e) * gap0;
    cert.checks += 2;
    const bool ok = gap <= bound_a * (1.0 + kRateSlack) + ineq_tol(gap, bound_a) &&
                    gap <= bound_b * (1.0 + kRateSlack) + ineq_tol(gap, bound_b);
    if (!ok && !cert.first_violation) cert.first_violation = static_cast<double>(k);
  }
  cert.empirical_rate = detail::fit_factor_or_nan(gaps);
  cert.satisfied = !cert.first_violation && cert.rate_within_bound();
  return cert;
}

struct HeavyBallConstants {
  double rho = 0.0;
  double sigma = 0.0;
  double factor = 0.0;  // 1 - rho / sigma
};

/// rho = min{beta/2, (1 - beta L - theta^2)/(2 beta)}, sigma = max{2L/gamma^2 + beta, 1/beta}.
/// Only the strict interior rho > 0 is certified.
inline HeavyBallConstants heavy_ball_constants(double gamma, double L, double theta, double beta) {
  require(gamma > 0.0 && L > 0.0 && beta > 0.0, ErrorKind::InvalidParameter,
          "gamma, L and beta must be positive");
  require(theta > 0.0 && theta < 1.0, ErrorKind::InvalidParameter, "theta must lie in ]0, 1[");
  HeavyBallConstants c;
  c.rho = std::min(0.5 * beta, (1.0 - beta * L - theta * theta) / (2.0 * beta));
  c.sigma = std::max(2.0 * L / (gamma * gamma) + beta, 1.0 / beta);
  if (!(c.rho > 0.0))
    throw Error(ErrorKind::ParameterWindowViolation,
                "rho = " + std::to_string(c.rho) + " <= 0: need beta L + theta^2 < 1");
  c.factor = 1.0 - c.rho / c.sigma;
  return c;
}

/// Energy recursion E_{k+1} <= (1 - rho/sigma) E_k plus the four tail bounds
/// in terms of E_1 = h(x_0) - h* + theta^2/(2 beta) |x_1 - x_0|^2, checked for k >= 1.
inline RateCertificate certify_hb_energy(const Trajectory& traj, double gamma, double L, double theta,
                                         double beta, const std::optional<Point>& x_bar_in = std::nullopt) {
  const auto c = heavy_ball_constants(gamma, L, theta, beta);
  const Point& x_bar = detail::require_x_bar(traj, x_bar_in);
  require(traj.h_star.has_value() && traj.has("E"), ErrorKind::MissingMinimizer,
          "trajectory carries no energy");
  require(traj.size() >= 2, ErrorKind::InvalidParameter, "heavy-ball certificate needs two iterates");

  RateCertificate cert;
  cert.kind = CertificateKind::HbEnergy;
  cert.label = "E_{k+1} <= (1 - rho/sigma) E_k and tail bounds";
  cert.reference_based = traj.reference_based;
  cert.theoretical_rate = c.factor;
  const double h_star = *traj.h_star;
  const double w = theta * theta / (2.0 * beta);
  const double e1 = traj[0].h - h_star + w * (traj[1].state - traj[0].state).squaredNorm();
  cert.constants = {{"gamma", gamma}, {"L", L},         {"theta", theta},   {"beta", beta},
                    {"rho", c.rho},   {"sigma", c.sigma}, {"factor", c.factor}, {"E1", e1}};

  auto fail = [&](std::size_t k) {
    if (!cert.first_violation) cert.first_violation = static_cast<double>(k);
  };
  auto le = [](double lhs, double bound) {
    return lhs <= bound * (1.0 + kRateSlack) + ineq_tol(lhs, bound);
  };

  const auto E = traj.column("E");
  std::vector<double> energies;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (E[k] < kEnvelopeFloor) break;
    energies.push_back(E[k]);
    if (k + 1 < traj.size()) {
      ++cert.checks;
      if (!le(E[k + 1], c.factor * E[k])) fail(k + 1);
    }
  }
  const double root_e1 = std::sqrt(e1);
  for (std::size_t k = 1; k + 1 < traj.size(); ++k) {
    if (!detail::above_floor(traj, traj[k])) break;
    const double fk = std::pow(c.factor, static_cast<double>(k));
    const double fh = std::pow(c.factor, 0.5 * static_cast<double>(k - 1));
    const double gap_next = traj[k + 1].h - h_star;
    const double step_sq = (traj[k + 1].state - traj[k].state).squaredNorm();
    const double grad_bound = (1.0 + theta) / theta * fh * std::sqrt(2.0 / beta) * root_e1;
    const double dist_bound = 2.0 * (1.0 + theta) / (gamma * theta) * fh * std::sqrt(2.0 / beta) * root_e1;
    cert.checks += 4;
    if (!le(gap_next, fk * e1) || !le(step_sq, 2.0 * beta / (theta * theta) * fk * e1) ||
        !le(traj[k].grad_norm, grad_bound) || !le((traj[k].state - x_bar).norm(), dist_bound))
      fail(k);
  }
  cert.empirical_rate = detail::fit_factor_or_nan(energies);
  cert.satisfied = !cert.first_violation && cert.rate_within_bound();
  return cert;
}

}  // namespace sqcflow
