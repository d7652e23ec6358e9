#pragma once

// Fixed-step integration of the gradient flow x' = -grad h(x) and the damped
// second-order flow x'' + alpha x' + grad h(x) = 0, with Lyapunov diagnostics
// and exponential-envelope certificates.

#include "sqcflow/core.hpp"

namespace sqcflow {

enum class FlowKind { FirstOrder, SecondOrder };
enum class Integrator { ExplicitEuler, Rk4 };

inline const char* to_string(Integrator i) { return i == Integrator::Rk4 ? "rk4" : "euler"; }

inline Integrator parse_integrator(const std::string& s) {
  if (s == "rk4") return Integrator::Rk4;
  if (s == "euler" || s == "explicit_euler") return Integrator::ExplicitEuler;
  throw Error(ErrorKind::InvalidParameter, "unknown integrator '" + s + "'");
}

struct FlowConfig {
  FlowKind kind = FlowKind::FirstOrder;
  double alpha = 0.0;  // second order only
  Point v0;            // second order only
  Point x0;
  double t_end = 1.0;
  double dt = 1e-3;
  Integrator integrator = Integrator::Rk4;
  /// Stop as soon as |x - x_bar| <= stop_radius (needs x_bar).
  std::optional<double> stop_radius;
  /// Keep every n-th step (the final state is always kept).
  std::size_t record_every = 1;

  void validate() const {
    require(x0.size() >= 1 && all_finite(x0), ErrorKind::InvalidParameter, "x0 must be a finite point");
    require(t_end > 0.0 && std::isfinite(t_end), ErrorKind::InvalidParameter, "t_end must be positive");
    require(dt > 0.0 && dt <= t_end, ErrorKind::InvalidParameter, "dt must lie in ]0, t_end]");
    require(record_every >= 1, ErrorKind::InvalidParameter, "record_every must be >= 1");
    if (stop_radius) require(*stop_radius > 0.0, ErrorKind::InvalidParameter, "stop radius must be positive");
    if (kind == FlowKind::SecondOrder) {
      require(alpha > 0.0 && std::isfinite(alpha), ErrorKind::InvalidParameter, "alpha must be positive");
      require(v0.size() == x0.size() && all_finite(v0), ErrorKind::InvalidParameter,
              "v0 must be finite with the dimension of x0");
    }
  }
};

/// Default step: 1e-3 * min{1, 1/L}.
inline double default_flow_dt(std::optional<double> L) {
  return 1e-3 * std::min(1.0, L && *L > 0.0 ? 1.0 / *L : 1.0);
}

struct LyapunovParams {
  double lambda = 0.0;
  double xi = 0.0;
  double kappa = 0.0;

  /// Checks xi = lambda^2 and lambda <= min{sqrt(gamma / (2 kappa)), 2 alpha / (kappa + 4)}.
  void validate(double gamma, double alpha) const {
    require(lambda > 0.0 && xi > 0.0 && kappa > 0.0, ErrorKind::InvalidParameter,
            "Lyapunov parameters must be positive");
    require(std::abs(xi - lambda * lambda) <= 1e-12 * (1.0 + xi), ErrorKind::InvalidParameter,
            "xi must equal lambda^2");
    const double cap = std::min(std::sqrt(gamma / (2.0 * kappa)), 2.0 * alpha / (kappa + 4.0));
    require(lambda <= cap * (1.0 + 1e-12), ErrorKind::ParameterWindowViolation,
            "lambda exceeds min{sqrt(gamma/(2 kappa)), 2 alpha/(kappa+4)}");
  }
};

/// Largest admissible lambda for (gamma, kappa, alpha), with xi = lambda^2.
inline LyapunovParams make_lyapunov_params(double gamma, double kappa, double alpha) {
  require(gamma > 0.0 && kappa > 0.0 && alpha > 0.0, ErrorKind::InvalidParameter,
          "gamma, kappa and alpha must be positive");
  const double lambda = std::min(std::sqrt(gamma / (2.0 * kappa)), 2.0 * alpha / (kappa + 4.0));
  return {lambda, lambda * lambda, kappa};
}

/// kappa = gamma / L when L is known.
inline double default_kappa(double gamma, double L) {
  require(gamma > 0.0 && L > 0.0, ErrorKind::InvalidParameter, "gamma and L must be positive");
  return gamma / L;
}

namespace detail {

// Integrates y' = f(y) with a fixed step, calling `observe(t, y)` on the
// initial state, every record_every-th step and the final state. `observe`
// returns false to stop early.
template <class Rhs, class Observe, class Check>
void integrate_fixed(Point y, const FlowConfig& cfg, Rhs&& f, Check&& check, Observe&& observe) {
  const auto steps = static_cast<std::size_t>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
  check(0.0, y);
  if (!observe(0.0, y)) return;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t0 = static_cast<double>(k) * cfg.dt;
    const double t1 = k + 1 == steps ? cfg.t_end : static_cast<double>(k + 1) * cfg.dt;
    const double h = t1 - t0;
    if (cfg.integrator == Integrator::ExplicitEuler) {
      y = y + h * f(t0, y);
    } else {
      const Point k1 = f(t0, y);
      const Point k2 = f(t0 + 0.5 * h, Point(y + 0.5 * h * k1));
      const Point k3 = f(t0 + 0.5 * h, Point(y + 0.5 * h * k2));
      const Point k4 = f(t1, Point(y + h * k3));
      y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    check(t1, y);
    const bool last = k + 1 == steps;
    if ((k + 1) % cfg.record_every == 0 || last) {
      if (!observe(t1, y)) return;
    }
  }
}

inline std::optional<Point> resolve_minimizer(const FunctionOracle& oracle, const std::optional<Point>& x_bar) {
  return x_bar ? x_bar : oracle.known_minimizer;
}

}  // namespace detail

/// Integrates x' = -grad h(x). Samples carry h, grad_norm and, when a
/// minimizer is known, E = |x - x_bar|^2 / 2.
inline Trajectory integrate_first_order(const FunctionOracle& oracle, const FlowConfig& config,
                                        const std::optional<Point>& x_bar_override = std::nullopt) {
  config.validate();
  require(config.kind == FlowKind::FirstOrder, ErrorKind::InvalidParameter, "config is not first order");
  require(config.x0.size() == oracle.dim, ErrorKind::InvalidParameter, "x0 dimension mismatch");
  require(oracle.domain.contains(config.x0), ErrorKind::DomainViolation, "x0 outside the domain");
  const auto x_bar = detail::resolve_minimizer(oracle, x_bar_override);
  require(!config.stop_radius || x_bar.has_value(), ErrorKind::MissingMinimizer,
          "stop radius needs a minimizer");

  Trajectory traj;
  traj.x_bar = x_bar;
  if (x_bar) traj.h_star = oracle.value(*x_bar);

  auto rhs = [&](double, const Point& x) -> Point { return -oracle.gradient(x); };
  auto check = [&](double t, const Point& x) {
    if (!all_finite(x)) throw Error(ErrorKind::NumericalBlowup, "non-finite flow state", t);
    if (!oracle.domain.contains(x)) throw Error(ErrorKind::DomainExit, "flow left the domain", t);
  };
  auto observe = [&](double t, const Point& x) {
    TrajectorySample s;
    s.t = t;
    s.state = x;
    s.h = oracle.value(x);
    s.grad_norm = oracle.gradient(x).norm();
    if (x_bar) s.diagnostics["E"] = 0.5 * (x - *x_bar).squaredNorm();
    traj.append(std::move(s));
    return !(config.stop_radius && (x - *x_bar).norm() <= *config.stop_radius);
  };
  detail::integrate_fixed(config.x0, config, rhs, check, observe);
  return traj;
}

/// Integrates the damped system as (x, v)' = (v, -alpha v - grad h(x)).
/// Samples store x and carry h, grad_norm, v_norm and the Lyapunov function
/// Sigma = h - h* + |lambda (x - x_bar) + v|^2 / 2 + xi/2 |x - x_bar|^2.
inline Trajectory integrate_second_order(const FunctionOracle& oracle, const FlowConfig& config,
                                         const LyapunovParams& lyap,
                                         const std::optional<Point>& x_bar_override = std::nullopt) {
  config.validate();
  require(config.kind == FlowKind::SecondOrder, ErrorKind::InvalidParameter, "config is not second order");
  require(config.x0.size() == oracle.dim, ErrorKind::InvalidParameter, "x0 dimension mismatch");
  require(oracle.domain.contains(config.x0), ErrorKind::DomainViolation, "x0 outside the domain");
  const auto x_bar = detail::resolve_minimizer(oracle, x_bar_override);
  if (!x_bar) throw Error(ErrorKind::MissingMinimizer, "second-order flow needs a minimizer for Sigma");

  const int n = oracle.dim;
  const double alpha = config.alpha;
  Trajectory traj;
  traj.x_bar = x_bar;
  traj.h_star = oracle.value(*x_bar);

  Point y(2 * n);
  y << config.x0, config.v0;
  auto rhs = [&](double, const Point& s) -> Point {
    Point out(2 * n);
    out.head(n) = s.tail(n);
    out.tail(n) = -alpha * s.tail(n) - oracle.gradient(s.head(n));
    return out;
  };
  auto check = [&](double t, const Point& s) {
    if (!all_finite(s)) throw Error(ErrorKind::NumericalBlowup, "non-finite flow state", t);
    if (!oracle.domain.contains(s.head(n))) throw Error(ErrorKind::DomainExit, "flow left the domain", t);
  };
  auto observe = [&](double t, const Point& s) {
    const Point x = s.head(n);
    const Point v = s.tail(n);
    const Point d = x - *x_bar;
    TrajectorySample smp;
    smp.t = t;
    smp.state = x;
    smp.h = oracle.value(x);
    smp.grad_norm = oracle.gradient(x).norm();
    smp.diagnostics["v_norm"] = v.norm();
    smp.diagnostics["Sigma"] = smp.h - *traj.h_star + 0.5 * (lyap.lambda * d + v).squaredNorm() +
                               0.5 * lyap.xi * d.squaredNorm();
    traj.append(std::move(smp));
    return !(config.stop_radius && d.norm() <= *config.stop_radius);
  };
  detail::integrate_fixed(std::move(y), config, rhs, check, observe);
  return traj;
}

namespace detail {

// Records a check lhs <= bound * (1 + slack) at time t.
inline void envelope_check(RateCertificate& cert, double t, double lhs, double bound) {
  ++cert.checks;
  if (lhs > bound * (1.0 + kRateSlack) && !cert.first_violation)
    cert.first_violation = t;
}

// Exponent fitted on samples (t, v) with v > 0; NaN when fewer than 3 remain.
inline double fit_exponent_or_nan(const std::vector<double>& ts, const std::vector<double>& vs) {
  std::vector<double> t2, v2;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (vs[i] > 0.0 && std::isfinite(vs[i])) {
      t2.push_back(ts[i]);
      v2.push_back(vs[i]);
    }
  }
  if (t2.size() < 3) return std::nan("");
  return fit_exponential_rate(t2, v2);
}

}  // namespace detail

/// Checks |x(t) - x_bar| <= |x0 - x_bar| e^{-gamma t / 2} (with rate slack) at
/// every sample and fits the decay exponent of |x(t) - x_bar|.
inline RateCertificate certify_first_order(const Trajectory& traj, double gamma, const Point& x_bar) {
  require(gamma > 0.0, ErrorKind::InvalidParameter, "gamma must be positive");
  require(!traj.empty(), ErrorKind::InvalidParameter, "empty trajectory");
  require(x_bar.size() == traj.front().state.size(), ErrorKind::InvalidParameter, "x_bar dimension mismatch");
  RateCertificate cert;
  cert.kind = CertificateKind::FlowFirst;
  cert.label = "distance envelope |x(t)-x_bar| <= |x0-x_bar| exp(-gamma t/2)";
  cert.continuous = true;
  cert.theoretical_rate = 0.5 * gamma;
  cert.reference_based = traj.reference_based;
  const double d0 = (traj.front().state - x_bar).norm();
  cert.constants = {{"gamma", gamma}, {"d0", d0}};

  std::vector<double> ts, ds;
  for (const auto& s : traj.samples()) {
    if (!detail::above_floor(traj, s)) continue;
    const double d = (s.state - x_bar).norm();
    detail::envelope_check(cert, s.t, d, d0 * std::exp(-0.5 * gamma * s.t));
    ts.push_back(s.t);
    ds.push_back(d);
  }
  cert.empirical_rate = detail::fit_exponent_or_nan(ts, ds);
  cert.satisfied = !cert.first_violation && cert.rate_within_bound();
  if (!cert.rate_within_bound()) cert.notes.push_back("fitted exponent below the theoretical exponent");
  return cert;
}

/// Checks h(x(t)) - h* <= min{(L/2)|x0 - x_bar| e^{-gamma t/2}, (h(x0) - h*) e^{-gamma^2 t/(2L)}}
/// for t >= T. T = 0 when no radius is given (L valid on the whole initial
/// sublevel set); otherwise T is the first sample with |x(t) - x_bar| <= radius.
inline RateCertificate certify_first_order_values(const Trajectory& traj, double gamma, double L,
                                                  const Point& x_bar,
                                                  std::optional<double> lipschitz_radius = std::nullopt) {
  require(gamma > 0.0 && L > 0.0, ErrorKind::InvalidParameter, "gamma and L must be positive");
  require(!traj.empty(), ErrorKind::InvalidParameter, "empty trajectory");
  require(x_bar.size() == traj.front().state.size(), ErrorKind::InvalidParameter, "x_bar dimension mismatch");
  RateCertificate cert;
  cert.kind = CertificateKind::FlowFirst;
  cert.label = "value envelope min{(L/2)|x0-x_bar| exp(-gamma t/2), (h0-h*) exp(-gamma^2 t/(2L))}";
  cert.continuous = true;
  cert.theoretical_rate = std::min(0.5 * gamma, gamma * gamma / (2.0 * L));
  cert.reference_based = traj.reference_based;

  const double h_star = traj.h_star.value_or(std::nan(""));
  require(std::isfinite(h_star), ErrorKind::MissingMinimizer, "trajectory carries no optimal value");
  const double d0 = (traj.front().state - x_bar).norm();
  const double gap0 = traj.front().h - h_star;

  double T = 0.0;
  if (lipschitz_radius) {
    T = std::nan("");
    for (const auto& s : traj.samples()) {
      if ((s.state - x_bar).norm() <= *lipschitz_radius) {
        T = s.t;
        break;
      }
    }
    if (std::isnan(T)) cert.notes.push_back("trajectory never entered the Lipschitz radius; nothing checked");
  }
  cert.constants = {{"gamma", gamma}, {"L", L}, {"d0", d0}, {"h0_gap", gap0}, {"T", T}};

  std::vector<double> ts, gaps;
  for (const auto& s : traj.samples()) {
    if (std::isnan(T) || s.t < T || !detail::above_floor(traj, s)) continue;
    const double gap = s.h - h_star;
    const double bound = std::min(0.5 * L * d0 * std::exp(-0.5 * gamma * s.t),
                                  gap0 * std::exp(-gamma * gamma * s.t / (2.0 * L)));
    detail::envelope_check(cert, s.t, gap, bound);
    ts.push_back(s.t);
    gaps.push_back(gap);
  }
  cert.empirical_rate = detail::fit_exponent_or_nan(ts, gaps);
  cert.satisfied = !cert.first_violation && cert.rate_within_bound();
  return cert;
}

/// Checks Sigma(t) <= Sigma(0) e^{-lambda kappa t / 2} (with rate slack).
inline RateCertificate certify_second_order(const Trajectory& traj, const LyapunovParams& lyap) {
  require(!traj.empty() && traj.has("Sigma"), ErrorKind::InvalidParameter,
          "trajectory carries no Sigma diagnostics");
  RateCertificate cert;
  cert.kind = CertificateKind::FlowSecond;
  cert.label = "Lyapunov envelope Sigma(t) <= Sigma(0) exp(-lambda kappa t/2)";
  cert.continuous = true;
  cert.theoretical_rate = 0.5 * lyap.lambda * lyap.kappa;
  cert.reference_based = traj.reference_based;
  const double sigma0 = traj.front().diagnostics.at("Sigma");
  cert.constants = {{"lambda", lyap.lambda}, {"xi", lyap.xi}, {"kappa", lyap.kappa}, {"Sigma0", sigma0}};

  std::vector<double> ts, sig;
  for (const auto& s : traj.samples()) {
    const double v = s.diagnostics.at("Sigma");
    if (v < kEnvelopeFloor) continue;
    detail::envelope_check(cert, s.t, v, sigma0 * std::exp(-cert.theoretical_rate * s.t));
    ts.push_back(s.t);
    sig.push_back(v);
  }
  cert.empirical_rate = detail::fit_exponent_or_nan(ts, sig);
  cert.satisfied = !cert.first_violation && cert.rate_within_bound();
  return cert;
}

}  // namespace sqcflow
