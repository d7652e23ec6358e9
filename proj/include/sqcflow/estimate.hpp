#pragma once

// Empirical estimates of the constants the rate results take as given:
// sublevel-set Lipschitz constant, strong-quasiconvexity modulus, curvature
// ratio kappa and a reference minimizer. All are sampled, hence labelled as
// empirical wherever they are consumed.

#include "sqcflow/core.hpp"
#include "sqcflow/sampling.hpp"

#include <limits>

namespace sqcflow {

inline constexpr double kLipschitzSafety = 1.1;
inline constexpr double kModulusSafety = 0.95;

struct Estimate {
  double value = 0.0;            // raw sampled extremum
  double safety_adjusted = 0.0;  // value after the one-sided safety factor
  std::size_t samples = 0;       // informative samples used
};

namespace detail {

// Largest t in [0, t_out] with x + t d inside the set, by bisection. t = 0 is
// assumed inside.
template <class Inside>
double chord_end(const Point& x, const Point& d, Inside&& inside) {
  double t_in = 0.0, t_out = 1e-3;
  while (inside(Point(x + t_out * d))) {
    t_in = t_out;
    t_out *= 2.0;
    if (t_out > 1e8) throw Error(ErrorKind::DomainSamplingFailure, "sublevel set appears unbounded");
  }
  for (int i = 0; i < 60 && t_out - t_in > 1e-14 * (1.0 + t_out); ++i) {
    const double mid = 0.5 * (t_in + t_out);
    if (inside(Point(x + mid * d))) t_in = mid;
    else t_out = mid;
  }
  return t_in;
}

}  // namespace detail

/// Hit-and-run walk on S = {x in domain : h(x) <= h(x0)}. Even samples pair a
/// chain point with a nearby perturbation, odd samples pair consecutive chain
/// points. Step i only uses stream (seed, i), so a run with N samples is a
/// prefix of one with 2N. Returns max |grad h(x) - grad h(y)| / |x - y| with
/// safety factor 1.1.
inline Estimate estimate_lipschitz_sublevel(const FunctionOracle& oracle, const Point& x0, std::size_t samples,
                                            std::uint64_t seed) {
  require(samples >= 1, ErrorKind::InvalidParameter, "need at least one sample");
  require(x0.size() == oracle.dim && oracle.domain.contains(x0), ErrorKind::DomainViolation,
          "x0 must lie in the domain");
  const double level = oracle.value(x0);
  auto inside = [&](const Point& z) { return oracle.domain.contains(z) && oracle.value(z) <= level; };
  auto usable = [&](const Point& z) { return oracle.domain.contains(z) && oracle.smooth_at(z); };

  Point x = x0;
  Point prev = x0;
  double best = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    SampleStream stream(seed, i);
    const Point d = stream.direction(oracle.dim);
    const double t_hi = detail::chord_end(x, d, inside);
    const double t_lo = detail::chord_end(x, Point(-d), inside);
    prev = x;
    x = x + stream.uniform(-t_lo, t_hi) * d;
    if (!inside(x)) x = prev;  // bisection round-off at the boundary

    Point y;
    if (i % 2 == 0) {
      const double chord = t_hi + t_lo;
      y = x + 1e-4 * std::max(chord, 1e-8) * stream.direction(oracle.dim);
    } else {
      y = prev;
    }
    if (!usable(x) || !usable(y)) continue;
    const double dist = (x - y).norm();
    if (!(dist > 0.0)) continue;
    const double ratio = (oracle.gradient(x) - oracle.gradient(y)).norm() / dist;
    if (!std::isfinite(ratio)) continue;
    best = std::max(best, ratio);
    ++used;
  }
  if (used == 0 || !(best > 0.0))
    throw Error(ErrorKind::DomainSamplingFailure, "no informative pair in the sublevel set");
  return {best, kLipschitzSafety * best, used};
}

/// gamma_hat = min over sampled (x, y, lambda), lambda in [0.05, 0.95], of
/// 2 (max{h(x), h(y)} - h(lambda y + (1-lambda) x)) / (lambda (1-lambda) |x-y|^2),
/// clamped at 0; safety_adjusted is 0.95 gamma_hat.
inline Estimate empirical_modulus(const FunctionOracle& oracle, const DomainSpec& region, std::size_t samples,
                                  std::uint64_t seed) {
  require(region.dim() == oracle.dim, ErrorKind::InvalidParameter, "region dimension mismatch");
  double best = std::numeric_limits<double>::infinity();
  std::size_t valid = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    SampleStream stream(seed, i);
    const Point x = stream.uniform_in(region);
    const Point y = stream.uniform_in(region);
    const double lambda = stream.uniform(0.05, 0.95);
    const double dist_sq = (x - y).squaredNorm();
    if (!(dist_sq > 1e-24)) continue;
    const Point z = lambda * y + (1.0 - lambda) * x;
    if (!oracle.domain.contains(z)) continue;
    const double gap = std::max(oracle.value(x), oracle.value(y)) - oracle.value(z);
    best = std::min(best, 2.0 * gap / (lambda * (1.0 - lambda) * dist_sq));
    ++valid;
  }
  if (valid < 10)
    throw Error(ErrorKind::InsufficientSamples, "fewer than 10 valid triples (" + std::to_string(valid) + ")");
  best = std::max(best, 0.0);
  return {best, kModulusSafety * best, valid};
}

/// kappa_hat = 0.95 min over samples with h > h* + 1e-12 of
/// <grad h(x), x - x_bar> / (h(x) - h*).
inline Estimate estimate_kappa(const FunctionOracle& oracle, const Trajectory& traj, const Point& x_bar) {
  require(x_bar.size() == oracle.dim, ErrorKind::InvalidParameter, "x_bar dimension mismatch");
  const double h_star = oracle.value(x_bar);
  double best = std::numeric_limits<double>::infinity();
  std::size_t valid = 0;
  for (const auto& s : traj.samples()) {
    const double gap = s.h - h_star;
    if (!(gap > kEnvelopeFloor) || !oracle.smooth_at(s.state)) continue;
    best = std::min(best, oracle.gradient(s.state).dot(s.state - x_bar) / gap);
    ++valid;
  }
  if (valid == 0) throw Error(ErrorKind::InsufficientSamples, "no trajectory sample above the optimal value");
  return {best, kModulusSafety * best, valid};
}

struct ReferenceMinimizerOptions {
  double grad_tol = 1e-12;
  std::size_t max_iters = 1000000;
  std::size_t stagnation_window = 10000;
  /// Lipschitz constant for the step 1/(2 L); estimated from x0 when unset.
  std::optional<double> lipschitz;
  std::size_t lipschitz_samples = 2000;
  std::uint64_t seed = 42;
};

/// Long gradient run with the conservative step 1/(2 L_hat). Returns the best
/// iterate seen.
inline Point reference_minimizer(const FunctionOracle& oracle, const Point& x0,
                                 const ReferenceMinimizerOptions& opts = {}) {
  require(x0.size() == oracle.dim && oracle.domain.contains(x0), ErrorKind::DomainViolation,
          "x0 must lie in the domain");
  const double L = opts.lipschitz ? *opts.lipschitz
                   : oracle.known_lipschitz
                       ? *oracle.known_lipschitz
                       : estimate_lipschitz_sublevel(oracle, x0, opts.lipschitz_samples, opts.seed).safety_adjusted;
  require(L > 0.0 && std::isfinite(L), ErrorKind::InvalidParameter, "Lipschitz constant must be positive");
  const double beta = 1.0 / (2.0 * L);

  Point x = x0;
  Point best_x = x0;
  double best_h = oracle.value(x0);
  std::size_t since_improvement = 0;
  for (std::size_t k = 0; k < opts.max_iters; ++k) {
    if (!oracle.smooth_at(x)) break;
    const Point g = oracle.gradient(x);
    if (g.norm() <= opts.grad_tol) break;
    Point next = x - beta * g;
    if (!all_finite(next)) throw Error(ErrorKind::NumericalBlowup, "reference run diverged", static_cast<double>(k));
    if (!oracle.domain.contains(next)) throw Error(ErrorKind::DomainExit, "reference run left the domain", static_cast<double>(k));
    if (next == x) break;
    x = std::move(next);
    const double h = oracle.value(x);
    if (h < best_h) {
      best_h = h;
      best_x = x;
      since_improvement = 0;
    } else if (++since_improvement >= opts.stagnation_window) {
      throw Error(ErrorKind::StagnationFailure,
                  "no decrease over " + std::to_string(opts.stagnation_window) + " iterations");
    }
  }
  return best_x;
}

}  // namespace sqcflow
