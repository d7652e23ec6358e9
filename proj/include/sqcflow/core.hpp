#pragma once

// Shared data model: points, domains, function oracles, trajectories and
// rate certificates. Everything here is immutable after construction and
// safe to share between threads.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sqcflow {

using Point = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ----------------------------------------------------------------------------
// Tolerances
// ----------------------------------------------------------------------------

/// Relative slack accepted when comparing an empirical rate against a bound.
inline constexpr double kRateSlack = 0.05;

/// Samples with h - h* below this floor are excluded from envelope checks.
inline constexpr double kEnvelopeFloor = 1e-12;

/// Gradient norm below which a point counts as stationary.
inline double grad_zero_tol(const Point& x_bar) { return 1e-8 * (1.0 + x_bar.norm()); }

/// Slack for the sampled inequalities. Applied one-sided: an inequality
/// lhs >= rhs is violated only when lhs - rhs < -ineq_tol(lhs, rhs).
inline double ineq_tol(double lhs, double rhs) {
  return 1e-9 * (1.0 + std::abs(lhs) + std::abs(rhs));
}

// ----------------------------------------------------------------------------
// Errors
// ----------------------------------------------------------------------------

enum class ErrorKind {
  InvalidParameter,
  DomainViolation,
  NonPositiveSequence,
  DomainSamplingFailure,
  MissingMinimizer,
  DomainExit,
  NumericalBlowup,
  ParameterWindowViolation,
  InsufficientSamples,
  StagnationFailure,
  UnverifiedPremise,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::DomainViolation: return "DomainViolation";
    case ErrorKind::NonPositiveSequence: return "NonPositiveSequence";
    case ErrorKind::DomainSamplingFailure: return "DomainSamplingFailure";
    case ErrorKind::MissingMinimizer: return "MissingMinimizer";
    case ErrorKind::DomainExit: return "DomainExit";
    case ErrorKind::NumericalBlowup: return "NumericalBlowup";
    case ErrorKind::ParameterWindowViolation: return "ParameterWindowViolation";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::StagnationFailure: return "StagnationFailure";
    case ErrorKind::UnverifiedPremise: return "UnverifiedPremise";
  }
  return "Unknown";
}

/// Error raised by every module. `at()` carries the time or iteration index
/// for failures that happen part-way through a run (DomainExit, NumericalBlowup).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::optional<double> at = std::nullopt)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), at_(at) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<double> at() const noexcept { return at_; }

 private:
  ErrorKind kind_;
  std::optional<double> at_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) throw Error(kind, what);
}

inline bool all_finite(const Point& x) { return x.allFinite(); }

// ----------------------------------------------------------------------------
// DomainSpec
// ----------------------------------------------------------------------------

using Predicate = std::function<bool(const Point&)>;

/// A convex region: all of R^n, a closed ball or a box. Extra membership
/// predicates can be attached for implicitly defined sets; they restrict the
/// set and are honoured by every sampler through rejection.
class DomainSpec {
 public:
  enum class Kind { AllSpace, Ball, Box };

  static DomainSpec all_space(int dim) {
    require(dim >= 1, ErrorKind::InvalidParameter, "dimension must be positive");
    DomainSpec d;
    d.kind_ = Kind::AllSpace;
    d.dim_ = dim;
    return d;
  }

  static DomainSpec ball(Point center, double radius) {
    require(center.size() >= 1, ErrorKind::InvalidParameter, "ball center must be non-empty");
    require(all_finite(center), ErrorKind::InvalidParameter, "ball center must be finite");
    require(radius > 0.0 && std::isfinite(radius), ErrorKind::InvalidParameter,
            "ball radius must be strictly positive");
    DomainSpec d;
    d.kind_ = Kind::Ball;
    d.dim_ = static_cast<int>(center.size());
    d.center_ = std::move(center);
    d.radius_ = radius;
    return d;
  }

  static DomainSpec box(Point lower, Point upper) {
    require(lower.size() >= 1 && lower.size() == upper.size(), ErrorKind::InvalidParameter,
            "box bounds must have equal, positive dimension");
    require(all_finite(lower) && all_finite(upper), ErrorKind::InvalidParameter,
            "box bounds must be finite");
    require((lower.array() <= upper.array()).all(), ErrorKind::InvalidParameter,
            "box lower bound exceeds upper bound");
    DomainSpec d;
    d.kind_ = Kind::Box;
    d.dim_ = static_cast<int>(lower.size());
    d.lower_ = std::move(lower);
    d.upper_ = std::move(upper);
    return d;
  }

  static DomainSpec cube(int dim, double half_width) {
    return box(Point::Constant(dim, -half_width), Point::Constant(dim, half_width));
  }

  /// Same region further restricted by `pred`.
  DomainSpec restricted(Predicate pred, std::string label) const {
    DomainSpec d = *this;
    d.constraints_.push_back(std::move(pred));
    d.labels_.push_back(std::move(label));
    return d;
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  bool bounded() const { return kind_ != Kind::AllSpace; }
  bool constrained() const { return !constraints_.empty(); }
  const Point& center() const { return center_; }
  double radius() const { return radius_; }
  const Point& lower() const { return lower_; }
  const Point& upper() const { return upper_; }
  const std::vector<std::string>& constraint_labels() const { return labels_; }

  bool contains(const Point& x) const {
    if (x.size() != dim_ || !all_finite(x)) return false;
    switch (kind_) {
      case Kind::AllSpace: break;
      case Kind::Ball:
        if ((x - center_).norm() > radius_) return false;
        break;
      case Kind::Box:
        if ((x.array() < lower_.array()).any() || (x.array() > upper_.array()).any()) return false;
        break;
    }
    return std::all_of(constraints_.begin(), constraints_.end(),
                       [&](const Predicate& p) { return p(x); });
  }

  std::string describe() const {
    std::string s;
    switch (kind_) {
      case Kind::AllSpace: s = "all_space"; break;
      case Kind::Ball: s = "ball"; break;
      case Kind::Box: s = "box"; break;
    }
    for (const auto& l : labels_) s += " & " + l;
    return s;
  }

 private:
  DomainSpec() = default;

  Kind kind_ = Kind::AllSpace;
  int dim_ = 0;
  Point center_;
  double radius_ = 0.0;
  Point lower_, upper_;
  std::vector<Predicate> constraints_;
  std::vector<std::string> labels_;
};

// ----------------------------------------------------------------------------
// FunctionOracle
// ----------------------------------------------------------------------------

/// Value and gradient of a function h on its domain, plus whatever constants
/// are known exactly. `sample_region` is where samplers draw points when the
/// domain itself is unbounded.
struct FunctionOracle {
  std::string name;
  int dim = 0;
  std::function<double(const Point&)> eval;
  std::function<Point(const Point&)> grad;
  std::optional<double> known_modulus;
  std::optional<double> known_lipschitz;
  std::optional<Point> known_minimizer;
  DomainSpec domain = DomainSpec::all_space(1);
  std::optional<DomainSpec> sample_region;
  /// Points where the gradient is not defined (excluded from sampled checks).
  Predicate nonsmooth_at;

  double value(const Point& x) const {
    require(x.size() == dim, ErrorKind::InvalidParameter, "point dimension mismatch");
    return eval(x);
  }

  Point gradient(const Point& x) const {
    require(x.size() == dim, ErrorKind::InvalidParameter, "point dimension mismatch");
    Point g = grad(x);
    require(g.size() == dim, ErrorKind::InvalidParameter, "gradient dimension mismatch");
    return g;
  }

  bool smooth_at(const Point& x) const { return !nonsmooth_at || !nonsmooth_at(x); }

  const DomainSpec& sampling_domain() const {
    return sample_region ? *sample_region : domain;
  }

  std::optional<double> optimal_value() const {
    if (!known_minimizer) return std::nullopt;
    return value(*known_minimizer);
  }
};

/// Checks the structural invariants of an oracle: matching dimensions and a
/// stationary known minimizer (where the gradient exists).
inline void validate_oracle(const FunctionOracle& oracle) {
  require(oracle.dim >= 1, ErrorKind::InvalidParameter, "oracle dimension must be positive");
  require(static_cast<bool>(oracle.eval) && static_cast<bool>(oracle.grad),
          ErrorKind::InvalidParameter, "oracle needs eval and grad");
  require(oracle.domain.dim() == oracle.dim, ErrorKind::InvalidParameter,
          "domain dimension does not match oracle");
  if (oracle.sample_region)
    require(oracle.sample_region->dim() == oracle.dim, ErrorKind::InvalidParameter,
            "sample region dimension does not match oracle");
  if (oracle.known_modulus)
    require(*oracle.known_modulus > 0.0, ErrorKind::InvalidParameter, "modulus must be positive");
  if (oracle.known_lipschitz)
    require(*oracle.known_lipschitz > 0.0, ErrorKind::InvalidParameter,
            "Lipschitz constant must be positive");
  if (oracle.known_minimizer) {
    const Point& xb = *oracle.known_minimizer;
    require(xb.size() == oracle.dim, ErrorKind::InvalidParameter, "minimizer dimension mismatch");
    if (oracle.smooth_at(xb)) {
      require(oracle.gradient(xb).norm() <= grad_zero_tol(xb), ErrorKind::InvalidParameter,
              "gradient does not vanish at the known minimizer");
    }
  }
}

// ----------------------------------------------------------------------------
// Trajectory
// ----------------------------------------------------------------------------

struct TrajectorySample {
  double t = 0.0;
  Point state;
  double h = 0.0;
  double grad_norm = 0.0;
  std::map<std::string, double> diagnostics;
};

/// Time- or iteration-indexed run record. The reference minimizer and
/// optimal value travel with the trajectory so certificates can use them.
class Trajectory {
 public:
  void append(TrajectorySample sample) {
    if (!samples_.empty() && !(sample.t > samples_.back().t))
      throw Error(ErrorKind::InvalidParameter, "trajectory times must be strictly increasing");
    if (sample.t < 0.0) throw Error(ErrorKind::InvalidParameter, "trajectory time must be >= 0");
    samples_.push_back(std::move(sample));
  }

  const std::vector<TrajectorySample>& samples() const { return samples_; }
  std::vector<TrajectorySample>& mutable_samples() { return samples_; }
  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  const TrajectorySample& front() const { return samples_.front(); }
  const TrajectorySample& back() const { return samples_.back(); }
  const TrajectorySample& operator[](std::size_t i) const { return samples_[i]; }

  bool has(const std::string& name) const {
    if (name == "h" || name == "grad_norm" || name == "t") return !samples_.empty();
    return !samples_.empty() && samples_.front().diagnostics.count(name) > 0;
  }

  /// Column by name: "t", "h", "grad_norm" or a diagnostic. Samples missing
  /// the diagnostic yield NaN.
  std::vector<double> column(const std::string& name) const {
    std::vector<double> out;
    out.reserve(samples_.size());
    for (const auto& s : samples_) {
      if (name == "t") out.push_back(s.t);
      else if (name == "h") out.push_back(s.h);
      else if (name == "grad_norm") out.push_back(s.grad_norm);
      else {
        auto it = s.diagnostics.find(name);
        out.push_back(it == s.diagnostics.end() ? std::nan("") : it->second);
      }
    }
    return out;
  }

  std::optional<Point> x_bar;
  std::optional<double> h_star;
  /// True when x_bar comes from a numerical reference run, not a known value.
  bool reference_based = false;

 private:
  std::vector<TrajectorySample> samples_;
};

namespace detail {

// Envelope checks skip samples this close to the optimal value.
inline bool above_floor(const Trajectory& traj, const TrajectorySample& s) {
  return !traj.h_star || s.h - *traj.h_star >= kEnvelopeFloor;
}

}  // namespace detail

// ----------------------------------------------------------------------------
// RateCertificate
// ----------------------------------------------------------------------------

enum class CertificateKind { GdContraction, GdValue, HbEnergy, FlowFirst, FlowSecond };

inline const char* to_string(CertificateKind kind) {
  switch (kind) {
    case CertificateKind::GdContraction: return "gd_contraction";
    case CertificateKind::GdValue: return "gd_value";
    case CertificateKind::HbEnergy: return "hb_energy";
    case CertificateKind::FlowFirst: return "flow_first";
    case CertificateKind::FlowSecond: return "flow_second";
  }
  return "unknown";
}

struct RateCertificate {
  CertificateKind kind = CertificateKind::GdContraction;
  std::string label;
  std::map<std::string, double> constants;
  /// Per-step factor in ]0,1[ for discrete methods, decay exponent for flows.
  double theoretical_rate = 0.0;
  double empirical_rate = std::nan("");
  bool continuous = false;
  bool satisfied = false;
  /// Time or iteration index of the first failed check.
  std::optional<double> first_violation;
  std::size_t checks = 0;
  bool reference_based = false;
  std::vector<std::string> notes;

  /// Whether the empirical rate is at least as good as the bound, with slack.
  /// A NaN empirical rate (too few informative samples) is not held against it.
  bool rate_within_bound() const {
    if (std::isnan(empirical_rate)) return true;
    return continuous ? empirical_rate >= theoretical_rate * (1.0 - kRateSlack)
                      : empirical_rate <= theoretical_rate * (1.0 + kRateSlack);
  }
};

// ----------------------------------------------------------------------------
// Finite differences and rate fitting
// ----------------------------------------------------------------------------

/// Central-difference gradient. Every perturbed point must lie in the domain.
inline Point finite_difference_gradient(const FunctionOracle& oracle, const Point& x, double step) {
  require(step > 0.0, ErrorKind::InvalidParameter, "finite-difference step must be positive");
  require(x.size() == oracle.dim, ErrorKind::InvalidParameter, "point dimension mismatch");
  Point g(oracle.dim);
  Point xp = x, xm = x;
  for (int i = 0; i < oracle.dim; ++i) {
    xp[i] = x[i] + step;
    xm[i] = x[i] - step;
    if (!oracle.domain.contains(xp) || !oracle.domain.contains(xm))
      throw Error(ErrorKind::DomainViolation, "finite-difference stencil leaves the domain");
    g[i] = (oracle.value(xp) - oracle.value(xm)) / (2.0 * step);
    xp[i] = x[i];
    xm[i] = x[i];
  }
  return g;
}

namespace detail {

// Least-squares slope of ys against xs.
inline double ls_slope(std::span<const double> xs, std::span<const double> ys) {
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

inline std::vector<double> checked_logs(std::span<const double> values) {
  require(values.size() >= 3, ErrorKind::InvalidParameter, "rate fit needs at least 3 values");
  std::vector<double> logs;
  logs.reserve(values.size());
  for (double v : values) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw Error(ErrorKind::NonPositiveSequence,
                  "rate fit needs strictly positive finite values (shift by h* first)");
    logs.push_back(std::log(v));
  }
  return logs;
}

}  // namespace detail

/// Per-step linear-convergence factor: exp of the least-squares slope of
/// log(values[k]) against k.
inline double fit_linear_rate(std::span<const double> values) {
  const auto logs = detail::checked_logs(values);
  std::vector<double> ks(values.size());
  for (std::size_t k = 0; k < ks.size(); ++k) ks[k] = static_cast<double>(k);
  return std::exp(detail::ls_slope(ks, logs));
}

/// Continuous analogue of fit_linear_rate: returns c in values ~ C e^{-c t}.
inline double fit_exponential_rate(std::span<const double> times, std::span<const double> values) {
  require(times.size() == values.size(), ErrorKind::InvalidParameter,
          "times and values differ in length");
  const auto logs = detail::checked_logs(values);
  return -detail::ls_slope(times, logs);
}

}  // namespace sqcflow
