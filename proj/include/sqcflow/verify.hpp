#pragma once

// Sampling-based checkers for convexity classes, monotonicity classes of the
// gradient and the implications between them. Sampling can only refute: a
// report "holds on samples", it never proves a property.
//
// Every inequality is written as lhs >= rhs. A sample violates it when
// lhs - rhs < -ineq_tol(lhs, rhs); the margin lhs - rhs is stored with the
// witness.

#include "sqcflow/core.hpp"
#include "sqcflow/sampling.hpp"

#include <array>
#include <cstdint>

namespace sqcflow {

struct SampleBudget {
  std::size_t pairs = 10000;
  std::size_t lambdas_per_pair = 2;
  std::uint64_t seed = 42;
};

struct Witness {
  Point x;
  Point y;
  std::optional<double> lambda;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
};

enum class Property {
  StrongQuasiconvexity,      // gamma = 0: quasiconvexity
  StrongConvexity,           // gamma = 0: convexity
  GradientCharacterization,  // h(x) <= h(y) => <grad h(y), x - y> <= -gamma/2 |y - x|^2
  NewMonotonicity,           // strict premise
  NewMonotonicityNonStrict,  // non-strict premise
  StrongPseudomonotonicity,
  StrongMonotonicity,        // gamma = 0: monotonicity
  SharpQuasiconvexity,
  PolyakLojasiewicz,
  QuasiStrongConvexity,
};

inline std::string property_name(Property p, double param) {
  const bool zero = param == 0.0;
  switch (p) {
    case Property::StrongQuasiconvexity: return zero ? "quasiconvexity" : "strong_quasiconvexity";
    case Property::StrongConvexity: return zero ? "convexity" : "strong_convexity";
    case Property::GradientCharacterization: return "gradient_characterization";
    case Property::NewMonotonicity: return zero ? "quasimonotonicity" : "new_monotonicity";
    case Property::NewMonotonicityNonStrict: return "new_monotonicity_nonstrict";
    case Property::StrongPseudomonotonicity: return zero ? "pseudomonotonicity" : "strong_pseudomonotonicity";
    case Property::StrongMonotonicity: return zero ? "monotonicity" : "strong_monotonicity";
    case Property::SharpQuasiconvexity: return "sharp_quasiconvexity";
    case Property::PolyakLojasiewicz: return "pl";
    case Property::QuasiStrongConvexity: return "quasi_strong_convexity";
  }
  return "unknown";
}

struct ClassReport {
  std::string property_name;
  double parameter = 0.0;
  bool holds_on_samples = true;
  /// First violations found, in sample order (capped at kMaxWitnesses).
  std::vector<Witness> violations;
  std::size_t violation_count = 0;
  std::size_t samples_tested = 0;
  /// Samples where an implication's premise was met.
  std::size_t premise_hits = 0;
};

inline constexpr std::size_t kMaxWitnesses = 32;

namespace detail {

enum class SampleShape { Point, Pair, PairWithLambda };

inline SampleShape shape_of(Property p) {
  switch (p) {
    case Property::StrongQuasiconvexity:
    case Property::StrongConvexity:
    case Property::SharpQuasiconvexity: return SampleShape::PairWithLambda;
    case Property::PolyakLojasiewicz:
    case Property::QuasiStrongConvexity: return SampleShape::Point;
    default: return SampleShape::Pair;
  }
}

inline bool needs_gradient(Property p) {
  return p != Property::StrongQuasiconvexity && p != Property::StrongConvexity;
}

inline bool needs_minimizer(Property p) {
  return p == Property::PolyakLojasiewicz || p == Property::QuasiStrongConvexity;
}

}  // namespace detail

/// Outcome of one sampled inequality: `applicable` is false when the premise
/// of an implication is not met or the sample leaves the domain.
struct Evaluation {
  bool applicable = false;
  double lhs = 0.0;
  double rhs = 0.0;

  double margin() const { return lhs - rhs; }
  bool violated() const { return applicable && margin() < -ineq_tol(lhs, rhs); }
};

/// Evaluates one sample of `property`. For point properties y is ignored and
/// x_bar must be supplied; lambda only matters for the interpolation
/// properties.
inline Evaluation evaluate_property(const FunctionOracle& oracle, Property property, double param,
                                    const Point& x, const Point& y, double lambda,
                                    const std::optional<Point>& x_bar = std::nullopt) {
  Evaluation ev;
  const double half = 0.5 * param;
  switch (property) {
    case Property::StrongQuasiconvexity:
    case Property::StrongConvexity:
    case Property::SharpQuasiconvexity: {
      const Point z = lambda * y + (1.0 - lambda) * x;
      if (!oracle.domain.contains(z)) return ev;
      if (property == Property::SharpQuasiconvexity) {
        const double p = oracle.gradient(y).dot(x - y);
        if (!(p >= -ineq_tol(p, 0.0))) return ev;
      }
      const double hx = oracle.value(x), hy = oracle.value(y);
      const double penalty = lambda * (1.0 - lambda) * half * (x - y).squaredNorm();
      const double base = property == Property::StrongConvexity ? lambda * hy + (1.0 - lambda) * hx
                                                                : std::max(hx, hy);
      ev = {true, base - penalty, oracle.value(z)};
      return ev;
    }
    case Property::GradientCharacterization: {
      // Premise h(x) <= h(y); callers order the pair.
      if (!(oracle.value(x) <= oracle.value(y))) return ev;
      ev = {true, -half * (y - x).squaredNorm(), oracle.gradient(y).dot(x - y)};
      return ev;
    }
    case Property::NewMonotonicity:
    case Property::NewMonotonicityNonStrict: {
      const double bound = -half * (y - x).squaredNorm();
      const double p = oracle.gradient(x).dot(y - x);
      const double tol = ineq_tol(p, bound);
      const bool premise = property == Property::NewMonotonicity ? p > bound + tol : p >= bound - tol;
      if (!premise) return ev;
      ev = {true, bound, oracle.gradient(y).dot(x - y)};
      return ev;
    }
    case Property::StrongPseudomonotonicity: {
      const double p = oracle.gradient(y).dot(x - y);
      if (!(p >= -ineq_tol(p, 0.0))) return ev;
      ev = {true, -param * (y - x).squaredNorm(), oracle.gradient(x).dot(y - x)};
      return ev;
    }
    case Property::StrongMonotonicity: {
      const Point d = y - x;
      ev = {true, (oracle.gradient(y) - oracle.gradient(x)).dot(d), param * d.squaredNorm()};
      return ev;
    }
    case Property::PolyakLojasiewicz: {
      require(x_bar.has_value(), ErrorKind::MissingMinimizer, "PL check needs a minimizer");
      const double gap = oracle.value(x) - oracle.value(*x_bar);
      ev = {true, oracle.gradient(x).squaredNorm(), param * gap};
      return ev;
    }
    case Property::QuasiStrongConvexity: {
      require(x_bar.has_value(), ErrorKind::MissingMinimizer, "quasi-strong convexity needs a minimizer");
      const Point d = x - *x_bar;
      const double gap = oracle.value(x) - oracle.value(*x_bar);
      ev = {true, oracle.gradient(x).dot(d), gap + half * d.squaredNorm()};
      return ev;
    }
  }
  return ev;
}

/// Generic sampled check of one property over the oracle's sampling domain.
/// Sample i uses stream (seed, i), so reports are reproducible and samples
/// can be regenerated independently.
inline ClassReport check_property(const FunctionOracle& oracle, Property property, double param,
                                  const SampleBudget& budget,
                                  std::optional<Point> x_bar = std::nullopt) {
  require(budget.pairs >= 1 && budget.lambdas_per_pair >= 1, ErrorKind::InvalidParameter,
          "sample budget needs at least one pair and one lambda");
  require(param >= 0.0 && std::isfinite(param), ErrorKind::InvalidParameter,
          "property parameter must be finite and >= 0");
  if (detail::needs_minimizer(property)) {
    if (!x_bar) x_bar = oracle.known_minimizer;
    if (!x_bar) throw Error(ErrorKind::MissingMinimizer, property_name(property, param) + " needs a minimizer");
  }

  ClassReport report;
  report.property_name = property_name(property, param);
  report.parameter = param;

  const auto shape = detail::shape_of(property);
  const DomainSpec& region = oracle.sampling_domain();
  Predicate exclude;
  if (detail::needs_gradient(property) && oracle.nonsmooth_at) exclude = oracle.nonsmooth_at;

  auto record = [&](const Evaluation& ev, const Point& x, const Point& y, std::optional<double> lambda) {
    ++report.samples_tested;
    if (!ev.applicable) return;
    ++report.premise_hits;
    if (!ev.violated()) return;
    ++report.violation_count;
    if (report.violations.size() < kMaxWitnesses)
      report.violations.push_back({x, y, lambda, ev.lhs, ev.rhs, ev.margin()});
  };

  for (std::size_t i = 0; i < budget.pairs; ++i) {
    SampleStream stream(budget.seed, i);
    Point x = stream.uniform_in(region, exclude);
    if (shape == detail::SampleShape::Point) {
      record(evaluate_property(oracle, property, param, x, x, 0.0, x_bar), x, *x_bar, std::nullopt);
      continue;
    }
    Point y = stream.uniform_in(region, exclude);
    if (shape == detail::SampleShape::Pair) {
      if (property == Property::GradientCharacterization && oracle.value(x) > oracle.value(y))
        std::swap(x, y);
      record(evaluate_property(oracle, property, param, x, y, 0.0), x, y, std::nullopt);
      continue;
    }
    constexpr std::array<double, 3> kFixed = {0.0, 0.5, 1.0};
    for (std::size_t j = 0; j < kFixed.size() + budget.lambdas_per_pair; ++j) {
      const double lambda = j < kFixed.size() ? kFixed[j] : stream.uniform();
      record(evaluate_property(oracle, property, param, x, y, lambda), x, y, lambda);
    }
  }
  report.holds_on_samples = report.violation_count == 0;
  return report;
}

/// h(lambda y + (1-lambda) x) <= max{h(x), h(y)} - lambda(1-lambda) gamma/2 |x-y|^2.
/// gamma = 0 is plain quasiconvexity.
inline ClassReport check_strong_quasiconvexity(const FunctionOracle& oracle, double gamma,
                                               const SampleBudget& budget) {
  return check_property(oracle, Property::StrongQuasiconvexity, gamma, budget);
}

inline ClassReport check_strong_convexity(const FunctionOracle& oracle, double gamma,
                                          const SampleBudget& budget) {
  return check_property(oracle, Property::StrongConvexity, gamma, budget);
}

/// First-order characterization: h(x) <= h(y) implies
/// <grad h(y), x - y> <= -gamma/2 |y - x|^2.
inline ClassReport check_gradient_characterization(const FunctionOracle& oracle, double gamma,
                                                   const SampleBudget& budget) {
  return check_property(oracle, Property::GradientCharacterization, gamma, budget);
}

struct NewMonotonicityReports {
  ClassReport strict;
  ClassReport non_strict;
};

/// <grad h(x), y-x> > -gamma/2 |y-x|^2  implies  <grad h(y), x-y> <= -gamma/2 |y-x|^2,
/// together with the variant whose premise is non-strict. Boundary samples
/// (premise within tolerance of equality) only reach the non-strict report.
inline NewMonotonicityReports check_new_monotonicity(const FunctionOracle& oracle, double gamma,
                                                     const SampleBudget& budget) {
  return {check_property(oracle, Property::NewMonotonicity, gamma, budget),
          check_property(oracle, Property::NewMonotonicityNonStrict, gamma, budget)};
}

inline ClassReport check_strong_pseudomonotonicity(const FunctionOracle& oracle, double gamma_half,
                                                   const SampleBudget& budget) {
  return check_property(oracle, Property::StrongPseudomonotonicity, gamma_half, budget);
}

inline ClassReport check_strong_monotonicity(const FunctionOracle& oracle, double gamma,
                                             const SampleBudget& budget) {
  return check_property(oracle, Property::StrongMonotonicity, gamma, budget);
}

inline double derive_pl_modulus(double gamma, double L) {
  require(gamma > 0.0 && L > 0.0, ErrorKind::InvalidParameter, "gamma and L must be positive");
  return gamma * gamma / (2.0 * L);
}

/// ||grad h(x)||^2 >= mu (h(x) - h(x_bar)).
inline ClassReport check_pl(const FunctionOracle& oracle, double mu, const SampleBudget& budget,
                            std::optional<Point> x_bar = std::nullopt) {
  require(mu > 0.0, ErrorKind::InvalidParameter, "mu must be positive");
  return check_property(oracle, Property::PolyakLojasiewicz, mu, budget, std::move(x_bar));
}

/// <grad h(x), x - x_bar> >= h(x) - h(x_bar) + mu/2 |x - x_bar|^2.
inline ClassReport check_quasi_strong_convexity(const FunctionOracle& oracle, double mu,
                                                const SampleBudget& budget,
                                                std::optional<Point> x_bar = std::nullopt) {
  require(mu > 0.0, ErrorKind::InvalidParameter, "mu must be positive");
  return check_property(oracle, Property::QuasiStrongConvexity, mu, budget, std::move(x_bar));
}

/// Strong-quasiconvexity inequality required only where <grad h(y), x - y> >= 0.
inline ClassReport check_sharp_quasiconvexity(const FunctionOracle& oracle, double gamma,
                                              const SampleBudget& budget) {
  return check_property(oracle, Property::SharpQuasiconvexity, gamma, budget);
}

/// Re-evaluates a reported witness from scratch.
inline Evaluation reevaluate_witness(const FunctionOracle& oracle, Property property, double param,
                                     const Witness& w) {
  const std::optional<Point> x_bar =
      detail::needs_minimizer(property) ? std::optional<Point>(w.y) : std::nullopt;
  return evaluate_property(oracle, property, param, w.x, w.y, w.lambda.value_or(0.0), x_bar);
}

// ----------------------------------------------------------------------------
// Implication ladder
// ----------------------------------------------------------------------------

/// Runs every class check at modulus gamma and appends one report per
/// forward implication "A => B". An implication report fails only when A
/// holds on samples while B does not.
inline std::vector<ClassReport> check_implication_ladder(const FunctionOracle& oracle, double gamma,
                                                         const SampleBudget& budget) {
  require(gamma > 0.0, ErrorKind::InvalidParameter, "ladder modulus must be positive");
  std::vector<ClassReport> reports;
  auto add = [&](ClassReport r) {
    reports.push_back(std::move(r));
    return reports.size() - 1;
  };
  const auto strongly_convex = add(check_strong_convexity(oracle, gamma, budget));
  const auto convex = add(check_strong_convexity(oracle, 0.0, budget));
  const auto strongly_mon = add(check_strong_monotonicity(oracle, gamma, budget));
  const auto mon = add(check_strong_monotonicity(oracle, 0.0, budget));
  auto nm = check_new_monotonicity(oracle, gamma, budget);
  const auto new_mon = add(std::move(nm.strict));
  const auto new_mon_ns = add(std::move(nm.non_strict));
  const auto pseudo = add(check_strong_pseudomonotonicity(oracle, 0.5 * gamma, budget));
  const auto sqc = add(check_strong_quasiconvexity(oracle, gamma, budget));
  const auto gchar = add(check_gradient_characterization(oracle, gamma, budget));
  const auto sharp = add(check_sharp_quasiconvexity(oracle, gamma, budget));
  const auto qcx = add(check_strong_quasiconvexity(oracle, 0.0, budget));

  const std::vector<std::pair<std::size_t, std::size_t>> implications = {
      {strongly_convex, strongly_mon}, {strongly_mon, strongly_convex}, {strongly_mon, new_mon},
      {new_mon, pseudo},               {strongly_convex, sqc},          {sqc, sharp},
      {sqc, gchar},                    {gchar, sqc},                    {sqc, new_mon_ns},
      {new_mon_ns, new_mon},           {sharp, pseudo},                 {pseudo, sharp},
      {strongly_convex, convex},       {convex, qcx},                   {sqc, qcx},
      {strongly_mon, mon},
  };
  const std::size_t n_props = reports.size();
  for (const auto& [from, to] : implications) {
    const ClassReport& a = reports[from];
    const ClassReport& b = reports[to];
    ClassReport r;
    r.property_name = a.property_name + " => " + b.property_name;
    r.parameter = gamma;
    r.samples_tested = a.samples_tested + b.samples_tested;
    r.holds_on_samples = !(a.holds_on_samples && !b.holds_on_samples);
    if (!r.holds_on_samples) {
      r.violation_count = b.violation_count;
      r.violations = b.violations;
    }
    reports.push_back(std::move(r));
  }
  (void)n_props;
  return reports;
}

/// True when the report names an implication row of the ladder.
inline bool is_implication(const ClassReport& r) {
  return r.property_name.find(" => ") != std::string::npos;
}

}  // namespace sqcflow
