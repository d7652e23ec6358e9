#pragma once

// Ready-made oracles: nonconvex strongly quasiconvex examples, exact
// quadratic baselines, closure combinators (pointwise max, positive scaling)
// and a few counterexamples used to exercise the verifiers.

#include "sqcflow/core.hpp"
#include "sqcflow/sampling.hpp"

#include <Eigen/Eigenvalues>

#include <cstdint>
#include <numbers>
#include <sstream>

namespace sqcflow {

struct CatalogEntry {
  std::string name;
  FunctionOracle oracle;
  std::string provenance;
  /// Constants known in closed form: gamma, L, r, kappa, mu, ...
  std::map<std::string, double> constants_known;
  /// False when a construction premise could not be verified.
  bool premise_verified = true;
  std::vector<std::string> warnings;
  /// Negative examples: not strongly quasiconvex by construction.
  bool counterexample = false;
};

namespace detail {

inline std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

inline double lambda_min(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double lambda_max(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

inline bool is_symmetric(const Matrix& s) {
  return s.rows() == s.cols() && (s - s.transpose()).norm() <= 1e-12 * (1.0 + s.norm());
}

inline void set_constant(CatalogEntry& e, const std::string& key, std::optional<double> v) {
  if (v) e.constants_known[key] = *v;
}

}  // namespace detail

// ----------------------------------------------------------------------------
// Diagonal quadratics
// ----------------------------------------------------------------------------

/// h(x) = 1/2 <D (x - c), x - c> with D = diag(diag) positive.
inline CatalogEntry diagonal_quadratic(const Point& diag, const Point& center, double sample_half_width = 2.0) {
  require(diag.size() >= 1 && diag.size() == center.size(), ErrorKind::InvalidParameter,
          "diagonal and center must have equal positive dimension");
  require((diag.array() > 0.0).all(), ErrorKind::InvalidParameter, "diagonal must be positive");
  const int n = static_cast<int>(diag.size());

  CatalogEntry e;
  e.name = "diagonal_quadratic";
  e.provenance = "exact baseline: diagonal positive definite quadratic";
  auto& o = e.oracle;
  o.name = e.name;
  o.dim = n;
  o.eval = [diag, center](const Point& x) {
    const Point d = x - center;
    return 0.5 * d.dot(diag.cwiseProduct(d));
  };
  o.grad = [diag, center](const Point& x) -> Point { return diag.cwiseProduct(x - center); };
  o.known_modulus = diag.minCoeff();
  o.known_lipschitz = diag.maxCoeff();
  o.known_minimizer = center;
  o.domain = DomainSpec::all_space(n);
  o.sample_region = DomainSpec::box(center.array() - sample_half_width, center.array() + sample_half_width);
  e.constants_known = {{"gamma", *o.known_modulus}, {"L", *o.known_lipschitz}, {"kappa", 1.0}};
  return e;
}

/// 1/2 <D x, x> with D diagonal, eigenvalues from gamma to L geometrically spaced.
inline CatalogEntry strongly_convex_quadratic(int dim, double gamma, double L) {
  require(dim >= 1, ErrorKind::InvalidParameter, "dimension must be positive");
  require(gamma > 0.0, ErrorKind::InvalidParameter, "gamma must be positive");
  require(gamma <= L, ErrorKind::InvalidParameter, "gamma must not exceed L");
  require(dim > 1 || gamma == L, ErrorKind::InvalidParameter,
          "a one-dimensional quadratic has a single eigenvalue: need gamma == L");
  Point diag(dim);
  for (int i = 0; i < dim; ++i) {
    const double frac = dim == 1 ? 0.0 : static_cast<double>(i) / (dim - 1);
    diag[i] = gamma * std::pow(L / gamma, frac);
  }
  diag[dim - 1] = L;
  auto e = diagonal_quadratic(diag, Point::Zero(dim));
  e.name = "strongly_convex_quadratic(" + std::to_string(dim) + "," + detail::fmt_num(gamma) + "," +
           detail::fmt_num(L) + ")";
  e.oracle.name = e.name;
  e.oracle.known_modulus = gamma;
  e.oracle.known_lipschitz = L;
  e.constants_known["gamma"] = gamma;
  e.constants_known["L"] = L;
  return e;
}

// ----------------------------------------------------------------------------
// Nonconvex strongly quasiconvex examples
// ----------------------------------------------------------------------------

/// Modulus of sqrt(||x||) on the ball B(0, r).
inline double sqrt_norm_modulus(double radius) {
  return 1.0 / (std::pow(5.0, 0.25) * std::pow(2.0, 1.25) * std::sqrt(radius));
}

/// h(x) = sqrt(||x||) on B(0, radius). Nonconvex; the gradient is undefined
/// at the origin, where the oracle raises DomainViolation.
inline CatalogEntry sqrt_norm(int dim, double radius) {
  require(dim >= 1, ErrorKind::InvalidParameter, "dimension must be positive");
  require(radius > 0.0, ErrorKind::InvalidParameter, "radius must be positive");
  constexpr double kOriginBall = 1e-12;

  CatalogEntry e;
  e.name = "sqrt_norm(" + std::to_string(dim) + "," + detail::fmt_num(radius) + ")";
  e.provenance = "square root of the Euclidean norm on a ball";
  auto& o = e.oracle;
  o.name = e.name;
  o.dim = dim;
  o.eval = [](const Point& x) { return std::sqrt(x.norm()); };
  o.grad = [](const Point& x) -> Point {
    const double r = x.norm();
    if (r < kOriginBall) throw Error(ErrorKind::DomainViolation, "sqrt_norm gradient undefined at the origin");
    return x / (2.0 * std::pow(r, 1.5));
  };
  o.known_modulus = sqrt_norm_modulus(radius);
  o.known_minimizer = Point::Zero(dim);
  o.domain = DomainSpec::ball(Point::Zero(dim), radius);
  o.nonsmooth_at = [](const Point& x) { return x.norm() < kOriginBall; };
  e.constants_known = {{"gamma", *o.known_modulus}, {"r", radius}};
  return e;
}

/// h(x) = x^2 + 3 sin^2 x: strongly quasiconvex, satisfies PL, not convex.
/// No closed-form modulus; the estimate module supplies one.
inline CatalogEntry sin_quadratic() {
  CatalogEntry e;
  e.name = "sin_quadratic";
  e.provenance = "x^2 + 3 sin^2 x, nonconvex with the PL property";
  auto& o = e.oracle;
  o.name = e.name;
  o.dim = 1;
  o.eval = [](const Point& x) {
    const double s = std::sin(x[0]);
    return x[0] * x[0] + 3.0 * s * s;
  };
  o.grad = [](const Point& x) -> Point {
    Point g(1);
    g[0] = 2.0 * x[0] + 3.0 * std::sin(2.0 * x[0]);
    return g;
  };
  o.known_minimizer = Point::Zero(1);
  o.domain = DomainSpec::all_space(1);
  o.sample_region = DomainSpec::cube(1, 3.0);
  return e;
}

struct QuadraticFractionParams {
  Matrix A;
  Point a;
  double alpha = 0.0;
  Matrix B;
  Point b;
  double beta = 1.0;
  double m = 0.5;
  double M = 1.0;
  /// Half-width of the sampling box when {m <= g <= M} is unbounded.
  double sample_half_width = 2.0;
  /// Points used to check the sign premise of f on K.
  int premise_samples = 2000;
  std::uint64_t seed = 7;
  /// Throw UnverifiedPremise instead of flagging the entry.
  bool strict = false;
};

/// h = f / g with f(x) = 1/2<Ax,x> + <a,x> + alpha and g(x) = 1/2<Bx,x> + <b,x> + beta
/// on K = {m <= g <= M}. Modulus lambda_min(A) / M under one of:
/// (a) B = 0; (b) f >= 0 on K and B negative semidefinite; (c) f <= 0 on K
/// and B positive semidefinite.
inline CatalogEntry quadratic_fraction(const QuadraticFractionParams& p) {
  const auto n = p.A.rows();
  require(n >= 1 && p.A.cols() == n && p.B.rows() == n && p.B.cols() == n && p.a.size() == n &&
              p.b.size() == n,
          ErrorKind::InvalidParameter, "quadratic_fraction dimensions are inconsistent");
  require(detail::is_symmetric(p.A) && detail::is_symmetric(p.B), ErrorKind::InvalidParameter,
          "A and B must be symmetric");
  require(0.0 < p.m && p.m < p.M, ErrorKind::InvalidParameter, "need 0 < m < M");
  const double lmin_a = detail::lambda_min(p.A);
  require(lmin_a > 0.0, ErrorKind::InvalidParameter, "A must be positive definite");

  const Matrix A = p.A, B = p.B;
  const Point a = p.a, b = p.b;
  const double alpha = p.alpha, beta = p.beta, m = p.m, M = p.M;
  auto f = [A, a, alpha](const Point& x) { return 0.5 * x.dot(A * x) + a.dot(x) + alpha; };
  auto g = [B, b, beta](const Point& x) { return 0.5 * x.dot(B * x) + b.dot(x) + beta; };

  CatalogEntry e;
  e.name = "quadratic_fraction";
  e.provenance = "ratio of quadratics on {m <= g <= M}";
  auto& o = e.oracle;
  o.name = e.name;
  o.dim = static_cast<int>(n);
  o.eval = [f, g](const Point& x) { return f(x) / g(x); };
  o.grad = [A, a, B, b, f, g](const Point& x) -> Point {
    const double fx = f(x), gx = g(x);
    return ((A * x + a) * gx - (B * x + b) * fx) / (gx * gx);
  };
  const std::string label = "m<=g<=M";
  auto in_k = [g, m, M](const Point& x) {
    const double gx = g(x);
    return gx >= m && gx <= M;
  };
  o.domain = DomainSpec::all_space(o.dim).restricted(in_k, label);

  // Bounding box of K: the ellipsoid {g <= M} when B is positive definite,
  // otherwise a fixed sampling cube.
  const bool b_zero = B.isZero(0.0);
  const double lmin_b = detail::lambda_min(B), lmax_b = detail::lambda_max(B);
  DomainSpec box = DomainSpec::cube(o.dim, p.sample_half_width);
  if (lmin_b > 0.0) {
    const Matrix binv = B.inverse();
    const Point c = -binv * b;
    const double slack = M - g(c);
    require(slack >= 0.0, ErrorKind::InvalidParameter, "K = {m <= g <= M} is empty");
    const Point half = (2.0 * slack * binv.diagonal().array()).sqrt();
    box = DomainSpec::box(c - half, c + half);
  }
  o.sample_region = box.restricted(in_k, label);

  // Premise (a) exactly; (b)/(c) by sampling the sign of f on K.
  std::string premise;
  if (b_zero) {
    premise = "a";
  } else {
    int nonneg = 0, nonpos = 0, seen = 0;
    for (int i = 0; i < p.premise_samples; ++i) {
      SampleStream s(p.seed, static_cast<std::uint64_t>(i));
      Point x;
      try {
        x = s.uniform_in(*o.sample_region);
      } catch (const Error&) {
        continue;
      }
      const double fx = f(x);
      ++seen;
      if (fx >= 0.0) ++nonneg;
      if (fx <= 0.0) ++nonpos;
    }
    if (seen > 0 && lmax_b <= 0.0 && nonneg == seen) premise = "b";
    else if (seen > 0 && lmin_b >= 0.0 && nonpos == seen) premise = "c";
  }

  const double gamma = lmin_a / M;
  e.constants_known["gamma_formula"] = gamma;
  if (premise.empty()) {
    if (p.strict)
      throw Error(ErrorKind::UnverifiedPremise, "none of the premises (a), (b), (c) could be verified");
    e.premise_verified = false;
    e.warnings.push_back("UnverifiedPremise: modulus formula not certified for these parameters");
  } else {
    o.known_modulus = gamma;
    e.constants_known["gamma"] = gamma;
    e.provenance += " (premise " + premise + ")";
  }

  // With B = 0 and b = 0 the function is the quadratic f / beta.
  if (b_zero && b.isZero(0.0) && m <= beta && beta <= M) {
    o.known_minimizer = Point(-A.ldlt().solve(a));
    o.known_lipschitz = detail::lambda_max(A) / beta;
    e.constants_known["L"] = *o.known_lipschitz;
  }
  return e;
}

/// The worked example: A = I, a = 0, alpha = 0, B = 0, b = 0, beta = 2, m = 1, M = 3,
/// i.e. h(x) = ||x||^2 / 4 with modulus 1/3.
inline CatalogEntry quadratic_fraction_example(int dim = 2) {
  QuadraticFractionParams p;
  p.A = Matrix::Identity(dim, dim);
  p.a = Point::Zero(dim);
  p.alpha = 0.0;
  p.B = Matrix::Zero(dim, dim);
  p.b = Point::Zero(dim);
  p.beta = 2.0;
  p.m = 1.0;
  p.M = 3.0;
  return quadratic_fraction(p);
}

// ----------------------------------------------------------------------------
// Combinators
// ----------------------------------------------------------------------------

/// max{h1, h2} with modulus min{gamma1, gamma2}. At ties (|h1 - h2| < 1e-12)
/// the gradient of the branch with the larger gradient norm is returned,
/// branch 1 winning exact norm ties.
inline CatalogEntry max_combine(const CatalogEntry& e1, const CatalogEntry& e2) {
  const auto& o1 = e1.oracle;
  const auto& o2 = e2.oracle;
  require(o1.dim == o2.dim, ErrorKind::InvalidParameter, "max_combine: dimension mismatch");
  constexpr double kTie = 1e-12;

  CatalogEntry e;
  e.name = "max(" + e1.name + "," + e2.name + ")";
  e.provenance = "pointwise maximum of two strongly quasiconvex functions";
  auto& o = e.oracle;
  o.name = e.name;
  o.dim = o1.dim;
  const auto f1 = o1.eval, f2 = o2.eval;
  const auto g1 = o1.grad, g2 = o2.grad;
  o.eval = [f1, f2](const Point& x) { return std::max(f1(x), f2(x)); };
  o.grad = [f1, f2, g1, g2](const Point& x) -> Point {
    const double v1 = f1(x), v2 = f2(x);
    if (std::abs(v1 - v2) < kTie) {
      Point a = g1(x), b = g2(x);
      return b.norm() > a.norm() ? b : a;
    }
    return v1 > v2 ? g1(x) : g2(x);
  };
  const auto ns1 = o1.nonsmooth_at, ns2 = o2.nonsmooth_at;
  o.nonsmooth_at = [f1, f2, ns1, ns2](const Point& x) {
    return std::abs(f1(x) - f2(x)) < kTie || (ns1 && ns1(x)) || (ns2 && ns2(x));
  };

  // Intersection of the domains: keep the bounded shape for sampling.
  const bool first_shape = o1.domain.bounded() || !o2.domain.bounded();
  const auto& shape = first_shape ? o1.domain : o2.domain;
  const auto other = first_shape ? o2.domain : o1.domain;
  o.domain = other.kind() == DomainSpec::Kind::AllSpace && !other.constrained()
                 ? shape
                 : shape.restricted([other](const Point& x) { return other.contains(x); },
                                    "second domain");
  const auto& region_src = first_shape ? o1 : o2;
  const auto other_dom = o.domain;
  o.sample_region = region_src.sampling_domain().restricted(
      [other_dom](const Point& x) { return other_dom.contains(x); }, "combined domain");

  if (o1.known_modulus && o2.known_modulus) {
    o.known_modulus = std::min(*o1.known_modulus, *o2.known_modulus);
    e.constants_known["gamma"] = *o.known_modulus;
  }
  e.premise_verified = e1.premise_verified && e2.premise_verified;
  e.counterexample = e1.counterexample || e2.counterexample;
  return e;
}

/// alpha * h with modulus alpha * gamma and Lipschitz constant alpha * L.
inline CatalogEntry scale_combine(const CatalogEntry& entry, double alpha) {
  require(alpha > 0.0 && std::isfinite(alpha), ErrorKind::InvalidParameter,
          "scale_combine: alpha must be positive");
  if (alpha == 1.0) return entry;
  CatalogEntry e = entry;
  e.name = detail::fmt_num(alpha) + "*" + entry.name;
  e.provenance = "positive multiple of " + entry.name;
  auto& o = e.oracle;
  o.name = e.name;
  const auto f = entry.oracle.eval;
  const auto g = entry.oracle.grad;
  o.eval = [f, alpha](const Point& x) { return alpha * f(x); };
  o.grad = [g, alpha](const Point& x) -> Point { return alpha * g(x); };
  if (o.known_modulus) o.known_modulus = alpha * *o.known_modulus;
  if (o.known_lipschitz) o.known_lipschitz = alpha * *o.known_lipschitz;
  for (const char* key : {"gamma", "gamma_formula", "L", "mu"}) {
    auto it = e.constants_known.find(key);
    if (it != e.constants_known.end()) it->second *= alpha;
  }
  return e;
}

// ----------------------------------------------------------------------------
// Counterexamples
// ----------------------------------------------------------------------------

/// h(x) = 1/2 g(x)^2 with g(x1, x2) = x1: PL holds (||grad h||^2 = 2 h) but
/// the minimizers form a line, so h is not strongly quasiconvex.
inline CatalogEntry nonunique_minimizer_example() {
  CatalogEntry e;
  e.name = "nonunique_minimizer";
  e.provenance = "least-squares residual of an underdetermined system (m=1 < n=2)";
  e.counterexample = true;
  auto& o = e.oracle;
  o.name = e.name;
  o.dim = 2;
  o.eval = [](const Point& x) { return 0.5 * x[0] * x[0]; };
  o.grad = [](const Point& x) -> Point {
    Point g = Point::Zero(2);
    g[0] = x[0];
    return g;
  };
  o.known_minimizer = Point::Zero(2);
  o.known_lipschitz = 1.0;
  o.domain = DomainSpec::all_space(2);
  o.sample_region = DomainSpec::cube(2, 2.0);
  e.constants_known = {{"mu", 1.0}, {"L", 1.0}};
  return e;
}

/// h(x) = <c, x>: quasiconvex, never strongly quasiconvex.
inline CatalogEntry linear_function(const Point& c, double sample_half_width = 2.0) {
  require(c.size() >= 1, ErrorKind::InvalidParameter, "coefficient vector must be non-empty");
  CatalogEntry e;
  e.name = "linear";
  e.provenance = "linear function";
  e.counterexample = true;
  auto& o = e.oracle;
  o.name = e.name;
  o.dim = static_cast<int>(c.size());
  o.eval = [c](const Point& x) { return c.dot(x); };
  o.grad = [c](const Point&) -> Point { return c; };
  o.domain = DomainSpec::all_space(o.dim);
  o.sample_region = DomainSpec::cube(o.dim, sample_half_width);
  return e;
}

/// h(x) = x^3 on [-1, 1]: monotone, hence quasiconvex in one dimension, but
/// flat at the inflection point.
inline CatalogEntry cubic_function() {
  CatalogEntry e;
  e.name = "cubic";
  e.provenance = "x^3 on [-1, 1]";
  e.counterexample = true;
  auto& o = e.oracle;
  o.name = e.name;
  o.dim = 1;
  o.eval = [](const Point& x) { return x[0] * x[0] * x[0]; };
  o.grad = [](const Point& x) -> Point {
    Point g(1);
    g[0] = 3.0 * x[0] * x[0];
    return g;
  };
  o.domain = DomainSpec::cube(1, 1.0);
  return e;
}

// ----------------------------------------------------------------------------
// Registry
// ----------------------------------------------------------------------------

inline const std::vector<std::string>& catalog_names() {
  static const std::vector<std::string> names = {
      "half_square",      "half_norm_sq_2d", "quadratic_2_1_4", "quadratic_3_1_4",
      "sqrt_norm_1d",     "sqrt_norm_2d",    "scaled_sqrt_norm", "quadratic_fraction",
      "max_quadratics",   "sin_quadratic",   "nonunique_minimizer", "linear",
      "cubic",
  };
  return names;
}

/// Builds a registered entry. The returned entry's name is the registry key.
inline CatalogEntry make_catalog_entry(const std::string& name) {
  CatalogEntry e;
  if (name == "half_square") {
    e = strongly_convex_quadratic(1, 1.0, 1.0);
  } else if (name == "half_norm_sq_2d") {
    e = strongly_convex_quadratic(2, 1.0, 1.0);
  } else if (name == "quadratic_2_1_4") {
    e = strongly_convex_quadratic(2, 1.0, 4.0);
  } else if (name == "quadratic_3_1_4") {
    e = strongly_convex_quadratic(3, 1.0, 4.0);
  } else if (name == "sqrt_norm_1d") {
    e = sqrt_norm(1, 1.0);
  } else if (name == "sqrt_norm_2d") {
    e = sqrt_norm(2, 1.0);
  } else if (name == "scaled_sqrt_norm") {
    e = scale_combine(sqrt_norm(2, 1.0), 2.0);
  } else if (name == "quadratic_fraction") {
    e = quadratic_fraction_example(2);
  } else if (name == "max_quadratics") {
    const Point one = Point::Ones(1);
    e = max_combine(diagonal_quadratic(one, Point::Zero(1)), diagonal_quadratic(one, one));
  } else if (name == "sin_quadratic") {
    e = sin_quadratic();
  } else if (name == "nonunique_minimizer") {
    e = nonunique_minimizer_example();
  } else if (name == "linear") {
    e = linear_function(Point::Ones(1));
  } else if (name == "cubic") {
    e = cubic_function();
  } else {
    throw Error(ErrorKind::InvalidParameter, "unknown catalog function '" + name + "'");
  }
  e.provenance = e.name + ": " + e.provenance;
  e.name = name;
  e.oracle.name = name;
  return e;
}

}  // namespace sqcflow
