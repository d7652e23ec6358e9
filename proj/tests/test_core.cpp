#include "sqcflow/catalog.hpp"
#include "sqcflow/core.hpp"
#include "sqcflow/sampling.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace sqcflow;

namespace {

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an sqcflow::Error";
  return ErrorKind::InvalidParameter;
}

}  // namespace

TEST(Tolerances, IneqTolIsRelative) {
  EXPECT_DOUBLE_EQ(ineq_tol(0.0, 0.0), 1e-9);
  EXPECT_DOUBLE_EQ(ineq_tol(-2.0, 3.0), 6e-9);
}

TEST(Tolerances, GradZeroTolScalesWithMinimizer) {
  EXPECT_DOUBLE_EQ(grad_zero_tol(Point::Zero(2)), 1e-8);
  EXPECT_DOUBLE_EQ(grad_zero_tol(pt({3.0, 4.0})), 6e-8);
}

TEST(DomainSpec, BallMembershipIsExact) {
  const auto d = DomainSpec::ball(Point::Zero(2), 1.0);
  EXPECT_TRUE(d.contains(pt({1.0, 0.0})));
  EXPECT_TRUE(d.contains(pt({0.6, 0.8})));
  EXPECT_FALSE(d.contains(pt({1.0, 1e-6})));
  EXPECT_FALSE(d.contains(pt({0.5})));
}

TEST(DomainSpec, BoxMembershipIsExact) {
  const auto d = DomainSpec::box(pt({-1.0, 0.0}), pt({1.0, 2.0}));
  EXPECT_TRUE(d.contains(pt({-1.0, 2.0})));
  EXPECT_FALSE(d.contains(pt({-1.0, 2.0 + 1e-12})));
  EXPECT_FALSE(d.contains(pt({0.0, -1e-300})));
}

TEST(DomainSpec, RestrictedAddsPredicate) {
  const auto d = DomainSpec::cube(1, 2.0).restricted([](const Point& x) { return x[0] >= 0.5; }, "x>=0.5");
  EXPECT_TRUE(d.contains(pt({1.0})));
  EXPECT_FALSE(d.contains(pt({0.0})));
  EXPECT_TRUE(d.constrained());
}

TEST(DomainSpec, InvalidParametersRejected) {
  EXPECT_EQ(kind_of([] { DomainSpec::ball(Point::Zero(2), 0.0); }), ErrorKind::InvalidParameter);
  EXPECT_EQ(kind_of([] { DomainSpec::ball(Point::Zero(2), -1.0); }), ErrorKind::InvalidParameter);
  EXPECT_EQ(kind_of([] { DomainSpec::box(pt({1.0}), pt({0.0})); }), ErrorKind::InvalidParameter);
  EXPECT_EQ(kind_of([] { DomainSpec::all_space(0); }), ErrorKind::InvalidParameter);
}

TEST(Trajectory, TimesMustIncrease) {
  Trajectory t;
  t.append({0.0, pt({1.0}), 1.0, 1.0, {{"E", 1.0}}});
  t.append({0.5, pt({0.5}), 0.25, 0.5, {}});
  EXPECT_EQ(kind_of([&] { t.append({0.5, pt({0.1}), 0.0, 0.0, {}}); }), ErrorKind::InvalidParameter);
  EXPECT_EQ(t.size(), 2u);
  EXPECT_TRUE(t.has("E"));
  const auto col = t.column("E");
  ASSERT_EQ(col.size(), 2u);
  EXPECT_DOUBLE_EQ(col[0], 1.0);
  EXPECT_TRUE(std::isnan(col[1]));
}

TEST(RateCertificate, SlackDirectionDependsOnKind) {
  RateCertificate c;
  c.theoretical_rate = 0.5;
  c.empirical_rate = 0.52;
  EXPECT_TRUE(c.rate_within_bound());
  c.empirical_rate = 0.53;
  EXPECT_FALSE(c.rate_within_bound());
  c.continuous = true;
  c.theoretical_rate = 2.0;
  c.empirical_rate = 1.91;
  EXPECT_TRUE(c.rate_within_bound());
  c.empirical_rate = 1.89;
  EXPECT_FALSE(c.rate_within_bound());
  c.empirical_rate = std::nan("");
  EXPECT_TRUE(c.rate_within_bound());
}

TEST(FiniteDifference, HalfSquare) {
  const auto e = strongly_convex_quadratic(2, 1.0, 1.0);
  const Point g = finite_difference_gradient(e.oracle, pt({1.0, 0.0}), 1e-5);
  EXPECT_NEAR(g[0], 1.0, 1e-8);
  EXPECT_NEAR(g[1], 0.0, 1e-8);
}

TEST(FiniteDifference, SinQuadraticStationaryAtZero) {
  const auto e = sin_quadratic();
  EXPECT_NEAR(finite_difference_gradient(e.oracle, pt({0.0}), 1e-6)[0], 0.0, 1e-10);
}

TEST(FiniteDifference, SqrtNorm) {
  const auto e = sqrt_norm(1, 1.0);
  const double fd = finite_difference_gradient(e.oracle, pt({0.25}), 1e-6)[0];
  // d/dx sqrt(x) = 1 / (2 sqrt(x)) = 1 at x = 0.25
  EXPECT_NEAR(fd, 1.0, 1e-6);
  EXPECT_NEAR(e.oracle.gradient(pt({0.25}))[0], 1.0, 1e-15);
}

TEST(FiniteDifference, StencilLeavingDomainFails) {
  const auto e = sqrt_norm(1, 1.0);
  EXPECT_EQ(kind_of([&] { finite_difference_gradient(e.oracle, pt({1.0}), 1e-6); }), ErrorKind::DomainViolation);
  EXPECT_EQ(kind_of([&] { finite_difference_gradient(e.oracle, pt({0.5}), 0.0); }), ErrorKind::InvalidParameter);
}

TEST(FitLinearRate, Examples) {
  const std::vector<double> geo = {1.0, 0.5, 0.25, 0.125};
  EXPECT_NEAR(fit_linear_rate(geo), 0.5, 1e-14);
  const std::vector<double> flat = {1.0, 1.0, 1.0};
  EXPECT_NEAR(fit_linear_rate(flat), 1.0, 1e-15);
}

TEST(FitLinearRate, NoisyGeometric) {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> noise(-0.01, 0.01);
  std::vector<double> v;
  double x = 1.0;
  for (int k = 0; k < 50; ++k) {
    v.push_back(x * (1.0 + noise(rng)));
    x *= 0.9;
  }
  EXPECT_NEAR(fit_linear_rate(v), 0.9, 0.01);
}

TEST(FitLinearRate, Errors) {
  const std::vector<double> bad = {1.0, 0.0, 0.5};
  EXPECT_EQ(kind_of([&] { fit_linear_rate(bad); }), ErrorKind::NonPositiveSequence);
  const std::vector<double> neg = {1.0, -1.0, 0.5};
  EXPECT_EQ(kind_of([&] { fit_linear_rate(neg); }), ErrorKind::NonPositiveSequence);
  const std::vector<double> short_seq = {1.0, 0.5};
  EXPECT_EQ(kind_of([&] { fit_linear_rate(short_seq); }), ErrorKind::InvalidParameter);
}

TEST(FitLinearRate, ScaleInvariant) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(10), w(10);
    const double c = u(rng);
    for (std::size_t k = 0; k < v.size(); ++k) {
      v[k] = u(rng);
      w[k] = c * v[k];
    }
    EXPECT_NEAR(fit_linear_rate(w), fit_linear_rate(v), 1e-12 * fit_linear_rate(v));
  }
}

TEST(FitExponentialRate, ExactExponential) {
  std::vector<double> ts, vs;
  for (int i = 0; i <= 20; ++i) {
    ts.push_back(0.1 * i);
    vs.push_back(3.0 * std::exp(-2.0 * ts.back()));
  }
  EXPECT_NEAR(fit_exponential_rate(ts, vs), 2.0, 1e-12);
}

TEST(ValidateOracle, GradientMustVanishAtMinimizer) {
  auto e = strongly_convex_quadratic(2, 1.0, 4.0);
  EXPECT_NO_THROW(validate_oracle(e.oracle));
  e.oracle.known_minimizer = pt({1.0, 0.0});
  EXPECT_EQ(kind_of([&] { validate_oracle(e.oracle); }), ErrorKind::InvalidParameter);
}

TEST(ValidateOracle, AllCatalogEntriesValid) {
  for (const auto& name : catalog_names()) {
    SCOPED_TRACE(name);
    EXPECT_NO_THROW(validate_oracle(make_catalog_entry(name).oracle));
  }
}

TEST(SampleStream, Deterministic) {
  SampleStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  const double va = a.uniform();
  EXPECT_EQ(va, b.uniform());
  EXPECT_NE(va, c.uniform());
  EXPECT_NE(va, d.uniform());
}

TEST(SampleStream, UniformRangesAndDirections) {
  for (std::uint64_t i = 0; i < 1000; ++i) {
    SampleStream s(1, i);
    const double u = s.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_NEAR(s.direction(3).norm(), 1.0, 1e-14);
  }
}

TEST(SampleStream, UniformInStaysInDomain) {
  const auto ball = DomainSpec::ball(pt({1.0, -1.0}), 0.5);
  const auto box = DomainSpec::box(pt({0.0, 1.0}), pt({1.0, 3.0}));
  for (std::uint64_t i = 0; i < 500; ++i) {
    SampleStream s(9, i);
    EXPECT_TRUE(ball.contains(s.uniform_in(ball)));
    EXPECT_TRUE(box.contains(s.uniform_in(box)));
  }
}

TEST(SampleStream, SamplingFailures) {
  SampleStream s(1, 0);
  EXPECT_EQ(kind_of([&] { s.uniform_in(DomainSpec::all_space(2)); }), ErrorKind::DomainSamplingFailure);
  const auto empty = DomainSpec::cube(1, 1.0).restricted([](const Point&) { return false; }, "empty");
  EXPECT_EQ(kind_of([&] { s.uniform_in(empty); }), ErrorKind::DomainSamplingFailure);
}
