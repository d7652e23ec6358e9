#include "sqcflow/catalog.hpp"
#include "sqcflow/estimate.hpp"
#include "sqcflow/verify.hpp"

#include <gtest/gtest.h>

using namespace sqcflow;

namespace {

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

const SampleBudget kSmall{2000, 2, 42};

double sin_quadratic_gamma() {
  const auto e = sin_quadratic();
  return empirical_modulus(e.oracle, e.oracle.sampling_domain(), 10000, 42).safety_adjusted;
}

// Brute-force scan of all ordered pairs on an n-point grid of [-1, 1].
template <class Pred>
int grid_violations(int n, Pred&& violated) {
  int count = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double x = -1.0 + 2.0 * i / (n - 1), y = -1.0 + 2.0 * j / (n - 1);
      if (i != j && violated(x, y)) ++count;
    }
  return count;
}

void expect_witnesses_reproduce(const FunctionOracle& o, Property p, double param, const ClassReport& r) {
  for (const auto& w : r.violations) {
    const auto ev = reevaluate_witness(o, p, param, w);
    EXPECT_TRUE(ev.violated());
    EXPECT_DOUBLE_EQ(ev.margin(), w.margin);
    EXPECT_LT(w.margin, -ineq_tol(w.lhs, w.rhs));
  }
}

}  // namespace

TEST(PropertyNames, ZeroModulusUsesPlainName) {
  EXPECT_EQ(property_name(Property::StrongQuasiconvexity, 0.0), "quasiconvexity");
  EXPECT_EQ(property_name(Property::StrongConvexity, 0.0), "convexity");
  EXPECT_EQ(property_name(Property::StrongMonotonicity, 0.0), "monotonicity");
  EXPECT_NE(property_name(Property::StrongQuasiconvexity, 1.0), "quasiconvexity");
}

TEST(StrongQuasiconvexity, HalfSquareHolds) {
  const auto e = strongly_convex_quadratic(2, 1.0, 1.0);
  const auto r = check_strong_quasiconvexity(e.oracle, 1.0, SampleBudget{});
  EXPECT_TRUE(r.holds_on_samples);
  EXPECT_TRUE(r.violations.empty());
  EXPECT_EQ(r.samples_tested, 10000u * 5u);
}

TEST(StrongQuasiconvexity, FlatDirectionViolates) {
  const auto e = nonunique_minimizer_example();
  // x = (0,0), y = (0,1), lambda = 1/2: h(mid) = 0 > max - penalty = -0.0125
  const auto ev = evaluate_property(e.oracle, Property::StrongQuasiconvexity, 0.1, pt({0.0, 0.0}),
                                    pt({0.0, 1.0}), 0.5);
  EXPECT_TRUE(ev.violated());
  EXPECT_DOUBLE_EQ(ev.lhs, -0.0125);
  EXPECT_DOUBLE_EQ(ev.rhs, 0.0);

  const auto r = check_strong_quasiconvexity(e.oracle, 0.1, kSmall);
  EXPECT_FALSE(r.holds_on_samples);
  ASSERT_FALSE(r.violations.empty());
  EXPECT_LE(r.violations.size(), kMaxWitnesses);
  expect_witnesses_reproduce(e.oracle, Property::StrongQuasiconvexity, 0.1, r);
}

TEST(StrongQuasiconvexity, SqrtNormCatalogModulusHolds) {
  const auto e = sqrt_norm(1, 1.0);
  EXPECT_TRUE(check_strong_quasiconvexity(e.oracle, *e.oracle.known_modulus, SampleBudget{}).holds_on_samples);
}

TEST(StrongQuasiconvexity, Deterministic) {
  const auto e = make_catalog_entry("sqrt_norm_2d");
  const auto a = check_strong_quasiconvexity(e.oracle, 1.0, kSmall);
  const auto b = check_strong_quasiconvexity(e.oracle, 1.0, kSmall);
  EXPECT_FALSE(a.holds_on_samples);
  ASSERT_EQ(a.violations.size(), b.violations.size());
  EXPECT_EQ(a.violation_count, b.violation_count);
  for (std::size_t i = 0; i < a.violations.size(); ++i) {
    EXPECT_EQ(a.violations[i].x, b.violations[i].x);
    EXPECT_EQ(a.violations[i].y, b.violations[i].y);
    EXPECT_EQ(a.violations[i].lambda, b.violations[i].lambda);
    EXPECT_EQ(a.violations[i].margin, b.violations[i].margin);
  }
}

TEST(StrongQuasiconvexity, MonotoneInGamma) {
  for (const auto& name : catalog_names()) {
    const auto e = make_catalog_entry(name);
    for (double gamma : {2.0, 1.0, 0.5, 0.25}) {
      if (!check_strong_quasiconvexity(e.oracle, gamma, kSmall).holds_on_samples) continue;
      SCOPED_TRACE(name);
      for (double smaller : {0.5 * gamma, 0.1 * gamma, 0.0})
        EXPECT_TRUE(check_strong_quasiconvexity(e.oracle, smaller, kSmall).holds_on_samples) << smaller;
      break;
    }
  }
}

TEST(StrongQuasiconvexity, BudgetValidated) {
  const auto e = strongly_convex_quadratic(1, 1.0, 1.0);
  EXPECT_THROW(check_strong_quasiconvexity(e.oracle, 1.0, SampleBudget{0, 2, 1}), Error);
  EXPECT_THROW(check_strong_quasiconvexity(e.oracle, -1.0, kSmall), Error);
}

TEST(GradientCharacterization, Examples) {
  EXPECT_TRUE(check_gradient_characterization(make_catalog_entry("quadratic_2_1_4").oracle, 1.0, SampleBudget{})
                  .holds_on_samples);
  EXPECT_TRUE(check_gradient_characterization(sin_quadratic().oracle, sin_quadratic_gamma(), SampleBudget{})
                  .holds_on_samples);
}

TEST(GradientCharacterization, CubicViolatesNearInflection) {
  const auto e = cubic_function();
  const int grid = grid_violations(100, [](double x, double y) {
    if (!(x * x * x <= y * y * y)) return false;
    return 3.0 * y * y * (x - y) > -0.5 * (y - x) * (y - x) + 1e-9;
  });
  EXPECT_GT(grid, 0);
  const auto r = check_gradient_characterization(e.oracle, 1.0, SampleBudget{});
  EXPECT_FALSE(r.holds_on_samples);
  expect_witnesses_reproduce(e.oracle, Property::GradientCharacterization, 1.0, r);
  // Every witness has h(x) <= h(y).
  for (const auto& w : r.violations) EXPECT_LE(e.oracle.value(w.x), e.oracle.value(w.y));
}

TEST(NewMonotonicity, Examples) {
  const auto q = strongly_convex_quadratic(1, 1.0, 1.0);
  const auto r = check_new_monotonicity(q.oracle, 1.0, SampleBudget{});
  EXPECT_TRUE(r.strict.holds_on_samples);
  EXPECT_TRUE(r.non_strict.holds_on_samples);
  const auto s = check_new_monotonicity(sin_quadratic().oracle, 0.0, SampleBudget{});
  EXPECT_TRUE(s.strict.holds_on_samples);
  EXPECT_TRUE(s.non_strict.holds_on_samples);
}

TEST(NewMonotonicity, LinearViolates) {
  const auto e = linear_function(Point::Ones(1));
  // gamma = 3, x = 1, y = 0: premise <1, -1> = -1 > -1.5, conclusion <1, 1> = 1 > -1.5
  const auto ev = evaluate_property(e.oracle, Property::NewMonotonicity, 3.0, pt({1.0}), pt({0.0}), 0.0);
  EXPECT_TRUE(ev.violated());
  EXPECT_DOUBLE_EQ(ev.lhs, -1.5);
  EXPECT_DOUBLE_EQ(ev.rhs, 1.0);
  const auto r = check_new_monotonicity(e.oracle, 1.0, kSmall);
  EXPECT_FALSE(r.strict.holds_on_samples);
  expect_witnesses_reproduce(e.oracle, Property::NewMonotonicity, 1.0, r.strict);
}

TEST(NewMonotonicity, BoundaryPremiseOnlyInNonStrictVariant) {
  const auto e = linear_function(Point::Ones(1));
  // gamma = 2, x = 1, y = 0: premise -1 equals -gamma/2 |y-x|^2 exactly.
  const auto strict = evaluate_property(e.oracle, Property::NewMonotonicity, 2.0, pt({1.0}), pt({0.0}), 0.0);
  const auto non_strict =
      evaluate_property(e.oracle, Property::NewMonotonicityNonStrict, 2.0, pt({1.0}), pt({0.0}), 0.0);
  EXPECT_FALSE(strict.applicable);
  EXPECT_TRUE(non_strict.applicable);
  EXPECT_TRUE(non_strict.violated());
}

TEST(StrongPseudomonotonicity, Examples) {
  EXPECT_TRUE(check_strong_pseudomonotonicity(make_catalog_entry("quadratic_2_1_4").oracle, 0.5, SampleBudget{})
                  .holds_on_samples);
  const auto e = cubic_function();
  const int grid = grid_violations(100, [](double x, double y) {
    if (!(3.0 * y * y * (x - y) >= 0.0)) return false;
    return 3.0 * x * x * (y - x) > -0.5 * (y - x) * (y - x) + 1e-9;
  });
  EXPECT_GT(grid, 0);
  const auto r = check_strong_pseudomonotonicity(e.oracle, 0.5, SampleBudget{});
  EXPECT_FALSE(r.holds_on_samples);
  expect_witnesses_reproduce(e.oracle, Property::StrongPseudomonotonicity, 0.5, r);
}

TEST(StrongPseudomonotonicity, FollowsFromNewMonotonicity) {
  for (const auto& name : catalog_names()) {
    const auto e = make_catalog_entry(name);
    for (double gamma : {0.1, 0.5, 1.0}) {
      if (!check_new_monotonicity(e.oracle, gamma, kSmall).strict.holds_on_samples) continue;
      SCOPED_TRACE(name + " gamma=" + std::to_string(gamma));
      EXPECT_TRUE(check_strong_pseudomonotonicity(e.oracle, 0.5 * gamma, kSmall).holds_on_samples);
    }
  }
}

TEST(Pl, Examples) {
  EXPECT_DOUBLE_EQ(derive_pl_modulus(1.0, 1.0), 0.5);
  EXPECT_THROW(derive_pl_modulus(0.0, 1.0), Error);
  EXPECT_TRUE(check_pl(strongly_convex_quadratic(1, 1.0, 1.0).oracle, 0.5, SampleBudget{}).holds_on_samples);

  const auto s = sin_quadratic();
  const double L = estimate_lipschitz_sublevel(s.oracle, pt({3.0}), 2000, 42).safety_adjusted;
  const double mu = derive_pl_modulus(sin_quadratic_gamma(), L);
  EXPECT_TRUE(check_pl(s.oracle, mu, SampleBudget{}).holds_on_samples);
}

TEST(Pl, NonUniqueMinimizerIsPlButNotStronglyQuasiconvex) {
  const auto e = nonunique_minimizer_example();
  EXPECT_TRUE(check_pl(e.oracle, 1.0, SampleBudget{}).holds_on_samples);
  EXPECT_FALSE(check_strong_quasiconvexity(e.oracle, 0.1, SampleBudget{}).holds_on_samples);
}

TEST(Pl, MissingMinimizer) {
  const auto e = linear_function(Point::Ones(2));
  try {
    check_pl(e.oracle, 0.5, kSmall);
    FAIL() << "expected MissingMinimizer";
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::MissingMinimizer);
  }
  try {
    check_quasi_strong_convexity(e.oracle, 0.5, kSmall);
    FAIL() << "expected MissingMinimizer";
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::MissingMinimizer);
  }
}

TEST(QuasiStrongConvexity, Examples) {
  EXPECT_TRUE(check_quasi_strong_convexity(strongly_convex_quadratic(2, 1.0, 1.0).oracle, 1.0, SampleBudget{})
                  .holds_on_samples);
  const auto e = sqrt_norm(1, 1.0);
  const auto ev =
      evaluate_property(e.oracle, Property::QuasiStrongConvexity, 0.5, pt({0.81}), pt({0.81}), 0.0, pt({0.0}));
  EXPECT_NEAR(ev.lhs, 0.45, 1e-15);
  EXPECT_NEAR(ev.rhs, 0.9 + 0.25 * 0.6561, 1e-15);
  EXPECT_TRUE(ev.violated());
  const auto r = check_quasi_strong_convexity(e.oracle, 0.5, SampleBudget{});
  EXPECT_FALSE(r.holds_on_samples);
  expect_witnesses_reproduce(e.oracle, Property::QuasiStrongConvexity, 0.5, r);
}

TEST(QuasiStrongConvexity, ImpliesStrongQuasiconvexity) {
  for (const auto& name : catalog_names()) {
    const auto e = make_catalog_entry(name);
    if (!e.oracle.known_minimizer || e.counterexample) continue;
    for (double mu : {0.1, 0.5, 1.0}) {
      if (!check_quasi_strong_convexity(e.oracle, mu, kSmall).holds_on_samples) continue;
      SCOPED_TRACE(name + " mu=" + std::to_string(mu));
      EXPECT_TRUE(check_strong_quasiconvexity(e.oracle, mu, kSmall).holds_on_samples);
    }
  }
}

TEST(SharpQuasiconvexity, FollowsFromStrongQuasiconvexity) {
  for (const auto& name : catalog_names()) {
    const auto e = make_catalog_entry(name);
    for (double gamma : {0.0, 0.1, 0.5, 1.0}) {
      if (!check_strong_quasiconvexity(e.oracle, gamma, kSmall).holds_on_samples) continue;
      SCOPED_TRACE(name + " gamma=" + std::to_string(gamma));
      EXPECT_TRUE(check_sharp_quasiconvexity(e.oracle, gamma, kSmall).holds_on_samples);
    }
  }
}

TEST(SharpQuasiconvexity, AgreesWithPseudomonotonicityAtHalfModulus) {
  int compared = 0;
  for (const auto& name : catalog_names()) {
    const auto e = make_catalog_entry(name);
    const double gamma = e.oracle.known_modulus.value_or(1.0);
    SCOPED_TRACE(name);
    EXPECT_EQ(check_sharp_quasiconvexity(e.oracle, gamma, kSmall).holds_on_samples,
              check_strong_pseudomonotonicity(e.oracle, 0.5 * gamma, kSmall).holds_on_samples);
    ++compared;
  }
  EXPECT_GE(compared, 10);
}

TEST(Ladder, QuadraticPassesEverything) {
  const auto reports = check_implication_ladder(make_catalog_entry("quadratic_2_1_4").oracle, 1.0, kSmall);
  EXPECT_EQ(reports.size(), 27u);
  for (const auto& r : reports) EXPECT_TRUE(r.holds_on_samples) << r.property_name;
}

namespace {

const ClassReport& find(const std::vector<ClassReport>& reports, const std::string& name) {
  for (const auto& r : reports)
    if (r.property_name == name) return r;
  throw std::runtime_error("no report named " + name);
}

}  // namespace

TEST(Ladder, SqrtNormIsNotStronglyMonotone) {
  const auto e = sqrt_norm(1, 1.0);
  const double g = *e.oracle.known_modulus;
  const auto reports = check_implication_ladder(e.oracle, g, kSmall);
  EXPECT_TRUE(find(reports, property_name(Property::StrongQuasiconvexity, g)).holds_on_samples);
  EXPECT_TRUE(find(reports, property_name(Property::SharpQuasiconvexity, g)).holds_on_samples);
  EXPECT_TRUE(find(reports, property_name(Property::GradientCharacterization, g)).holds_on_samples);
  EXPECT_TRUE(find(reports, property_name(Property::StrongPseudomonotonicity, 0.5 * g)).holds_on_samples);
  const auto& sm = find(reports, property_name(Property::StrongMonotonicity, g));
  EXPECT_FALSE(sm.holds_on_samples);
  EXPECT_FALSE(sm.violations.empty());
  for (const auto& r : reports)
    if (is_implication(r)) EXPECT_TRUE(r.holds_on_samples) << r.property_name;
}

TEST(Ladder, SinQuadraticIsNotConvex) {
  const double g = sin_quadratic_gamma();
  const auto reports = check_implication_ladder(sin_quadratic().oracle, g, kSmall);
  EXPECT_TRUE(find(reports, property_name(Property::StrongQuasiconvexity, g)).holds_on_samples);
  EXPECT_FALSE(find(reports, property_name(Property::StrongConvexity, 0.0)).holds_on_samples);
}

TEST(Ladder, ForwardImplicationsHoldOnEveryEntry) {
  for (const auto& name : catalog_names()) {
    const auto e = make_catalog_entry(name);
    double gamma = 1.0;
    if (e.oracle.known_modulus) gamma = *e.oracle.known_modulus;
    else if (name == "sin_quadratic") gamma = sin_quadratic_gamma();
    SCOPED_TRACE(name);
    for (const auto& r : check_implication_ladder(e.oracle, gamma, kSmall))
      if (is_implication(r)) EXPECT_TRUE(r.holds_on_samples) << r.property_name;
  }
}

TEST(Witnesses, ReproduceForEveryFailingProperty) {
  const std::vector<std::pair<Property, double>> props = {
      {Property::StrongQuasiconvexity, 1.0}, {Property::StrongConvexity, 1.0},
      {Property::GradientCharacterization, 1.0}, {Property::NewMonotonicity, 1.0},
      {Property::NewMonotonicityNonStrict, 1.0}, {Property::StrongPseudomonotonicity, 0.5},
      {Property::StrongMonotonicity, 1.0}, {Property::SharpQuasiconvexity, 1.0},
      {Property::PolyakLojasiewicz, 3.0}, {Property::QuasiStrongConvexity, 1.0},
  };
  int failing = 0;
  for (const char* name : {"sqrt_norm_2d", "cubic", "linear", "nonunique_minimizer", "sin_quadratic"}) {
    const auto e = make_catalog_entry(name);
    for (const auto& [p, param] : props) {
      if (detail::needs_minimizer(p) && !e.oracle.known_minimizer) continue;
      const auto r = check_property(e.oracle, p, param, kSmall);
      EXPECT_EQ(r.holds_on_samples, r.violation_count == 0);
      if (!r.holds_on_samples) ++failing;
      SCOPED_TRACE(std::string(name) + " " + r.property_name);
      expect_witnesses_reproduce(e.oracle, p, param, r);
    }
  }
  EXPECT_GT(failing, 10);
}
