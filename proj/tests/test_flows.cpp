#include "sqcflow/catalog.hpp"
#include "sqcflow/estimate.hpp"
#include "sqcflow/flows.hpp"

#include <gtest/gtest.h>

using namespace sqcflow;

namespace {

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) p[i++] = x;
  return p;
}

FlowConfig first_order(Point x0, double t_end, double dt, Integrator integ = Integrator::Rk4) {
  FlowConfig c;
  c.x0 = std::move(x0);
  c.t_end = t_end;
  c.dt = dt;
  c.integrator = integ;
  return c;
}

FlowConfig second_order(Point x0, Point v0, double alpha, double t_end, double dt) {
  FlowConfig c = first_order(std::move(x0), t_end, dt);
  c.kind = FlowKind::SecondOrder;
  c.v0 = std::move(v0);
  c.alpha = alpha;
  return c;
}

FunctionOracle constant_oracle(int dim) {
  FunctionOracle o;
  o.name = "constant";
  o.dim = dim;
  o.eval = [](const Point&) { return 1.0; };
  o.grad = [dim](const Point&) -> Point { return Point::Zero(dim); };
  o.domain = DomainSpec::all_space(dim);
  o.known_minimizer = Point::Zero(dim);
  return o;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an sqcflow::Error";
  return ErrorKind::InvalidParameter;
}

}  // namespace

TEST(FirstOrderFlow, HalfSquareClosedForm) {
  const auto e = strongly_convex_quadratic(1, 1.0, 1.0);
  const auto traj = integrate_first_order(e.oracle, first_order(pt({1.0}), 5.0, 1e-3));
  EXPECT_EQ(traj.size(), 5001u);
  EXPECT_DOUBLE_EQ(traj.back().t, 5.0);
  EXPECT_NEAR(traj.back().state[0], std::exp(-5.0), 1e-6);
  EXPECT_NEAR(traj.back().state[0], 6.7379e-3, 1e-7);
  EXPECT_NEAR(traj.back().diagnostics.at("E"), 0.5 * std::exp(-10.0), 1e-9);
}

TEST(FirstOrderFlow, DecayExponentMatchesModulus) {
  const auto e = strongly_convex_quadratic(1, 2.0, 2.0);
  const auto traj = integrate_first_order(e.oracle, first_order(pt({1.0}), 3.0, 1e-3));
  std::vector<double> ts, xs;
  for (const auto& s : traj.samples()) {
    ts.push_back(s.t);
    xs.push_back(std::abs(s.state[0]));
  }
  EXPECT_NEAR(fit_exponential_rate(ts, xs), 2.0, 1e-6);
}

TEST(FirstOrderFlow, EnergyIsNonIncreasing) {
  for (const char* name : {"sin_quadratic", "quadratic_2_1_4", "quadratic_fraction", "sqrt_norm_2d"}) {
    SCOPED_TRACE(name);
    const auto e = make_catalog_entry(name);
    const Point x0 = name == std::string("sin_quadratic") ? pt({2.0})
                     : e.oracle.dim == 2                  ? pt({0.6, -0.5})
                                                          : pt({0.8});
    // The sqrt_norm speed 1/(2 sqrt|x|) needs a finer step before the stop radius.
    const bool stiff = name == std::string("sqrt_norm_2d");
    FlowConfig cfg = first_order(x0, 3.0, stiff ? 1e-4 : 1e-3);
    cfg.stop_radius = stiff ? 5e-3 : 1e-3;
    const auto traj = integrate_first_order(e.oracle, cfg);
    ASSERT_GT(traj.size(), 10u);
    for (std::size_t k = 1; k < traj.size(); ++k) EXPECT_LE(traj[k].h, traj[k - 1].h + 1e-9);
  }
}

TEST(FirstOrderFlow, ValueDerivativeIsMinusGradientNormSquared) {
  const double dt = 1e-3;
  for (const char* name : {"quadratic_2_1_4", "sin_quadratic", "quadratic_fraction"}) {
    SCOPED_TRACE(name);
    const auto e = make_catalog_entry(name);
    const Point x0 = e.oracle.dim == 2 ? pt({1.0, 1.0}) : pt({2.0});
    const auto traj = integrate_first_order(e.oracle, first_order(x0, 2.0, dt));
    for (std::size_t k = 1; k + 1 < traj.size(); ++k) {
      const double dh = (traj[k + 1].h - traj[k - 1].h) / (traj[k + 1].t - traj[k - 1].t);
      ASSERT_LE(std::abs(dh + traj[k].grad_norm * traj[k].grad_norm), 10.0 * dt) << "k = " << k;
    }
  }
}

TEST(FirstOrderFlow, ConvergenceOrders) {
  const auto e = make_catalog_entry("quadratic_2_1_4");
  const Point exact = pt({std::exp(-1.0), std::exp(-4.0)});
  auto error = [&](Integrator integ, double dt) {
    const auto traj = integrate_first_order(e.oracle, first_order(pt({1.0, 1.0}), 1.0, dt, integ));
    return (traj.back().state - exact).norm();
  };
  const double euler_ratio = error(Integrator::ExplicitEuler, 0.01) / error(Integrator::ExplicitEuler, 0.005);
  const double rk4_ratio = error(Integrator::Rk4, 0.01) / error(Integrator::Rk4, 0.005);
  EXPECT_NEAR(euler_ratio, 2.0, 0.2);
  EXPECT_NEAR(rk4_ratio, 16.0, 1.6);
}

TEST(FirstOrderFlow, RecordEveryKeepsFinalState) {
  const auto e = strongly_convex_quadratic(1, 1.0, 1.0);
  FlowConfig cfg = first_order(pt({1.0}), 1.0, 0.003);
  cfg.record_every = 100;
  const auto traj = integrate_first_order(e.oracle, cfg);
  EXPECT_EQ(traj.size(), 5u);  // t = 0, 0.3, 0.6, 0.9, 1.0
  EXPECT_DOUBLE_EQ(traj.back().t, 1.0);
}

TEST(FirstOrderFlow, Errors) {
  const auto cubic = cubic_function();
  try {
    integrate_first_order(cubic.oracle, first_order(pt({-0.9}), 100.0, 1e-3));
    FAIL() << "expected DomainExit";
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::DomainExit);
    ASSERT_TRUE(err.at().has_value());
    // x' = -3x^2 from -0.9 reaches -1 at t = (1/0.9 - 1)/3
    EXPECT_NEAR(*err.at(), (1.0 / 0.9 - 1.0) / 3.0, 2e-3);
  }

  FunctionOracle blow;
  blow.dim = 1;
  blow.eval = [](const Point& x) { return -std::pow(x[0], 4); };
  blow.grad = [](const Point& x) -> Point { return Point::Constant(1, -4.0 * std::pow(x[0], 3)); };
  blow.domain = DomainSpec::all_space(1);
  EXPECT_EQ(kind_of([&] { integrate_first_order(blow, first_order(pt({1.0}), 1.0, 1e-3)); }),
            ErrorKind::NumericalBlowup);

  const auto q = strongly_convex_quadratic(1, 1.0, 1.0);
  EXPECT_EQ(kind_of([&] { integrate_first_order(q.oracle, first_order(pt({1.0}), 1.0, 2.0)); }),
            ErrorKind::InvalidParameter);
  EXPECT_EQ(kind_of([&] { integrate_first_order(q.oracle, first_order(pt({1.0, 0.0}), 1.0, 0.1)); }),
            ErrorKind::InvalidParameter);
}

TEST(FlowDefaults, StepAndKappa) {
  EXPECT_DOUBLE_EQ(default_flow_dt(std::nullopt), 1e-3);
  EXPECT_DOUBLE_EQ(default_flow_dt(0.5), 1e-3);
  EXPECT_DOUBLE_EQ(default_flow_dt(4.0), 2.5e-4);
  EXPECT_DOUBLE_EQ(default_kappa(1.0, 4.0), 0.25);
  EXPECT_EQ(parse_integrator("euler"), Integrator::ExplicitEuler);
  EXPECT_EQ(parse_integrator("rk4"), Integrator::Rk4);
  EXPECT_THROW(parse_integrator("leapfrog"), Error);
}

TEST(LyapunovParams, Window) {
  const auto p = make_lyapunov_params(1.0, 1.0, 2.0);
  EXPECT_DOUBLE_EQ(p.lambda, std::sqrt(0.5));
  EXPECT_DOUBLE_EQ(p.xi, 0.5);
  EXPECT_NO_THROW(p.validate(1.0, 2.0));
  const auto q = make_lyapunov_params(1.0, 1.0, 0.5);
  EXPECT_DOUBLE_EQ(q.lambda, 0.2);  // 2 alpha / (kappa + 4)
  LyapunovParams too_big{0.8, 0.64, 1.0};
  EXPECT_EQ(kind_of([&] { too_big.validate(1.0, 2.0); }), ErrorKind::ParameterWindowViolation);
  LyapunovParams bad_xi{0.5, 0.3, 1.0};
  EXPECT_EQ(kind_of([&] { bad_xi.validate(1.0, 2.0); }), ErrorKind::InvalidParameter);
}

TEST(SecondOrderFlow, OverdampedClosedForm) {
  const auto e = strongly_convex_quadratic(1, 1.0, 1.0);
  const auto lyap = make_lyapunov_params(1.0, 1.0, 3.0);
  const auto traj = integrate_second_order(e.oracle, second_order(pt({1.0}), pt({0.0}), 3.0, 10.0, 1e-3), lyap);
  // roots of s^2 + 3s + 1
  const double r1 = (-3.0 + std::sqrt(5.0)) / 2.0, r2 = (-3.0 - std::sqrt(5.0)) / 2.0;
  const double c1 = r2 / (r2 - r1), c2 = 1.0 - c1;
  for (std::size_t k = 0; k < traj.size(); k += 500) {
    const double t = traj[k].t;
    EXPECT_NEAR(traj[k].state[0], c1 * std::exp(r1 * t) + c2 * std::exp(r2 * t), 1e-10) << t;
    EXPECT_NEAR(traj[k].diagnostics.at("v_norm"), std::abs(c1 * r1 * std::exp(r1 * t) + c2 * r2 * std::exp(r2 * t)),
                1e-10);
  }
  EXPECT_LT(std::abs(traj.back().state[0]), 0.03);
  const auto sigma = traj.column("Sigma");
  for (std::size_t k = 1; k < sigma.size(); ++k) EXPECT_LE(sigma[k], sigma[k - 1] + 1e-12);
}

TEST(SecondOrderFlow, ZeroGradientIsPureDamping) {
  const auto o = constant_oracle(1);
  const auto lyap = make_lyapunov_params(1.0, 1.0, 1.0);
  const auto traj = integrate_second_order(o, second_order(pt({0.5}), pt({1.0}), 1.0, 3.0, 1e-3), lyap);
  for (std::size_t k = 0; k < traj.size(); k += 250) {
    const double t = traj[k].t;
    EXPECT_NEAR(traj[k].diagnostics.at("v_norm"), std::exp(-t), 1e-12);
    EXPECT_NEAR(traj[k].state[0], 0.5 + 1.0 - std::exp(-t), 1e-12);
  }
}

TEST(SecondOrderFlow, LyapunovEnvelopeOnQuadratic) {
  const auto e = make_catalog_entry("quadratic_2_1_4");
  const double alpha = 2.0;
  const auto lyap = make_lyapunov_params(1.0, 1.0, alpha);
  EXPECT_DOUBLE_EQ(lyap.lambda, std::min(std::sqrt(0.5), 2.0 * alpha / 5.0));
  const auto traj =
      integrate_second_order(e.oracle, second_order(pt({1.0, 1.0}), pt({0.0, 0.0}), alpha, 10.0, 1e-3), lyap);
  const auto cert = certify_second_order(traj, lyap);
  EXPECT_EQ(cert.kind, CertificateKind::FlowSecond);
  EXPECT_TRUE(cert.satisfied);
  EXPECT_FALSE(cert.first_violation.has_value());
  EXPECT_GE(cert.empirical_rate, cert.theoretical_rate);
}

TEST(SecondOrderFlow, SigmaNonIncreasingInsideWindow) {
  for (const char* name : {"half_square", "quadratic_2_1_4", "quadratic_3_1_4"}) {
    const auto e = make_catalog_entry(name);
    const double gamma = *e.oracle.known_modulus, L = *e.oracle.known_lipschitz;
    for (double alpha : {0.5, 1.0, 3.0}) {
      SCOPED_TRACE(std::string(name) + " alpha=" + std::to_string(alpha));
      const auto lyap = make_lyapunov_params(gamma, default_kappa(gamma, L), alpha);
      lyap.validate(gamma, alpha);
      const Point x0 = Point::Ones(e.oracle.dim);
      const auto traj = integrate_second_order(
          e.oracle, second_order(x0, Point::Zero(e.oracle.dim), alpha, 8.0, default_flow_dt(L)), lyap);
      const auto sigma = traj.column("Sigma");
      for (std::size_t k = 1; k < sigma.size(); ++k) ASSERT_LE(sigma[k], sigma[k - 1] + 1e-9) << k;
    }
  }
}

TEST(SecondOrderFlow, NeedsMinimizer) {
  const auto e = linear_function(Point::Ones(1));
  EXPECT_EQ(kind_of([&] {
              integrate_second_order(e.oracle, second_order(pt({0.0}), pt({0.0}), 1.0, 1.0, 0.1),
                                     make_lyapunov_params(1.0, 1.0, 1.0));
            }),
            ErrorKind::MissingMinimizer);
}

TEST(CertifyFirstOrder, HalfSquare) {
  const auto e = strongly_convex_quadratic(1, 1.0, 1.0);
  const auto traj = integrate_first_order(e.oracle, first_order(pt({1.0}), 5.0, 1e-3));
  const auto cert = certify_first_order(traj, 1.0, pt({0.0}));
  EXPECT_TRUE(cert.satisfied);
  EXPECT_DOUBLE_EQ(cert.theoretical_rate, 0.5);
  EXPECT_NEAR(cert.empirical_rate, 1.0, 1e-6);
  const auto wrong = certify_first_order(traj, 10.0, pt({0.0}));
  EXPECT_FALSE(wrong.satisfied);
  ASSERT_TRUE(wrong.first_violation.has_value());
  EXPECT_GT(*wrong.first_violation, 0.0);
}

TEST(CertifyFirstOrder, SqrtNormWithStopRadius) {
  const auto e = sqrt_norm(1, 1.0);
  FlowConfig cfg = first_order(pt({0.9}), 5.0, 1e-4);
  cfg.stop_radius = 1e-3;
  const auto traj = integrate_first_order(e.oracle, cfg);
  // x' = -1/(2 sqrt x)  =>  x^{3/2} = 0.9^{3/2} - 3t/4
  const double c = std::pow(0.9, 1.5);
  for (std::size_t k = 0; k < traj.size(); k += 1000) {
    const double t = traj[k].t;
    EXPECT_NEAR(traj[k].state[0], std::pow(c - 0.75 * t, 2.0 / 3.0), 1e-6) << t;
  }
  EXPECT_LE(std::abs(traj.back().state[0]), 1e-3);
  EXPECT_NEAR(traj.back().t, (c - std::pow(1e-3, 1.5)) / 0.75, 2e-4);
  EXPECT_TRUE(certify_first_order(traj, *e.oracle.known_modulus, pt({0.0})).satisfied);
}

TEST(CertifyFirstOrder, SinQuadraticEmpiricalModulus) {
  const auto e = sin_quadratic();
  const double gamma = empirical_modulus(e.oracle, e.oracle.sampling_domain(), 10000, 42).safety_adjusted;
  const auto traj = integrate_first_order(e.oracle, first_order(pt({2.0}), 10.0, 1e-3));
  const auto cert = certify_first_order(traj, gamma, pt({0.0}));
  EXPECT_TRUE(cert.satisfied);
}

TEST(CertifyFirstOrderValues, Examples) {
  const auto half = strongly_convex_quadratic(1, 1.0, 1.0);
  const auto t1 = integrate_first_order(half.oracle, first_order(pt({1.0}), 5.0, 1e-3));
  const auto c1 = certify_first_order_values(t1, 1.0, 1.0, pt({0.0}));
  EXPECT_TRUE(c1.satisfied);
  EXPECT_NEAR(c1.empirical_rate, 2.0, 1e-6);
  EXPECT_DOUBLE_EQ(c1.constants.at("T"), 0.0);

  const auto q = make_catalog_entry("quadratic_2_1_4");
  const auto t2 = integrate_first_order(q.oracle, first_order(pt({1.0, 1.0}), 5.0, 2.5e-4));
  EXPECT_TRUE(certify_first_order_values(t2, 1.0, 4.0, pt({0.0, 0.0})).satisfied);

  const auto wrong = certify_first_order_values(t1, 10.0, 1.0, pt({0.0}));
  EXPECT_FALSE(wrong.satisfied);
  ASSERT_TRUE(wrong.first_violation.has_value());
  EXPECT_GT(*wrong.first_violation, 0.0);
}

TEST(CertifyFirstOrderValues, RadiusSetsStartTime) {
  const auto half = strongly_convex_quadratic(1, 1.0, 1.0);
  const auto traj = integrate_first_order(half.oracle, first_order(pt({1.0}), 3.0, 1e-3));
  const auto cert = certify_first_order_values(traj, 1.0, 1.0, pt({0.0}), 0.5);
  EXPECT_NEAR(cert.constants.at("T"), std::log(2.0), 1e-3);
  EXPECT_TRUE(cert.satisfied);
  const auto never = certify_first_order_values(traj, 1.0, 1.0, pt({0.0}), 1e-6);
  EXPECT_TRUE(std::isnan(never.constants.at("T")));
  EXPECT_EQ(never.checks, 0u);
}
