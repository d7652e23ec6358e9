#pragma once

// Fixed batteries: the acceptance criteria, the implication ladder over the
// catalog and a rate table, each written as summary.csv.

#include "sqcflow/experiment.hpp"

#include <chrono>
#include <functional>

namespace sqcflow {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::string yes_no(bool b) { return b ? "yes" : "no"; }

// Gamma used for an entry in the batteries: catalog value, else the
// safety-adjusted empirical modulus on the sampling region.
inline double battery_gamma(const CatalogEntry& e, std::uint64_t seed) {
  if (e.oracle.known_modulus) return *e.oracle.known_modulus;
  return empirical_modulus(e.oracle, e.oracle.sampling_domain(), 10000, seed).safety_adjusted;
}

inline double max_ratio_deviation(const Trajectory& traj, const Point& x_bar, double expected) {
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const double d0 = (traj[k].state - x_bar).squaredNorm();
    if (d0 < 1e-200) break;
    worst = std::max(worst, std::abs((traj[k + 1].state - x_bar).squaredNorm() / d0 - expected));
  }
  return worst;
}

}  // namespace detail

/// Gradient characterization agrees with strong quasiconvexity on five entries.
inline CriterionResult criterion_gradient_characterization() {
  detail::Stopwatch sw;
  CriterionResult r{1, "gradient characterization equivalence", true, "", 0.0};
  const SampleBudget budget{10000, 2, 42};
  for (const char* name : {"quadratic_2_1_4", "sqrt_norm_2d", "sin_quadratic", "quadratic_fraction",
                           "max_quadratics"}) {
    const auto e = make_catalog_entry(name);
    const double gamma = detail::battery_gamma(e, 42);
    const auto sqc = check_strong_quasiconvexity(e.oracle, gamma, budget);
    const auto gc = check_gradient_characterization(e.oracle, gamma, budget);
    const bool ok = sqc.holds_on_samples && gc.holds_on_samples;
    r.passed = r.passed && ok;
    if (!r.detail.empty()) r.detail += "; ";
    r.detail += std::string(name) + "(gamma=" + format_real(gamma) + "): sqc=" +
                detail::yes_no(sqc.holds_on_samples) + " char=" + detail::yes_no(gc.holds_on_samples);
  }
  r.seconds = sw.seconds();
  if (r.seconds >= 10.0) {
    r.passed = false;
    r.detail += "; runtime limit 10 s exceeded";
  }
  return r;
}

/// PL with mu = gamma^2/(2L) on 1/2 x^2; PL without strong quasiconvexity on 1/2 x1^2.
inline CriterionResult criterion_pl() {
  detail::Stopwatch sw;
  CriterionResult r{2, "PL constant", true, "", 0.0};
  const SampleBudget budget{10000, 2, 42};
  const auto sq = make_catalog_entry("half_square");
  const double mu = derive_pl_modulus(1.0, 1.0);
  const auto pl = check_pl(sq.oracle, mu, budget);
  const auto ce = make_catalog_entry("nonunique_minimizer");
  const auto pl_ce = check_pl(ce.oracle, ce.constants_known.at("mu"), budget);
  const auto sqc_ce = check_strong_quasiconvexity(ce.oracle, 1.0, budget);
  bool witness_ok = !sqc_ce.violations.empty();
  for (const auto& w : sqc_ce.violations) {
    const auto ev = reevaluate_witness(ce.oracle, Property::StrongQuasiconvexity, 1.0, w);
    witness_ok = witness_ok && ev.violated() && ev.margin() == w.margin;
  }
  r.passed = mu == 0.5 && pl.holds_on_samples && pl_ce.holds_on_samples && !sqc_ce.holds_on_samples && witness_ok;
  r.detail = "mu=" + format_real(mu) + " pl(half_square)=" + detail::yes_no(pl.holds_on_samples) +
             " pl(nonunique)=" + detail::yes_no(pl_ce.holds_on_samples) +
             " sqc(nonunique) violations=" + std::to_string(sqc_ce.violation_count) +
             " witnesses reproducible=" + detail::yes_no(witness_ok);
  r.seconds = sw.seconds();
  return r;
}

/// First-order flow distance envelope on strongly_convex_quadratic(2,1,4).
inline CriterionResult criterion_first_order_flow() {
  detail::Stopwatch sw;
  CriterionResult r{3, "first-order flow envelope", false, "", 0.0};
  const auto e = make_catalog_entry("quadratic_2_1_4");
  FlowConfig cfg;
  cfg.x0 = Point::Ones(2);
  cfg.t_end = 10.0;
  cfg.dt = 1e-3;
  const auto traj = integrate_first_order(e.oracle, cfg);
  const auto cert = certify_first_order(traj, 1.0, *e.oracle.known_minimizer);
  r.seconds = sw.seconds();
  r.passed = cert.satisfied && !cert.first_violation && cert.empirical_rate >= 0.95 && r.seconds < 5.0;
  r.detail = "samples=" + std::to_string(cert.checks) + " fitted exponent=" + format_real(cert.empirical_rate) +
             " envelope=" + detail::yes_no(!cert.first_violation);
  return r;
}

struct GdCriterionRuns {
  SolverRun quadratic;
  double L0 = 0.0;
  SolverRun half_square;
};

/// Runs shared by the contraction and value criteria.
inline GdCriterionRuns gd_criterion_runs() {
  GdCriterionRuns runs;
  const auto q = make_catalog_entry("quadratic_3_1_4");
  const Point x0 = Point::Ones(3);
  runs.L0 = estimate_lipschitz_sublevel(q.oracle, x0, 2000, 42).safety_adjusted;
  GDConfig cfg;
  cfg.x0 = x0;
  cfg.step_rule = OptimalStep{1.0, runs.L0};
  runs.quadratic = gradient_descent(q.oracle, cfg);

  const auto h = make_catalog_entry("half_square");
  GDConfig c2;
  c2.x0 = Point::Ones(1);
  c2.step_rule = ConstantStep{0.5};
  c2.max_iters = 30;
  runs.half_square = gradient_descent(h.oracle, c2);
  return runs;
}

inline CriterionResult criterion_gd_contraction() {
  detail::Stopwatch sw;
  CriterionResult r{4, "gradient method contraction", false, "", 0.0};
  const auto runs = gd_criterion_runs();
  const auto cert = certify_gd_contraction(runs.quadratic.trajectory, 1.0, runs.L0);
  const double q2 = 1.0 - 1.0 / (4.0 * runs.L0 * runs.L0);
  const auto cert_h = certify_gd_contraction(runs.half_square.trajectory, 1.0, 1.0);
  const double dev = detail::max_ratio_deviation(runs.half_square.trajectory, Point::Zero(1), 0.25);
  const double bound_h = 1.0 - 0.5 * (1.0 - 0.5 * 1.0);
  r.seconds = sw.seconds();
  r.passed = !cert.first_violation && cert.empirical_rate <= q2 + 0.05 && !cert_h.first_violation &&
             dev <= 1e-12 && bound_h == 0.75 && r.seconds < 2.0;
  r.detail = "L0_hat=" + format_real(runs.L0) + " fitted=" + format_real(cert.empirical_rate) +
             " q^2=" + format_real(q2) + " half_square factor deviation=" + format_real(dev) +
             " bound=" + format_real(bound_h);
  return r;
}

inline CriterionResult criterion_gd_values() {
  detail::Stopwatch sw;
  CriterionResult r{5, "function-value rates", false, "", 0.0};
  const auto runs = gd_criterion_runs();
  const auto c1 = certify_gd_values(runs.quadratic.trajectory, 1.0, runs.L0);
  const auto c2 = certify_gd_values(runs.half_square.trajectory, 1.0, 1.0);
  r.passed = !c1.first_violation && !c2.first_violation;
  r.detail = "quadratic_3_1_4 checks=" + std::to_string(c1.checks) + " half_square checks=" +
             std::to_string(c2.checks);
  if (c1.first_violation) r.detail += " violation(quadratic) at k=" + format_real(*c1.first_violation);
  if (c2.first_violation) r.detail += " violation(half_square) at k=" + format_real(*c2.first_violation);
  r.seconds = sw.seconds();
  return r;
}

inline CriterionResult criterion_heavy_ball() {
  detail::Stopwatch sw;
  CriterionResult r{6, "heavy-ball energy recursion", false, "", 0.0};
  const auto e = make_catalog_entry("half_square");
  HBConfig cfg;
  cfg.x0 = Point::Ones(1);
  cfg.theta = 0.5;
  cfg.beta = 0.5;
  cfg.max_iters = 200;
  cfg.stop_grad_tol = std::numeric_limits<double>::min();
  const auto run = heavy_ball(e.oracle, cfg);
  const auto c = heavy_ball_constants(1.0, 1.0, 0.5, 0.5);
  const auto E = run.trajectory.column("E");
  bool recursion = true;
  for (std::size_t k = 0; k + 1 < E.size(); ++k)
    recursion = recursion && E[k + 1] <= 0.9 * E[k] + ineq_tol(E[k + 1], 0.9 * E[k]);
  const auto cert = certify_hb_energy(run.trajectory, 1.0, 1.0, 0.5, 0.5);
  r.seconds = sw.seconds();
  r.passed = c.rho == 0.25 && c.sigma == 2.5 && recursion && cert.satisfied && r.seconds < 1.0;
  r.detail = "rho=" + format_real(c.rho) + " sigma=" + format_real(c.sigma) + " iterations=" +
             std::to_string(run.iterations) + " E recursion=" + detail::yes_no(recursion) +
             " tails=" + detail::yes_no(!cert.first_violation);
  return r;
}

inline CriterionResult criterion_second_order_flow() {
  detail::Stopwatch sw;
  CriterionResult r{7, "second-order flow Lyapunov decay", false, "", 0.0};
  const auto e = make_catalog_entry("quadratic_2_1_4");
  const double kappa = default_kappa(1.0, 4.0);
  FlowConfig cfg;
  cfg.kind = FlowKind::SecondOrder;
  cfg.alpha = 3.0;
  cfg.x0 = Point::Ones(2);
  cfg.v0 = Point::Zero(2);
  cfg.t_end = 20.0;
  cfg.dt = 1e-3;
  const auto lyap = make_lyapunov_params(1.0, kappa, cfg.alpha);
  const auto traj = integrate_second_order(e.oracle, cfg, lyap);
  const double s0 = traj.front().diagnostics.at("Sigma");
  bool ok = true;
  for (const auto& s : traj.samples())
    ok = ok && s.diagnostics.at("Sigma") <= s0 * std::exp(-0.5 * lyap.lambda * kappa * s.t) * 1.05;
  r.seconds = sw.seconds();
  r.passed = ok && r.seconds < 5.0;
  r.detail = "kappa=" + format_real(kappa) + " lambda=" + format_real(lyap.lambda) +
             " samples=" + std::to_string(traj.size()) + " envelope=" + detail::yes_no(ok);
  return r;
}

/// Max-norm gap over t in [0, 1] between heavy ball with theta = 1 - alpha eta,
/// beta = eta^2 and the second-order flow on 1/2 |x|^2 from x0 = (1, 1), v0 = 0.
inline double discretization_gap(double eta, double alpha = 3.0) {
  const auto e = make_catalog_entry("half_norm_sq_2d");
  const Point x0 = Point::Ones(2);
  const double fine = 5e-5;
  const auto per_step = static_cast<std::size_t>(std::llround(eta / fine));
  FlowConfig fc;
  fc.kind = FlowKind::SecondOrder;
  fc.alpha = alpha;
  fc.x0 = x0;
  fc.v0 = Point::Zero(2);
  fc.t_end = 1.0;
  fc.dt = fine;
  const auto flow = integrate_second_order(e.oracle, fc, make_lyapunov_params(1.0, 1.0, alpha));

  HBConfig hc;
  hc.x0 = x0;
  hc.theta = 1.0 - alpha * eta;
  hc.beta = eta * eta;
  hc.max_iters = static_cast<std::size_t>(std::llround(1.0 / eta));
  hc.stop_grad_tol = std::numeric_limits<double>::min();
  const auto hb = heavy_ball(e.oracle, hc);
  double gap = 0.0;
  for (std::size_t k = 0; k < hb.trajectory.size(); ++k) {
    const std::size_t idx = k * per_step;
    if (idx >= flow.size()) break;
    gap = std::max(gap, (hb.trajectory[k].state - flow[idx].state).lpNorm<Eigen::Infinity>());
  }
  return gap;
}

inline CriterionResult criterion_discretization() {
  detail::Stopwatch sw;
  CriterionResult r{8, "discretization consistency", false, "", 0.0};
  const double g1 = discretization_gap(0.01);
  const double g2 = discretization_gap(0.005);
  const double ratio = g1 / g2;
  r.passed = g1 <= 0.05 && ratio >= 1.5 && ratio <= 3.0;
  r.detail = "gap(0.01)=" + format_real(g1) + " gap(0.005)=" + format_real(g2) + " ratio=" + format_real(ratio);
  r.seconds = sw.seconds();
  return r;
}

struct LadderRow {
  std::string function;
  std::string row;
  bool implication = false;
  bool holds = false;
  std::size_t violations = 0;
};

/// Implication ladder over every catalog entry. Counterexamples are checked
/// at gamma = 1.
inline std::vector<LadderRow> ladder_rows(std::size_t pairs = 2000, std::uint64_t seed = 42) {
  std::vector<LadderRow> rows;
  const SampleBudget budget{pairs, 2, seed};
  for (const auto& name : catalog_names()) {
    const auto e = make_catalog_entry(name);
    const double gamma = e.counterexample ? 1.0 : detail::battery_gamma(e, seed);
    for (const auto& r : check_implication_ladder(e.oracle, gamma, budget))
      rows.push_back({name, r.property_name, is_implication(r), r.holds_on_samples, r.violation_count});
  }
  return rows;
}

inline CriterionResult criterion_ladder() {
  detail::Stopwatch sw;
  CriterionResult r{9, "implication ladder soundness", true, "", 0.0};
  std::size_t implications = 0;
  for (const auto& row : ladder_rows()) {
    if (!row.implication) continue;
    ++implications;
    if (!row.holds) {
      r.passed = false;
      r.detail += "failed " + row.function + ": " + row.row + "; ";
    }
  }
  const auto e = make_catalog_entry("sqrt_norm_2d");
  const double gamma = *e.oracle.known_modulus;
  const auto mono = check_strong_monotonicity(e.oracle, gamma, SampleBudget{10000, 2, 42});
  bool witness_ok = !mono.holds_on_samples && !mono.violations.empty();
  for (const auto& w : mono.violations)
    witness_ok = witness_ok && reevaluate_witness(e.oracle, Property::StrongMonotonicity, gamma, w).violated();
  r.passed = r.passed && witness_ok;
  r.detail += "implication rows=" + std::to_string(implications) +
              " sqrt_norm strong monotonicity violations=" + std::to_string(mono.violation_count) +
              " witnesses valid=" + detail::yes_no(witness_ok);
  r.seconds = sw.seconds();
  return r;
}

namespace detail {

inline bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) return std::optional<std::string>{};
    std::ostringstream os;
    os << f.rdbuf();
    return std::optional<std::string>{os.str()};
  };
  const auto x = slurp(a), y = slurp(b);
  return x && y && *x == *y;
}

}  // namespace detail

/// Experiments used for the determinism check.
inline std::vector<ExperimentConfig> determinism_configs() {
  auto make = [](std::string fn, std::string task, Json params) {
    ExperimentConfig c;
    c.function = std::move(fn);
    c.task = std::move(task);
    c.task_params = std::move(params);
    c.seed = 42;
    return c;
  };
  return {
      make("half_square", "gd", Json{{"beta", 0.5}, {"x0", 1.0}, {"max_iters", 20}}),
      make("quadratic_3_1_4", "gd", Json{{"optimal", true}, {"x0", 1.0}}),
      make("quadratic_2_1_4", "flow", Json{{"order", 1}, {"x0", 1.0}, {"t_end", 10.0}, {"dt", 1e-3}}),
      make("quadratic_2_1_4", "flow", Json{{"order", 2}, {"alpha", 3.0}, {"x0", 1.0}, {"t_end", 20.0}}),
      make("half_square", "hb", Json{{"theta", 0.5}, {"beta", 0.5}, {"x0", 1.0}, {"max_iters", 200}}),
      make("sqrt_norm_2d", "verify", Json{{"property", "strong_monotonicity"}, {"pairs", 10000}}),
      make("sin_quadratic", "verify", Json{{"property", "gradient_characterization"}, {"pairs", 10000}}),
      make("sin_quadratic", "estimate", Json{{"constant", "L0"}, {"x0", 2.0}}),
  };
}

/// Re-runs each determinism experiment twice under `work_dir` and compares
/// trace.csv and certificate.json byte for byte.
inline CriterionResult criterion_determinism(const std::filesystem::path& work_dir) {
  detail::Stopwatch sw;
  CriterionResult r{10, "determinism", true, "", 0.0};
  const auto configs = determinism_configs();
  std::ostringstream sink;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    bool same = true;
    std::array<std::filesystem::path, 2> dirs;
    for (int rep = 0; rep < 2; ++rep) {
      ExperimentConfig c = configs[i];
      dirs[rep] = work_dir / ("run" + std::to_string(i)) / (rep == 0 ? "a" : "b");
      std::filesystem::remove_all(dirs[rep]);
      c.output_dir = dirs[rep].string();
      run_experiment(c, sink);
    }
    for (const char* f : {"trace.csv", "certificate.json"})
      same = same && detail::same_bytes(dirs[0] / f, dirs[1] / f);
    if (!same) {
      r.passed = false;
      r.detail += configs[i].task + "(" + configs[i].function + ") differs; ";
    }
  }
  r.detail += std::to_string(configs.size()) + " experiments compared";
  r.seconds = sw.seconds();
  return r;
}

inline std::vector<CriterionResult> run_acceptance(const std::filesystem::path& work_dir) {
  return {criterion_gradient_characterization(), criterion_pl(),
          criterion_first_order_flow(),          criterion_gd_contraction(),
          criterion_gd_values(),                 criterion_heavy_ball(),
          criterion_second_order_flow(),         criterion_discretization(),
          criterion_ladder(),                    criterion_determinism(work_dir)};
}

struct RateRow {
  std::string method;
  std::string function;
  double theoretical = 0.0;
  double empirical = 0.0;
  bool satisfied = false;
};

/// Empirical against theoretical per-step factors for GD (optimal step) and
/// heavy ball on three entries.
inline std::vector<RateRow> rate_rows(std::uint64_t seed = 42) {
  std::vector<RateRow> rows;
  for (const char* name : {"half_square", "quadratic_2_1_4", "sin_quadratic"}) {
    const auto e = make_catalog_entry(name);
    const Point x0 = Point::Constant(e.oracle.dim, name == std::string("sin_quadratic") ? 2.0 : 1.0);
    const double gamma = detail::battery_gamma(e, seed);
    const double L0 = estimate_lipschitz_sublevel(e.oracle, x0, 2000, seed).safety_adjusted;
    GDConfig g;
    g.x0 = x0;
    g.step_rule = OptimalStep{gamma, L0};
    const auto run = gradient_descent(e.oracle, g);
    const auto c = certify_gd_contraction(run.trajectory, gamma, L0);
    rows.push_back({"gd", name, c.theoretical_rate, c.empirical_rate, c.satisfied});

    const double L = e.oracle.known_lipschitz.value_or(L0);
    HBConfig h;
    h.x0 = x0;
    h.theta = 0.5;
    h.beta = 0.5 * (1.0 - h.theta * h.theta) / L;
    const auto hrun = heavy_ball(e.oracle, h);
    const auto hc = certify_hb_energy(hrun.trajectory, gamma, L, h.theta, h.beta);
    rows.push_back({"hb", name, hc.theoretical_rate, hc.empirical_rate, hc.satisfied});
  }
  return rows;
}

inline int bench_suite(const std::string& suite_name, const std::string& output_dir) {
  const std::filesystem::path dir(output_dir);
  std::filesystem::create_directories(dir);
  std::ostringstream os;
  CsvWriter csv(os);
  bool all = true;
  if (suite_name == "acceptance") {
    csv.row({"id", "criterion", "passed", "seconds", "detail"});
    for (const auto& r : run_acceptance(dir / "determinism")) {
      all = all && r.passed;
      csv.row({std::to_string(r.id), r.name, r.passed ? "pass" : "fail", format_real(r.seconds), r.detail});
    }
  } else if (suite_name == "ladder") {
    csv.row({"function", "row", "kind", "holds", "violations"});
    for (const auto& r : ladder_rows()) {
      if (r.implication) all = all && r.holds;
      csv.row({r.function, r.row, r.implication ? "implication" : "property", r.holds ? "true" : "false",
               std::to_string(r.violations)});
    }
  } else if (suite_name == "rates") {
    csv.row({"method", "function", "theoretical_factor", "empirical_factor", "satisfied"});
    for (const auto& r : rate_rows()) {
      all = all && r.satisfied;
      csv.row({r.method, r.function, format_real(r.theoretical), format_real(r.empirical),
               r.satisfied ? "true" : "false"});
    }
  } else {
    throw Error(ErrorKind::InvalidParameter, "unknown suite '" + suite_name + "'");
  }
  write_text_file((dir / "summary.csv").string(), os.str());
  return all ? kExitPass : kExitCertificateFailure;
}

/// Gradient method over a grid of constant steps: fitted squared-distance
/// factor against q^2 for each step inside the window.
inline int bench_beta_grid(ExperimentContext& ctx, const std::filesystem::path& dir, Json& cert_out) {
  const auto& o = ctx.oracle();
  auto betas = ctx.params.numbers("betas");
  const Point x0 = ctx.x0();
  const double gamma = ctx.gamma();
  const double L0 = ctx.lipschitz(x0, "L0");
  const double cap = gd_step_cap(gamma, L0);
  if (betas.empty())
    for (int i = 1; i <= 9; ++i) betas.push_back(cap * i / 10.0);
  auto [x_bar, ref] = ctx.minimizer(x0);

  std::ostringstream os;
  CsvWriter csv(os);
  csv.row({"beta", "empirical_rate", "q_squared_bound", "in_window", "satisfied"});
  bool all = true;
  Json rows = Json::array();
  for (double beta : betas) {
    require(beta > 0.0, ErrorKind::InvalidParameter, "grid steps must be positive");
    GDConfig cfg;
    cfg.x0 = x0;
    cfg.step_rule = ConstantStep{beta};
    cfg.max_iters = ctx.params.count_or("max_iters", 100000);
    auto run = gradient_descent(o, cfg, x_bar);
    run.trajectory.reference_based = ref;
    const bool in_window = beta < cap;
    RateCertificate cert;
    if (in_window) {
      cert = certify_gd_contraction(run.trajectory, gamma, L0, x_bar);
      all = all && cert.satisfied;
    } else {
      cert.theoretical_rate = std::nan("");
      std::vector<double> d2;
      for (const auto& s : run.trajectory.samples()) {
        if (!detail::above_floor(run.trajectory, s)) break;
        d2.push_back((s.state - x_bar).squaredNorm());
      }
      cert.empirical_rate = detail::fit_factor_or_nan(d2);
    }
    csv.row({format_real(beta), format_real(cert.empirical_rate), format_real(cert.theoretical_rate),
             in_window ? "true" : "false", in_window ? (cert.satisfied ? "true" : "false") : ""});
    rows.push_back(Json{{"beta", beta},
                        {"empirical_rate", cert.empirical_rate},
                        {"q_squared_bound", cert.theoretical_rate},
                        {"in_window", in_window},
                        {"satisfied", in_window ? Json(cert.satisfied) : Json(nullptr)}});
  }
  const std::string table = os.str();
  write_text_file((dir / "summary.csv").string(), table);
  write_text_file((dir / "trace.csv").string(), table);
  cert_out = Json{{"function", ctx.entry.name}, {"grid", std::move(rows)}, {"reference_based", ref}};
  return all ? kExitPass : kExitCertificateFailure;
}

}  // namespace sqcflow
