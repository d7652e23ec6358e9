#pragma once

// Experiment configuration and the single run_experiment entry point used by
// the command-line tool: resolves the function and constants, runs one task
// and writes trace.csv, certificate.json and meta.json.

#include "sqcflow/catalog.hpp"
#include "sqcflow/estimate.hpp"
#include "sqcflow/flows.hpp"
#include "sqcflow/io.hpp"
#include "sqcflow/solvers.hpp"
#include "sqcflow/verify.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>

namespace sqcflow {

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr std::uint64_t kDefaultSeed = 42;

enum ExitCode : int { kExitPass = 0, kExitCertificateFailure = 1, kExitUsage = 2, kExitNumerical = 3 };

/// SQCFLOW_SEED when set to an unsigned integer, else 42.
inline std::uint64_t default_seed() {
  if (const char* env = std::getenv("SQCFLOW_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0' && end != env) return v;
    throw Error(ErrorKind::InvalidParameter, "SQCFLOW_SEED must be an unsigned integer");
  }
  return kDefaultSeed;
}

struct ExperimentConfig {
  std::string function;
  std::string task;
  Json task_params = Json::object();
  std::string output_dir = ".";
  std::optional<std::uint64_t> seed;

  std::uint64_t resolved_seed() const { return seed ? *seed : default_seed(); }

  static ExperimentConfig from_json(const Json& j) {
    require(j.is_object(), ErrorKind::InvalidParameter, "config must be a JSON object");
    static const std::set<std::string> keys = {"function", "task", "task_params", "output_dir", "seed"};
    for (const auto& [k, v] : j.items())
      require(keys.count(k) > 0, ErrorKind::InvalidParameter, "unknown config key '" + k + "'");
    ExperimentConfig c;
    if (j.contains("function")) c.function = j.at("function").get<std::string>();
    if (j.contains("task")) c.task = j.at("task").get<std::string>();
    if (j.contains("task_params")) {
      require(j.at("task_params").is_object(), ErrorKind::InvalidParameter, "task_params must be an object");
      c.task_params = j.at("task_params");
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  }

  static ExperimentConfig from_file(const std::string& path) {
    std::ifstream f(path);
    require(static_cast<bool>(f), ErrorKind::InvalidParameter, "cannot read config file " + path);
    try {
      return from_json(Json::parse(f));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::InvalidParameter, std::string("malformed config: ") + e.what());
    }
  }

  Json to_json() const {
    return Json{{"function", function},     {"task", task},
                {"task_params", task_params}, {"output_dir", output_dir},
                {"seed", resolved_seed()}};
  }
};

// ----------------------------------------------------------------------------
// Function specs: NAME | max(SPEC,SPEC) | scale(NUMBER,SPEC)
// ----------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

// Splits "a,b" at the top-level comma.
inline std::pair<std::string, std::string> split_args(const std::string& s) {
  int depth = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    else if (s[i] == ')') --depth;
    else if (s[i] == ',' && depth == 0) return {trim(s.substr(0, i)), trim(s.substr(i + 1))};
  }
  throw Error(ErrorKind::InvalidParameter, "expected two arguments in '" + s + "'");
}

}  // namespace detail

inline CatalogEntry resolve_function(const std::string& spec_in) {
  const std::string spec = detail::trim(spec_in);
  require(!spec.empty(), ErrorKind::InvalidParameter, "no function given");
  const auto open = spec.find('(');
  if (open == std::string::npos) return make_catalog_entry(spec);
  require(spec.back() == ')', ErrorKind::InvalidParameter, "unbalanced parentheses in '" + spec + "'");
  const std::string head = detail::trim(spec.substr(0, open));
  const auto [a, b] = detail::split_args(spec.substr(open + 1, spec.size() - open - 2));
  if (head == "max") return max_combine(resolve_function(a), resolve_function(b));
  if (head == "scale") {
    double alpha = 0.0;
    try {
      std::size_t used = 0;
      alpha = std::stod(a, &used);
      require(used == a.size(), ErrorKind::InvalidParameter, "bad scale factor '" + a + "'");
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::InvalidParameter, "bad scale factor '" + a + "'");
    }
    return scale_combine(resolve_function(b), alpha);
  }
  throw Error(ErrorKind::InvalidParameter, "unknown combinator '" + head + "'");
}

// ----------------------------------------------------------------------------
// Parameter access
// ----------------------------------------------------------------------------

class TaskParams {
 public:
  TaskParams(const Json& j, std::set<std::string> allowed) : j_(j) {
    require(j.is_object(), ErrorKind::InvalidParameter, "task_params must be an object");
    for (const auto& [k, v] : j.items())
      require(allowed.count(k) > 0, ErrorKind::InvalidParameter, "unknown task parameter '" + k + "'");
  }

  bool has(const std::string& k) const { return j_.contains(k) && !j_.at(k).is_null(); }

  std::optional<double> number(const std::string& k) const {
    if (!has(k)) return std::nullopt;
    require(j_.at(k).is_number(), ErrorKind::InvalidParameter, "parameter '" + k + "' must be a number");
    return j_.at(k).get<double>();
  }

  double number_or(const std::string& k, double dflt) const { return number(k).value_or(dflt); }

  std::size_t count_or(const std::string& k, std::size_t dflt) const {
    if (!has(k)) return dflt;
    require(j_.at(k).is_number_unsigned() || (j_.at(k).is_number_integer() && j_.at(k).get<long long>() >= 0),
            ErrorKind::InvalidParameter, "parameter '" + k + "' must be a non-negative integer");
    return j_.at(k).get<std::size_t>();
  }

  std::string string_or(const std::string& k, const std::string& dflt) const {
    if (!has(k)) return dflt;
    require(j_.at(k).is_string(), ErrorKind::InvalidParameter, "parameter '" + k + "' must be a string");
    return j_.at(k).get<std::string>();
  }

  bool flag(const std::string& k) const {
    if (!has(k)) return false;
    require(j_.at(k).is_boolean(), ErrorKind::InvalidParameter, "parameter '" + k + "' must be a boolean");
    return j_.at(k).get<bool>();
  }

  /// A scalar is broadcast to every coordinate.
  std::optional<Point> point(const std::string& k, int dim) const {
    if (!has(k)) return std::nullopt;
    const Json& v = j_.at(k);
    if (v.is_number()) return Point::Constant(dim, v.get<double>());
    require(v.is_array() && static_cast<int>(v.size()) == dim, ErrorKind::InvalidParameter,
            "parameter '" + k + "' must be a number or an array of length " + std::to_string(dim));
    Point p(dim);
    for (int i = 0; i < dim; ++i) {
      require(v[static_cast<std::size_t>(i)].is_number(), ErrorKind::InvalidParameter,
              "parameter '" + k + "' must hold numbers");
      p[i] = v[static_cast<std::size_t>(i)].get<double>();
    }
    return p;
  }

  std::vector<double> numbers(const std::string& k) const {
    if (!has(k)) return {};
    const Json& v = j_.at(k);
    require(v.is_array(), ErrorKind::InvalidParameter, "parameter '" + k + "' must be an array");
    std::vector<double> out;
    for (const auto& e : v) {
      require(e.is_number(), ErrorKind::InvalidParameter, "parameter '" + k + "' must hold numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

 private:
  const Json& j_;
};

// ----------------------------------------------------------------------------
// Constant resolution
// ----------------------------------------------------------------------------

/// Constants used by a run and where each came from.
class ConstantBook {
 public:
  void set(const std::string& name, double v, const std::string& source) {
    values_[name] = v;
    sources_[name] = source;
  }
  Json to_json() const {
    Json j = Json::object();
    for (const auto& [k, v] : values_) j[k] = Json{{"value", v}, {"source", sources_.at(k)}};
    return j;
  }

 private:
  std::map<std::string, double> values_;
  std::map<std::string, std::string> sources_;
};

struct ExperimentContext {
  CatalogEntry entry;
  TaskParams params;
  std::uint64_t seed;
  ConstantBook constants;
  std::vector<std::string> notes;

  const FunctionOracle& oracle() const { return entry.oracle; }

  Point x0() const {
    const auto p = params.point("x0", entry.oracle.dim);
    return p ? *p : Point::Constant(entry.oracle.dim, 0.5);
  }

  double gamma() {
    if (auto g = params.number("gamma")) {
      constants.set("gamma", *g, "parameter");
      return *g;
    }
    if (entry.oracle.known_modulus) {
      constants.set("gamma", *entry.oracle.known_modulus, "catalog");
      return *entry.oracle.known_modulus;
    }
    const auto est = empirical_modulus(entry.oracle, entry.oracle.sampling_domain(),
                                       params.count_or("samples", 10000), seed);
    require(est.safety_adjusted > 0.0, ErrorKind::InvalidParameter, "empirical modulus is zero");
    constants.set("gamma", est.safety_adjusted, "empirical (0.95 x sampled minimum)");
    notes.push_back("gamma is an empirical estimate");
    return est.safety_adjusted;
  }

  /// Gradient Lipschitz constant: parameter, catalog (global) or sampled on
  /// the initial sublevel set. `global` reports which kind was used.
  double lipschitz(const Point& x0, const std::string& key, bool* global = nullptr) {
    if (global) *global = true;
    if (auto l = params.number(key)) {
      constants.set(key, *l, "parameter");
      return *l;
    }
    if (entry.oracle.known_lipschitz) {
      constants.set(key, *entry.oracle.known_lipschitz, "catalog");
      return *entry.oracle.known_lipschitz;
    }
    if (global) *global = false;
    const auto est = estimate_lipschitz_sublevel(entry.oracle, x0, params.count_or("samples", 2000), seed);
    constants.set(key, est.safety_adjusted, "sublevel-set estimate (1.1 x sampled maximum)");
    notes.push_back(key + " is an empirical sublevel-set estimate");
    return est.safety_adjusted;
  }

  /// Known minimizer, else the best iterate of a long reference run.
  std::pair<Point, bool> minimizer(const Point& x0) {
    if (entry.oracle.known_minimizer) return {*entry.oracle.known_minimizer, false};
    ReferenceMinimizerOptions opts;
    opts.seed = seed;
    const Point xb = reference_minimizer(entry.oracle, x0, opts);
    notes.push_back("minimizer from a reference gradient run; certificates are reference-based");
    return {xb, true};
  }
};

namespace detail {

inline void write_trace(const std::filesystem::path& dir, const Trajectory& traj) {
  std::ostringstream os;
  write_trace_csv(os, traj);
  write_text_file((dir / "trace.csv").string(), os.str());
}

inline int certificates_exit(const std::vector<RateCertificate>& certs) {
  return std::all_of(certs.begin(), certs.end(), [](const RateCertificate& c) { return c.satisfied; })
             ? kExitPass
             : kExitCertificateFailure;
}

inline Json certificates_json(const std::string& function, const std::vector<RateCertificate>& certs) {
  Json arr = Json::array();
  for (const auto& c : certs) arr.push_back(to_json(c));
  return Json{{"function", function}, {"certificates", std::move(arr)}};
}

// Runs a certification, turning a parameter-window failure into an
// unsatisfied certificate.
template <class F>
RateCertificate certify_or_window_failure(CertificateKind kind, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ParameterWindowViolation) throw;
    RateCertificate c;
    c.kind = kind;
    c.label = "parameter window";
    c.satisfied = false;
    c.notes.push_back(e.what());
    return c;
  }
}

inline void mark_reference(std::vector<RateCertificate>& certs, bool reference_based) {
  for (auto& c : certs) {
    c.reference_based = c.reference_based || reference_based;
    if (reference_based) c.notes.push_back("reference-based: minimizer from a numerical reference run");
  }
}

}  // namespace detail

// ----------------------------------------------------------------------------
// Tasks
// ----------------------------------------------------------------------------

namespace tasks {

inline std::optional<Property> parse_property(const std::string& s) {
  if (s == "strong_quasiconvexity" || s == "quasiconvexity") return Property::StrongQuasiconvexity;
  if (s == "strong_convexity" || s == "convexity") return Property::StrongConvexity;
  if (s == "gradient_characterization") return Property::GradientCharacterization;
  if (s == "new_monotonicity") return Property::NewMonotonicity;
  if (s == "new_monotonicity_nonstrict") return Property::NewMonotonicityNonStrict;
  if (s == "strong_pseudomonotonicity") return Property::StrongPseudomonotonicity;
  if (s == "strong_monotonicity" || s == "monotonicity") return Property::StrongMonotonicity;
  if (s == "sharp_quasiconvexity") return Property::SharpQuasiconvexity;
  if (s == "pl") return Property::PolyakLojasiewicz;
  if (s == "quasi_strong_convexity") return Property::QuasiStrongConvexity;
  return std::nullopt;
}

inline int verify(ExperimentContext& ctx, const std::filesystem::path& dir, Json& cert_out) {
  const std::string prop = ctx.params.string_or("property", "strong_quasiconvexity");
  const bool ladder = prop == "ladder";
  const auto property = parse_property(prop);
  require(ladder || property.has_value(), ErrorKind::InvalidParameter, "unknown property '" + prop + "'");
  SampleBudget budget;
  budget.pairs = ctx.params.count_or("pairs", 10000);
  budget.lambdas_per_pair = ctx.params.count_or("lambdas", 2);
  budget.seed = ctx.seed;
  require(budget.pairs >= 1 && budget.lambdas_per_pair >= 1, ErrorKind::InvalidParameter,
          "pairs and lambdas must be positive");

  std::vector<ClassReport> reports;
  bool pass = true;
  if (ladder) {
    reports = check_implication_ladder(ctx.oracle(), ctx.gamma(), budget);
    for (const auto& r : reports)
      if (is_implication(r)) pass = pass && r.holds_on_samples;
  } else {
    double param = 0.0;
    std::optional<Point> x_bar;
    if (*property == Property::PolyakLojasiewicz || *property == Property::QuasiStrongConvexity) {
      if (auto mu = ctx.params.number("mu")) {
        param = *mu;
        ctx.constants.set("mu", param, "parameter");
      } else if (auto it = ctx.entry.constants_known.find("mu"); it != ctx.entry.constants_known.end()) {
        param = it->second;
        ctx.constants.set("mu", param, "catalog");
      } else {
        const double g = ctx.gamma();
        const double L = ctx.lipschitz(ctx.x0(), "L");
        param = derive_pl_modulus(g, L);
        ctx.constants.set("mu", param, "gamma^2 / (2 L)");
      }
      auto [xb, ref] = ctx.minimizer(ctx.x0());
      x_bar = xb;
    } else if (prop == "quasiconvexity" || prop == "convexity" || prop == "monotonicity") {
      param = 0.0;
    } else {
      param = ctx.gamma();
      if (*property == Property::StrongPseudomonotonicity) {
        param *= 0.5;
        ctx.constants.set("gamma_half", param, "gamma / 2");
      }
    }
    if (*property == Property::NewMonotonicity) {
      auto both = check_new_monotonicity(ctx.oracle(), param, budget);
      reports = {std::move(both.strict), std::move(both.non_strict)};
    } else {
      reports = {check_property(ctx.oracle(), *property, param, budget, x_bar)};
    }
    for (const auto& r : reports) pass = pass && r.holds_on_samples;
  }

  std::ostringstream os;
  write_witness_csv(os, reports, ctx.oracle().dim);
  write_text_file((dir / "trace.csv").string(), os.str());
  Json arr = Json::array();
  for (const auto& r : reports) arr.push_back(to_json(r));
  cert_out = Json{{"function", ctx.entry.name}, {"reports", std::move(arr)}};
  return pass ? kExitPass : kExitCertificateFailure;
}

inline int flow(ExperimentContext& ctx, const std::filesystem::path& dir, Json& cert_out) {
  const auto& o = ctx.oracle();
  const std::size_t order = ctx.params.count_or("order", 1);
  require(order == 1 || order == 2, ErrorKind::InvalidParameter, "order must be 1 or 2");
  FlowConfig cfg;
  cfg.kind = order == 1 ? FlowKind::FirstOrder : FlowKind::SecondOrder;
  cfg.x0 = ctx.x0();
  cfg.t_end = ctx.params.number_or("t_end", 10.0);
  cfg.integrator = parse_integrator(ctx.params.string_or("integrator", "rk4"));
  cfg.record_every = ctx.params.count_or("record_every", 1);
  cfg.stop_radius = ctx.params.number("stop_radius");
  if (order == 2) {
    cfg.alpha = ctx.params.number_or("alpha", 3.0);
    const auto v0 = ctx.params.point("v0", o.dim);
    cfg.v0 = v0 ? *v0 : Point::Zero(o.dim);
  }
  cfg.dt = ctx.params.number_or("dt", default_flow_dt(o.known_lipschitz));
  cfg.validate();

  const double gamma = ctx.gamma();
  auto [x_bar, ref] = ctx.minimizer(cfg.x0);
  std::vector<RateCertificate> certs;
  Trajectory traj;
  if (order == 1) {
    traj = integrate_first_order(o, cfg, x_bar);
    traj.reference_based = ref;
    certs.push_back(certify_first_order(traj, gamma, x_bar));
    bool global = true;
    const double L = ctx.lipschitz(cfg.x0, "L", &global);
    certs.push_back(certify_first_order_values(traj, gamma, L, x_bar));
    if (!global) certs.back().notes.push_back("L estimated on the initial sublevel set; T = 0");
  } else {
    double kappa = 0.0;
    if (auto k = ctx.params.number("kappa")) {
      kappa = *k;
      ctx.constants.set("kappa", kappa, "parameter");
    } else {
      bool global = true;
      const double L = ctx.lipschitz(cfg.x0, "L", &global);
      kappa = default_kappa(gamma, L);
      ctx.constants.set("kappa", kappa, "gamma / L");
    }
    const auto lyap = make_lyapunov_params(gamma, kappa, cfg.alpha);
    ctx.constants.set("lambda", lyap.lambda, "min{sqrt(gamma/(2 kappa)), 2 alpha/(kappa+4)}");
    traj = integrate_second_order(o, cfg, lyap, x_bar);
    traj.reference_based = ref;
    certs.push_back(certify_second_order(traj, lyap));
  }
  detail::mark_reference(certs, ref);
  detail::write_trace(dir, traj);
  cert_out = detail::certificates_json(ctx.entry.name, certs);
  return detail::certificates_exit(certs);
}

inline int gd(ExperimentContext& ctx, const std::filesystem::path& dir, Json& cert_out) {
  const auto& o = ctx.oracle();
  GDConfig cfg;
  cfg.x0 = ctx.x0();
  cfg.max_iters = ctx.params.count_or("max_iters", 100000);
  cfg.stop_grad_tol = ctx.params.number_or("stop_grad_tol", 1e-10);
  cfg.stop_radius = ctx.params.number("stop_radius");
  const bool optimal = ctx.params.flag("optimal");
  const auto beta = ctx.params.number("beta");
  const auto betas = ctx.params.numbers("betas");
  require(static_cast<int>(optimal) + static_cast<int>(beta.has_value()) + static_cast<int>(!betas.empty()) == 1,
          ErrorKind::InvalidParameter, "give exactly one of beta, betas, optimal");
  require(o.domain.contains(cfg.x0), ErrorKind::InvalidParameter, "x0 outside the domain");

  const double gamma = ctx.gamma();
  const double L0 = ctx.lipschitz(cfg.x0, "L0");
  if (optimal) cfg.step_rule = OptimalStep{gamma, L0};
  else if (beta) cfg.step_rule = ConstantStep{*beta};
  else cfg.step_rule = StepSequence{betas};
  cfg.validate();
  ctx.constants.set("beta_star", optimal_step(gamma, L0), "gamma / (2 L0^2)");

  auto [x_bar, ref] = ctx.minimizer(cfg.x0);
  auto run = gradient_descent(o, cfg, x_bar);
  run.trajectory.reference_based = ref;
  std::vector<RateCertificate> certs;
  certs.push_back(detail::certify_or_window_failure(
      CertificateKind::GdContraction, [&] { return certify_gd_contraction(run.trajectory, gamma, L0, x_bar); }));
  certs.push_back(detail::certify_or_window_failure(
      CertificateKind::GdValue, [&] { return certify_gd_values(run.trajectory, gamma, L0, x_bar); }));
  for (auto& c : certs) c.notes.push_back(std::string("stop: ") + to_string(run.stop_reason));
  detail::mark_reference(certs, ref);
  detail::write_trace(dir, run.trajectory);
  cert_out = detail::certificates_json(ctx.entry.name, certs);
  return detail::certificates_exit(certs);
}

inline int hb(ExperimentContext& ctx, const std::filesystem::path& dir, Json& cert_out) {
  const auto& o = ctx.oracle();
  HBConfig cfg;
  cfg.x0 = ctx.x0();
  cfg.x_prev = ctx.params.point("x_prev", o.dim);
  cfg.theta = ctx.params.number_or("theta", 0.5);
  const auto beta = ctx.params.number("beta");
  require(beta.has_value(), ErrorKind::InvalidParameter, "hb needs beta");
  cfg.beta = *beta;
  cfg.max_iters = ctx.params.count_or("max_iters", 100000);
  cfg.stop_grad_tol = ctx.params.number_or("stop_grad_tol", 1e-10);
  cfg.validate();
  require(o.domain.contains(cfg.x0), ErrorKind::InvalidParameter, "x0 outside the domain");

  const double gamma = ctx.gamma();
  bool global = true;
  const double L = ctx.lipschitz(cfg.x0, "L", &global);
  auto [x_bar, ref] = ctx.minimizer(cfg.x0);
  auto run = heavy_ball(o, cfg, x_bar);
  run.trajectory.reference_based = ref;
  std::vector<RateCertificate> certs;
  certs.push_back(detail::certify_or_window_failure(CertificateKind::HbEnergy, [&] {
    return certify_hb_energy(run.trajectory, gamma, L, cfg.theta, cfg.beta, x_bar);
  }));
  if (!global) certs.back().notes.push_back("global L unavailable: sublevel-set L0 substituted");
  certs.back().notes.push_back(std::string("stop: ") + to_string(run.stop_reason));
  detail::mark_reference(certs, ref);
  detail::write_trace(dir, run.trajectory);
  cert_out = detail::certificates_json(ctx.entry.name, certs);
  return detail::certificates_exit(certs);
}

inline int estimate(ExperimentContext& ctx, const std::filesystem::path& dir, Json& cert_out) {
  const auto& o = ctx.oracle();
  const std::string which = ctx.params.string_or("constant", "L0");
  const std::size_t samples = ctx.params.count_or("samples", 2000);
  const Point x0 = ctx.x0();
  Json result;
  Trajectory traj;
  bool has_traj = false;
  if (which == "L0") {
    result = to_json(estimate_lipschitz_sublevel(o, x0, samples, ctx.seed));
  } else if (which == "gamma") {
    result = to_json(empirical_modulus(o, o.sampling_domain(), samples, ctx.seed));
  } else if (which == "kappa") {
    auto [x_bar, ref] = ctx.minimizer(x0);
    FlowConfig cfg;
    cfg.x0 = x0;
    cfg.t_end = ctx.params.number_or("t_end", 10.0);
    cfg.dt = ctx.params.number_or("dt", default_flow_dt(o.known_lipschitz));
    traj = integrate_first_order(o, cfg, x_bar);
    traj.reference_based = ref;
    has_traj = true;
    result = to_json(estimate_kappa(o, traj, x_bar));
  } else if (which == "minimizer") {
    ReferenceMinimizerOptions opts;
    opts.seed = ctx.seed;
    opts.lipschitz_samples = samples;
    const Point xb = reference_minimizer(o, x0, opts);
    result = Json{{"value", to_json(xb)}, {"safety_adjusted_value", to_json(xb)}, {"samples", 0}};
  } else {
    throw Error(ErrorKind::InvalidParameter, "unknown constant '" + which + "'");
  }
  result["constant"] = which;
  result["function"] = ctx.entry.name;
  result["empirical"] = true;
  if (has_traj) {
    detail::write_trace(dir, traj);
  } else {
    std::ostringstream os;
    CsvWriter csv(os);
    csv.row({"constant", "value", "safety_adjusted_value", "samples"});
    auto field = [](const Json& v) {
      if (v.is_number()) return format_real(v.get<double>());
      std::string s;
      for (const auto& e : v) s += (s.empty() ? "" : " ") + format_real(e.get<double>());
      return s;
    };
    csv.row({which, field(result["value"]), field(result["safety_adjusted_value"]),
             std::to_string(result["samples"].get<std::size_t>())});
    write_text_file((dir / "trace.csv").string(), os.str());
  }
  cert_out = std::move(result);
  return kExitPass;
}

}  // namespace tasks

// Defined in bench.hpp.
inline int bench_suite(const std::string& suite_name, const std::string& output_dir);
inline int bench_beta_grid(ExperimentContext& ctx, const std::filesystem::path& dir, Json& cert_out);

inline const std::set<std::string>& task_param_keys(const std::string& task) {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"verify", {"property", "gamma", "mu", "L", "pairs", "lambdas", "samples", "x0"}},
      {"flow", {"order", "alpha", "x0", "v0", "t_end", "dt", "integrator", "gamma", "L", "kappa",
                "stop_radius", "record_every", "samples"}},
      {"gd", {"beta", "betas", "optimal", "x0", "max_iters", "stop_grad_tol", "stop_radius", "gamma", "L0",
              "samples"}},
      {"hb", {"theta", "beta", "x0", "x_prev", "max_iters", "stop_grad_tol", "gamma", "L", "samples"}},
      {"estimate", {"constant", "samples", "x0", "t_end", "dt"}},
      {"bench", {"suite", "betas", "x0", "max_iters", "gamma", "L0", "samples"}},
  };
  auto it = keys.find(task);
  if (it == keys.end()) throw Error(ErrorKind::InvalidParameter, "unknown task '" + task + "'");
  return it->second;
}

/// Exit code for an error raised during a run.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DomainExit:
    case ErrorKind::NumericalBlowup:
    case ErrorKind::StagnationFailure:
    case ErrorKind::NonPositiveSequence:
    case ErrorKind::InsufficientSamples:
    case ErrorKind::DomainSamplingFailure: return kExitNumerical;
    default: return kExitUsage;
  }
}

/// Runs one experiment. Errors are reported as one JSON line on `err`.
inline int run_experiment(const ExperimentConfig& config, std::ostream& err = std::cerr) {
  auto report = [&](const std::string& kind, const std::string& msg, std::optional<double> at) {
    Json j{{"error", kind}, {"message", msg}};
    if (at) j["at"] = *at;
    err << j.dump() << std::endl;
  };
  try {
    const auto& allowed = task_param_keys(config.task);
    const std::filesystem::path dir(config.output_dir);
    std::filesystem::create_directories(dir);

    if (config.task == "bench" && config.task_params.contains("suite")) {
      TaskParams params(config.task_params, allowed);
      const int code = bench_suite(params.string_or("suite", ""), config.output_dir);
      write_json_file((dir / "meta.json").string(),
                      Json{{"artifact", "sqcflow"}, {"version", kArtifactVersion}, {"config", config.to_json()}});
      return code;
    }

    ExperimentContext ctx{resolve_function(config.function), TaskParams(config.task_params, allowed),
                          config.resolved_seed(), {}, {}};
    validate_oracle(ctx.entry.oracle);
    if (!ctx.entry.premise_verified)
      for (const auto& w : ctx.entry.warnings) ctx.notes.push_back("warning: " + w);

    Json cert;
    int code = kExitPass;
    if (config.task == "verify") code = tasks::verify(ctx, dir, cert);
    else if (config.task == "flow") code = tasks::flow(ctx, dir, cert);
    else if (config.task == "gd") code = tasks::gd(ctx, dir, cert);
    else if (config.task == "hb") code = tasks::hb(ctx, dir, cert);
    else if (config.task == "estimate") code = tasks::estimate(ctx, dir, cert);
    else code = bench_beta_grid(ctx, dir, cert);

    if (!cert.is_null()) write_json_file((dir / "certificate.json").string(), cert);
    Json meta{{"artifact", "sqcflow"},
              {"version", kArtifactVersion},
              {"config", config.to_json()},
              {"function", {{"name", ctx.entry.name}, {"provenance", ctx.entry.provenance},
                            {"dim", ctx.entry.oracle.dim}, {"domain", ctx.entry.oracle.domain.describe()}}},
              {"constants", ctx.constants.to_json()},
              {"notes", ctx.notes}};
    write_json_file((dir / "meta.json").string(), meta);
    return code;
  } catch (const Error& e) {
    report(to_string(e.kind()), e.what(), e.at());
    return exit_code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    report("InvalidParameter", e.what(), std::nullopt);
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    report("InvalidParameter", e.what(), std::nullopt);
    return kExitUsage;
  }
}

}  // namespace sqcflow

#include "sqcflow/bench.hpp"
