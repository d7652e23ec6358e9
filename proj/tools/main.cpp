// Command-line front end: one subcommand per task. Flags override values
// read from --config.

#include "sqcflow/sqcflow.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using sqcflow::Json;

struct Options {
  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  std::string function;
  Json params = Json::object();
};

template <class T>
void param(CLI::App* app, Options& o, const std::string& flag, const std::string& key, const std::string& help) {
  app->add_option_function<T>(flag, [&o, key](const T& v) { o.params[key] = v; }, help);
}

void point_param(CLI::App* app, Options& o, const std::string& flag, const std::string& key,
                 const std::string& help) {
  app->add_option_function<std::vector<double>>(
         flag,
         [&o, key](const std::vector<double>& v) {
           o.params[key] = v.size() == 1 ? Json(v.front()) : Json(v);
         },
         help)
      ->expected(1, -1);
}

void function_option(CLI::App* app, Options& o) {
  app->add_option("--function,-f", o.function, "catalog name, max(A,B) or scale(a,A)");
}

int list_functions() {
  sqcflow::CsvWriter csv(std::cout);
  csv.row({"name", "dim", "gamma", "L", "minimizer_known", "counterexample", "provenance"});
  for (const auto& name : sqcflow::catalog_names()) {
    const auto e = sqcflow::make_catalog_entry(name);
    const auto& o = e.oracle;
    csv.row({name, std::to_string(o.dim), o.known_modulus ? sqcflow::format_real(*o.known_modulus) : "",
             o.known_lipschitz ? sqcflow::format_real(*o.known_lipschitz) : "",
             o.known_minimizer ? "true" : "false", e.counterexample ? "true" : "false", e.provenance});
  }
  return sqcflow::kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sqcflow: strongly quasiconvex minimization toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config,-c", o.config_path, "JSON experiment config");
  app.add_option("--output-dir,-o", o.output_dir, "directory for trace.csv, certificate.json, meta.json");
  app.add_option_function<std::uint64_t>("--seed", [&o](const std::uint64_t& s) { o.seed = s; }, "random seed");

  auto* list = app.add_subcommand("list-functions", "print the function catalog as CSV");

  auto* verify = app.add_subcommand("verify", "sampled check of a convexity or monotonicity class");
  function_option(verify, o);
  param<std::string>(verify, o, "--property", "property",
                     "strong_quasiconvexity, gradient_characterization, new_monotonicity, ..., or ladder");
  param<double>(verify, o, "--gamma", "gamma", "modulus (default: catalog or empirical)");
  param<double>(verify, o, "--mu", "mu", "PL / quasi-strong convexity constant");
  param<std::size_t>(verify, o, "--pairs", "pairs", "number of sampled pairs");
  param<std::size_t>(verify, o, "--lambdas", "lambdas", "random lambdas per pair");

  auto* flow = app.add_subcommand("flow", "integrate the first- or second-order gradient flow");
  function_option(flow, o);
  param<std::size_t>(flow, o, "--order", "order", "1 or 2");
  param<double>(flow, o, "--alpha", "alpha", "damping of the second-order flow");
  point_param(flow, o, "--x0", "x0", "initial point (one value broadcasts)");
  point_param(flow, o, "--v0", "v0", "initial velocity");
  param<double>(flow, o, "--t-end", "t_end", "final time");
  param<double>(flow, o, "--dt", "dt", "time step");
  param<std::string>(flow, o, "--integrator", "integrator", "rk4 or euler");
  param<double>(flow, o, "--gamma", "gamma", "modulus");
  param<double>(flow, o, "--L", "L", "gradient Lipschitz constant");
  param<double>(flow, o, "--kappa", "kappa", "curvature ratio for the Lyapunov function");
  param<double>(flow, o, "--stop-radius", "stop_radius", "stop once |x - x_bar| <= r");

  auto* gd = app.add_subcommand("gd", "gradient method with certificates");
  function_option(gd, o);
  param<double>(gd, o, "--beta", "beta", "constant step");
  param<std::vector<double>>(gd, o, "--betas", "betas", "step sequence");
  gd->add_flag_function("--optimal", [&o](std::int64_t n) { o.params["optimal"] = n > 0; },
                        "use beta* = gamma / (2 L0^2)");
  point_param(gd, o, "--x0", "x0", "initial point");
  param<std::size_t>(gd, o, "--max-iters", "max_iters", "iteration limit");
  param<double>(gd, o, "--stop-grad-tol", "stop_grad_tol", "gradient-norm stopping tolerance");
  param<double>(gd, o, "--stop-radius", "stop_radius", "stop once |x - x_bar| <= r");
  param<double>(gd, o, "--gamma", "gamma", "modulus");
  param<double>(gd, o, "--L0", "L0", "sublevel-set Lipschitz constant");

  auto* hb = app.add_subcommand("hb", "heavy-ball method with energy certificate");
  function_option(hb, o);
  param<double>(hb, o, "--theta", "theta", "momentum in ]0, 1[");
  param<double>(hb, o, "--beta", "beta", "step");
  point_param(hb, o, "--x0", "x0", "initial point");
  point_param(hb, o, "--x-prev", "x_prev", "previous iterate (default x0)");
  param<std::size_t>(hb, o, "--max-iters", "max_iters", "iteration limit");
  param<double>(hb, o, "--stop-grad-tol", "stop_grad_tol", "gradient-norm stopping tolerance");
  param<double>(hb, o, "--gamma", "gamma", "modulus");
  param<double>(hb, o, "--L", "L", "gradient Lipschitz constant");

  auto* est = app.add_subcommand("estimate", "empirical constants");
  function_option(est, o);
  param<std::string>(est, o, "--constant", "constant", "L0, gamma, kappa or minimizer");
  param<std::size_t>(est, o, "--samples", "samples", "number of samples");
  point_param(est, o, "--x0", "x0", "starting point");

  auto* bench = app.add_subcommand("bench", "fixed batteries or a step-size grid");
  function_option(bench, o);
  bench->add_option_function<std::string>("suite", [&o](const std::string& s) { o.params["suite"] = s; },
                                          "acceptance, ladder or rates");
  param<std::vector<double>>(bench, o, "--betas", "betas", "step grid for --function");
  point_param(bench, o, "--x0", "x0", "initial point");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return sqcflow::kExitUsage;
  }

  if (list->parsed()) return list_functions();

  sqcflow::ExperimentConfig cfg;
  try {
    if (!o.config_path.empty()) cfg = sqcflow::ExperimentConfig::from_file(o.config_path);
  } catch (const sqcflow::Error& e) {
    std::cerr << Json{{"error", sqcflow::to_string(e.kind())}, {"message", e.what()}}.dump() << std::endl;
    return sqcflow::kExitUsage;
  }
  for (auto* sub : app.get_subcommands()) cfg.task = sub->get_name();
  if (!o.function.empty()) cfg.function = o.function;
  if (!o.output_dir.empty()) cfg.output_dir = o.output_dir;
  if (o.seed) cfg.seed = o.seed;
  for (const auto& [k, v] : o.params.items()) cfg.task_params[k] = v;
  return sqcflow::run_experiment(cfg);
}
