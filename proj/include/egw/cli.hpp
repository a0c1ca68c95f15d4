#ifndef EGW_CLI_HPP
#define EGW_CLI_HPP

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "egw/debias.hpp"
#include "egw/measure_io.hpp"
#include "egw/report_io.hpp"
#include "egw/types.hpp"

namespace egw::cli {

// Exit codes: 0 success, 2 validation, 3 solver abort, 4 I/O.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitSolver = 3;
inline constexpr int kExitIo = 4;

struct GlobalFlags {
  unsigned long long seed = 0;
  int jobs = 1;
  bool quiet = false;
  bool json_errors = false;
};

namespace detail {

inline DiscreteMeasure load_input_measure(const std::string& path, bool raster,
                                          bool drop_zero_mass) {
  if (raster) return raster_to_measure(load_raster(path));
  return load_measure(path, drop_zero_mass);
}

inline Matrix load_matrix_csv(const std::string& path) {
  RasterImage grid = load_raster(path);  // same numeric-grid format
  return grid.intensity;
}

inline Algorithm parse_algo(const std::string& s) {
  if (s == "fgm") return Algorithm::fgm;
  if (s == "adaptive") return Algorithm::adaptive;
  if (s == "auto") return Algorithm::auto_select;
  throw ValidationError("unknown --algo '" + s + "' (fgm|adaptive|auto)");
}

inline void apply_l_flag(const std::string& s, SolveConfig& cfg) {
  if (s == "theoretical") {
    cfg.l_mode = LMode::theoretical;
  } else if (s == "search") {
    cfg.l_mode = LMode::line_search;
  } else {
    try {
      cfg.l_fixed = std::stod(s);
    } catch (const std::exception&) {
      throw ValidationError("--L expects theoretical|search|<value>");
    }
    if (!(cfg.l_fixed > 0.0)) throw ValidationError("--L value must be positive");
    cfg.l_mode = LMode::fixed;
  }
}

}  // namespace detail

struct SolveArgs {
  std::string mu0_path, mu1_path;
  double eps = 0.0;
  std::string algo = "auto";
  std::string l_flag = "theoretical";
  SolveConfig cfg;
  bool no_center = false;
  bool drop_zero_mass = false;
  bool raster = false;
  std::optional<double> m_override;
  std::string trace_path, plan_path, report_path;
};

inline int cmd_solve(const SolveArgs& args, const GlobalFlags& g, std::ostream& out) {
  const auto raw0 = detail::load_input_measure(args.mu0_path, args.raster, args.drop_zero_mass);
  const auto raw1 = detail::load_input_measure(args.mu1_path, args.raster, args.drop_zero_mass);
  const DiscreteMeasure mu0 = args.no_center ? raw0 : center(raw0);
  const DiscreteMeasure mu1 = args.no_center ? raw1 : center(raw1);
  const bool centered = mu0.is_centered(1e-9) && mu1.is_centered(1e-9);

  SolveConfig cfg = args.cfg;
  cfg.seed = g.seed;
  cfg.algorithm = detail::parse_algo(args.algo);
  detail::apply_l_flag(args.l_flag, cfg);

  Problem prob = make_problem(mu0, mu1, args.eps, args.m_override);
  if (cfg.l_mode == LMode::line_search) {
    const double l = line_search_L(prob, cfg);
    cfg.l_mode = LMode::fixed;
    cfg.l_fixed = l;
    if (!g.quiet) out << "line_search_L = " << fmt17(l) << "\n";
  }
  SolveReport rep = solve(prob, cfg);

  const double s1 = s1_constant(mu0, mu1);
  out << "s1 = " << fmt17(s1) << "\n";
  out << "s2 = " << fmt17(rep.objective) << "\n";
  if (centered)
    out << "s_eps = " << fmt17(s1 + rep.objective) << "\n";
  else
    out << "s_eps = (not reported: decomposition needs centered marginals)\n";
  out << "final_grad_norm = " << fmt17(rep.final_grad_norm) << "\n";
  out << "status = " << to_string(rep.status) << "\n";
  if (!g.quiet)
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";

  if (!args.plan_path.empty()) write_text_file(args.plan_path, plan_to_csv(rep.final_plan));
  if (!args.trace_path.empty()) write_text_file(args.trace_path, trace_to_csv(rep));
  if (!args.report_path.empty()) {
    nlohmann::json j = report_to_json(rep);
    j["eps"] = args.eps;
    j["s1"] = s1;
    j["s_eps_total"] =
        centered ? nlohmann::json(s1 + rep.objective) : nlohmann::json(nullptr);
    j["centered"] = centered;
    j["seed"] = g.seed;
    write_text_file(args.report_path, j.dump(2) + "\n");
  }
  return rep.status == SolveStatus::aborted ? kExitSolver : kExitOk;
}

struct SinkhornArgs {
  std::string mu0_path, mu1_path;
  double eps = 0.0;
  std::optional<double> gamma, delta;
  long kmax = 100000;
  bool log_domain = false;
  bool no_center = false;
  bool drop_zero_mass = false;
  std::string aux_path, out_path, cert_path;
};

inline int cmd_sinkhorn(const SinkhornArgs& args, const GlobalFlags& g, std::ostream& out) {
  const auto raw0 = detail::load_input_measure(args.mu0_path, false, args.drop_zero_mass);
  const auto raw1 = detail::load_input_measure(args.mu1_path, false, args.drop_zero_mass);
  const DiscreteMeasure mu0 = args.no_center ? raw0 : center(raw0);
  const DiscreteMeasure mu1 = args.no_center ? raw1 : center(raw1);
  Matrix aux = Matrix::Zero(mu0.dim(), mu1.dim());
  if (!args.aux_path.empty()) aux = detail::load_matrix_csv(args.aux_path);

  const Matrix cost = cost_matrix(mu0, mu1, aux);
  SinkhornOptions opts;
  opts.k_max = args.kmax;
  SinkhornResult res;
  if (args.log_domain) {
    const double lam = contraction_coefficient_log(-cost / args.eps);
    opts.lambda_hint = lam;
    opts.gamma = args.gamma ? *args.gamma
                            : oracle_tolerance_schedule(*args.delta, lam,
                                                        mu1.weights().minCoeff());
    res = sinkhorn_log_domain(cost, args.eps, mu0.weights(), mu1.weights(), opts);
  } else {
    const Kernel kernel = build_kernel_from_cost(cost, args.eps);
    const double lam = contraction_coefficient(kernel.k);
    opts.lambda_hint = lam;
    opts.gamma = args.gamma ? *args.gamma
                            : oracle_tolerance_schedule(*args.delta, lam,
                                                        mu1.weights().minCoeff());
    res = sinkhorn(kernel, mu0.weights(), mu1.weights(), opts);
  }

  out << "iterations = " << res.cert.iterations << "\n";
  out << "marginal_violation = " << fmt17(res.cert.marginal_violation) << "\n";
  out << "delta_hilbert = " << fmt17(res.cert.delta_hilbert) << "\n";
  out << "delta_sup = " << fmt17(res.cert.delta_sup) << "\n";
  out << "lambda_K = " << fmt17(res.cert.lambda_k) << "\n";
  out << "met_tolerance = " << (res.cert.met_tolerance ? "true" : "false") << "\n";
  if (!g.quiet && !res.cert.certified)
    std::cerr << "warning: log-domain run; certificate constants hold for the "
                 "multiplicative scheme, values are advisory\n";

  if (!args.out_path.empty())
    write_text_file(args.out_path, plan_to_csv(res.coupling.plan));
  if (!args.cert_path.empty())
    write_text_file(args.cert_path, certificate_to_json(res.cert).dump(2) + "\n");
  return kExitOk;
}

struct DebiasArgs {
  std::string mu0_path, mu1_path;
  double eps = 0.0;
  double rotate_degrees = 0.0;
  bool raster = false;
  bool drop_zero_mass = false;
  std::string algo = "auto";
  SolveConfig cfg;
};

inline int cmd_debias(const DebiasArgs& args, const GlobalFlags& g, std::ostream& out) {
  const auto mu0 = detail::load_input_measure(args.mu0_path, args.raster, args.drop_zero_mass);
  DiscreteMeasure mu1 = detail::load_input_measure(args.mu1_path, args.raster, args.drop_zero_mass);
  if (args.rotate_degrees != 0.0) {
    if (mu1.dim() != 2)
      throw ValidationError("--rotate applies to planar (d = 2) measures");
    const long quarter = std::lround(args.rotate_degrees / 90.0);
    const bool exact = std::abs(args.rotate_degrees - 90.0 * double(quarter)) < 1e-12;
    if (args.raster && !exact) {
      // off-grid angle: resample the raster like the image experiments do
      mu1 = raster_to_measure(
          rotate_raster(load_raster(args.mu1_path), args.rotate_degrees));
    } else {
      AffineIsometry map;
      map.rotation = rotation2d(args.rotate_degrees);
      mu1 = transform(mu1, map);
    }
  }

  SolveConfig cfg = args.cfg;
  cfg.seed = g.seed;
  cfg.algorithm = detail::parse_algo(args.algo);
  const DebiasedResult res = debiased_egw(mu0, mu1, args.eps, cfg);
  out << "s_eps_cross = " << fmt17(res.cross) << "\n";
  out << "s_eps_self0 = " << fmt17(res.self0) << "\n";
  out << "s_eps_self1 = " << fmt17(res.self1) << "\n";
  out << "debiased = " << fmt17(res.debiased) << "\n";
  if (!g.quiet)
    for (const auto& w : res.cross_result.report.warnings)
      std::cerr << "warning: " << w << "\n";
  return kExitOk;
}

struct BenchmarkArgs {
  BenchmarkSpec spec;
  std::string eps_rule = "convex-margin";
  double eps_fixed = 0.0;
  std::string out_path;
};

inline int cmd_benchmark(BenchmarkArgs args, const GlobalFlags& g, std::ostream& out) {
  args.spec.seed = g.seed;
  if (args.eps_rule == "convex-margin") {
    args.spec.eps_rule = EpsRule::convex_margin;
  } else if (args.eps_rule == "fixed") {
    if (!(args.eps_fixed > 0.0))
      throw ValidationError("--eps-rule fixed needs --eps-fixed > 0");
    args.spec.eps_rule = EpsRule::fixed;
    args.spec.eps_fixed = args.eps_fixed;
  } else {
    throw ValidationError("--eps-rule must be convex-margin or fixed");
  }
  const auto records = run_benchmark(args.spec, g.jobs);
  const std::string csv = benchmark_to_csv(records);
  if (!args.out_path.empty())
    write_text_file(args.out_path, csv);
  else
    out << csv;
  return kExitOk;
}

struct SweepArgs {
  std::string mu0_path, mu1_path;
  std::vector<double> eps_list;
  double eps_start = 0.0, eps_factor = 0.0;
  int eps_count = 0;
  std::string algo = "auto";
  std::string out_path;
  bool no_center = false;
  bool drop_zero_mass = false;
  SolveConfig cfg;
};

inline int cmd_sweep(const SweepArgs& args, const GlobalFlags& g, std::ostream& out) {
  std::vector<double> schedule = args.eps_list;
  if (schedule.empty()) {
    if (!(args.eps_start > 0.0) || args.eps_count < 1)
      throw ValidationError("give --eps-list or --eps-start/--eps-factor/--eps-count");
    if (!(args.eps_factor > 0.0 && args.eps_factor < 1.0))
      throw ValidationError("--eps-factor must lie in (0, 1) for a decreasing schedule");
    double e = args.eps_start;
    for (int i = 0; i < args.eps_count; ++i, e *= args.eps_factor) schedule.push_back(e);
  }
  for (size_t i = 0; i + 1 < schedule.size(); ++i)
    if (!(schedule[i] > schedule[i + 1]))
      throw ValidationError("eps schedule must be strictly decreasing");

  const auto raw0 = detail::load_input_measure(args.mu0_path, false, args.drop_zero_mass);
  const auto raw1 = detail::load_input_measure(args.mu1_path, false, args.drop_zero_mass);
  const DiscreteMeasure mu0 = args.no_center ? raw0 : center(raw0);
  const DiscreteMeasure mu1 = args.no_center ? raw1 : center(raw1);

  SolveConfig cfg = args.cfg;
  cfg.seed = g.seed;
  cfg.algorithm = detail::parse_algo(args.algo);
  const auto entries = eps_sweep(mu0, mu1, schedule, cfg);
  const std::string csv = sweep_to_csv(entries);
  if (!args.out_path.empty())
    write_text_file(args.out_path, csv);
  else
    out << csv;
  const bool truncated = !entries.empty() && entries.back().report.status == SolveStatus::aborted;
  if (truncated && !g.quiet)
    std::cerr << "warning: sweep truncated at eps = " << fmt17(entries.back().eps) << "\n";
  return kExitOk;
}

struct ValidateArgs {
  std::string path;
  bool raster = false;
  bool drop_zero_mass = false;
};

inline int cmd_validate(const ValidateArgs& args, std::ostream& out) {
  const auto m = detail::load_input_measure(args.path, args.raster, args.drop_zero_mass);
  const Moments mo = moments(m);
  out << "atoms = " << m.size() << "\n";
  out << "dim = " << m.dim() << "\n";
  out << "weight_sum = " << fmt17(m.weights().sum()) << "\n";
  out << "m2 = " << fmt17(mo.m2) << "\n";
  out << "m4 = " << fmt17(mo.m4) << "\n";
  out << "centered = " << (m.is_centered() ? "true" : "false") << "\n";
  return kExitOk;
}

inline void add_solver_flags(CLI::App* sub, SolveConfig& cfg) {
  sub->add_option("--grad-tol", cfg.grad_tol, "stop once ||G||_F falls below this");
  sub->add_option("--delta", cfg.delta_plan, "sup-norm oracle radius per inner solve");
  sub->add_option("--max-iters", cfg.max_outer_iters, "outer iteration cap");
  sub->add_option("--target-gap", cfg.target_gap,
                  "convex mode: stop at the explicit eta-accuracy iteration budget");
  sub->add_flag("--warm-start,!--no-warm-start", cfg.warm_start,
                "reuse Sinkhorn scalings across outer iterations");
  sub->add_option("--sinkhorn-kmax", cfg.oracle.k_max, "inner iteration cap");
  sub->add_flag("--log-domain", cfg.oracle.log_domain,
                "stabilized inner solves (certificates advisory)");
  sub->add_flag("--box-projection", cfg.box_projection_debug,
                "debug: entrywise-clamp projection variant of the adaptive method");
  sub->add_flag("--allow-stationary-init",
                [&cfg](size_t) { cfg.reject_stationary_init = false; },
                "skip the near-stationary C0 rejection");
}

inline int run(int argc, const char* const* argv) {
  GlobalFlags g;
  CLI::App app{"entropic Gromov-Wasserstein solver"};
  app.require_subcommand(1);
  app.add_option("--seed", g.seed, "seed for randomized subcommands");
  app.add_option("--jobs", g.jobs, "parallel independent runs (benchmark)");
  app.add_flag("--quiet", g.quiet, "suppress warnings and info lines");
  app.add_flag("--json-errors", g.json_errors, "machine-readable errors on stdout");

  SolveArgs solve_args;
  auto* solve_cmd = app.add_subcommand("solve", "solve the EGW problem between two measures");
  solve_cmd->add_option("mu0", solve_args.mu0_path)->required();
  solve_cmd->add_option("mu1", solve_args.mu1_path)->required();
  solve_cmd->add_option("--eps", solve_args.eps, "entropic regularization")->required();
  solve_cmd->add_option("--algo", solve_args.algo, "fgm|adaptive|auto");
  solve_cmd->add_option("--L", solve_args.l_flag, "theoretical|search|<value>");
  solve_cmd->add_option("-M,--domain-radius", [&solve_args](const std::vector<std::string>& v) {
    solve_args.m_override = std::stod(v.front());
    return true;
  }, "override the Frobenius-domain parameter M");
  solve_cmd->add_flag("--no-center", solve_args.no_center, "skip auto-centering");
  solve_cmd->add_flag("--drop-zero-mass", solve_args.drop_zero_mass,
                      "drop zero-weight atoms instead of rejecting the file");
  solve_cmd->add_flag("--raster", solve_args.raster, "inputs are intensity grids");
  solve_cmd->add_option("--trace", solve_args.trace_path, "per-iteration CSV");
  solve_cmd->add_option("--plan", solve_args.plan_path, "coupling CSV");
  solve_cmd->add_option("--report", solve_args.report_path, "solve report JSON");
  add_solver_flags(solve_cmd, solve_args.cfg);

  SinkhornArgs sink_args;
  auto* sink_cmd = app.add_subcommand("sinkhorn", "certified inner EOT solve");
  sink_cmd->add_option("mu0", sink_args.mu0_path)->required();
  sink_cmd->add_option("mu1", sink_args.mu1_path)->required();
  sink_cmd->add_option("--eps", sink_args.eps)->required();
  auto* gamma_opt = sink_cmd->add_option("--gamma", [&sink_args](const std::vector<std::string>& v) {
    sink_args.gamma = std::stod(v.front());
    return true;
  }, "stopping threshold on the marginal violation");
  auto* delta_opt = sink_cmd->add_option("--delta", [&sink_args](const std::vector<std::string>& v) {
    sink_args.delta = std::stod(v.front());
    return true;
  }, "Hilbert-metric oracle radius; scheduled into gamma");
  gamma_opt->excludes(delta_opt);
  delta_opt->excludes(gamma_opt);
  sink_cmd->add_option("--kmax", sink_args.kmax, "iteration cap");
  sink_cmd->add_option("--aux", sink_args.aux_path, "auxiliary matrix A (numeric grid file)");
  sink_cmd->add_flag("--log-domain", sink_args.log_domain);
  sink_cmd->add_flag("--no-center", sink_args.no_center);
  sink_cmd->add_flag("--drop-zero-mass", sink_args.drop_zero_mass);
  sink_cmd->add_option("--out", sink_args.out_path, "plan CSV");
  sink_cmd->add_option("--cert", sink_args.cert_path, "certificate JSON");

  DebiasArgs debias_args;
  auto* debias_cmd = app.add_subcommand("debias", "debiased EGW between two measures");
  debias_cmd->add_option("mu0", debias_args.mu0_path)->required();
  debias_cmd->add_option("mu1", debias_args.mu1_path)->required();
  debias_cmd->add_option("--eps", debias_args.eps)->required();
  debias_cmd->add_option("--rotate", debias_args.rotate_degrees,
                         "rotate the second measure (degrees; multiples of 90 are exact)");
  debias_cmd->add_flag("--raster", debias_args.raster, "inputs are intensity grids");
  debias_cmd->add_flag("--drop-zero-mass", debias_args.drop_zero_mass);
  debias_cmd->add_option("--algo", debias_args.algo, "fgm|adaptive|auto");
  add_solver_flags(debias_cmd, debias_args.cfg);

  BenchmarkArgs bench_args;
  auto* bench_cmd = app.add_subcommand("benchmark", "runtime scaling grid");
  bench_cmd->add_option("--dims", bench_args.spec.dims, "ambient dimensions")
      ->delimiter(',');
  bench_cmd->add_option("--sizes", bench_args.spec.sizes, "atom counts, increasing")
      ->delimiter(',');
  bench_cmd->add_option("--trials", bench_args.spec.trials, "instances per cell");
  bench_cmd->add_option("--time-budget", bench_args.spec.time_budget_seconds,
                        "cumulative seconds per (d, N) cell");
  bench_cmd->add_option("--eps-rule", bench_args.eps_rule, "convex-margin|fixed");
  bench_cmd->add_option("--eps-fixed", bench_args.eps_fixed);
  bench_cmd->add_option("--sigma0", bench_args.spec.generator.sigma0);
  bench_cmd->add_option("--sigma1", bench_args.spec.generator.sigma1);
  bench_cmd->add_option("--grad-tol", bench_args.spec.solve.grad_tol);
  bench_cmd->add_option("--out", bench_args.out_path, "records CSV (stdout if omitted)");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "eps -> 0 continuation");
  sweep_cmd->add_option("mu0", sweep_args.mu0_path)->required();
  sweep_cmd->add_option("mu1", sweep_args.mu1_path)->required();
  sweep_cmd->add_option("--eps-list", sweep_args.eps_list, "strictly decreasing")
      ->delimiter(',');
  sweep_cmd->add_option("--eps-start", sweep_args.eps_start);
  sweep_cmd->add_option("--eps-factor", sweep_args.eps_factor);
  sweep_cmd->add_option("--eps-count", sweep_args.eps_count);
  sweep_cmd->add_option("--algo", sweep_args.algo, "fgm|adaptive|auto");
  sweep_cmd->add_option("--out", sweep_args.out_path, "per-eps CSV (stdout if omitted)");
  sweep_cmd->add_flag("--no-center", sweep_args.no_center);
  sweep_cmd->add_flag("--drop-zero-mass", sweep_args.drop_zero_mass);
  add_solver_flags(sweep_cmd, sweep_args.cfg);

  ValidateArgs validate_args;
  auto* validate_cmd = app.add_subcommand("validate", "lint a measure file");
  validate_cmd->add_option("file", validate_args.path)->required();
  validate_cmd->add_flag("--raster", validate_args.raster);
  validate_cmd->add_flag("--drop-zero-mass", validate_args.drop_zero_mass);

  auto fail = [&](int code, const std::string& msg) {
    if (g.json_errors)
      std::cout << nlohmann::json{{"error", msg}, {"exit_code", code}}.dump() << "\n";
    else
      std::cerr << "error: " << msg << "\n";
    return code;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help and friends
      app.exit(e);
      return kExitOk;
    }
    return fail(kExitValidation, e.what());
  }

  try {
    if (*solve_cmd) return cmd_solve(solve_args, g, std::cout);
    if (*sink_cmd) {
      if (!sink_args.gamma && !sink_args.delta)
        return fail(kExitValidation, "sinkhorn needs --gamma or --delta");
      return cmd_sinkhorn(sink_args, g, std::cout);
    }
    if (*debias_cmd) return cmd_debias(debias_args, g, std::cout);
    if (*bench_cmd) return cmd_benchmark(bench_args, g, std::cout);
    if (*sweep_cmd) return cmd_sweep(sweep_args, g, std::cout);
    if (*validate_cmd) return cmd_validate(validate_args, std::cout);
  } catch (const ValidationError& e) {
    return fail(kExitValidation, e.what());
  } catch (const NumericError& e) {
    return fail(kExitSolver, e.what());
  } catch (const IoError& e) {
    return fail(kExitIo, e.what());
  } catch (const Error& e) {
    return fail(kExitSolver, e.what());
  }
  return fail(kExitValidation, "no subcommand given");
}

/// Test-friendly wrapper taking argv tokens without the program name.
inline int run_args(const std::vector<std::string>& tokens) {
  std::vector<std::string> full;
  full.push_back("egw");
  full.insert(full.end(), tokens.begin(), tokens.end());
  std::vector<const char*> argv;
  for (const auto& s : full) argv.push_back(s.c_str());
  return run(int(argv.size()), argv.data());
}

}  // namespace egw::cli

#endif  // EGW_CLI_HPP
