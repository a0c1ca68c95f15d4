#ifndef EGW_SOLVER_HPP
#define EGW_SOLVER_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "egw/objective.hpp"
#include "egw/types.hpp"

namespace egw {

enum class Algorithm { fgm, adaptive, auto_select };
enum class SolveStatus { converged, max_iters, aborted };
enum class LMode { theoretical, fixed, line_search };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::fgm: return "fgm";
    case Algorithm::adaptive: return "adaptive";
    default: return "auto";
  }
}
inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iters: return "max_iters";
    default: return "aborted";
  }
}

struct SolveConfig {
  Algorithm algorithm = Algorithm::auto_select;  // auto: fgm iff certified convex
  double grad_tol = 5e-8;
  long max_outer_iters = 5000;
  // Requested sup-norm plan error per oracle call. 0 picks the constant
  // schedule delta' = 32 M delta sum||x||||y|| <= grad_tol/10.
  double delta_plan = 0.0;
  // Convex mode only: when > 0, also stop after the explicit iteration budget
  // for an eta-approximate solution (eta = target_gap).
  double target_gap = 0.0;
  LMode l_mode = LMode::theoretical;
  double l_fixed = 0.0;
  double line_search_shrink = 0.99;
  long line_search_max_steps = 500;
  bool warm_start = true;
  unsigned long long seed = 0;  // recorded for reproducibility bookkeeping
  bool reject_stationary_init = true;
  bool box_projection_debug = false;  // entrywise clamp variant of the listing
  OracleConfig oracle;
};

struct IterRecord {
  long iter = 0;
  double phi = std::numeric_limits<double>::quiet_NaN();  // Phi(B_k)
  double residual = 0.0;   // fgm: ||G_k||_F at A_k; adaptive: ||beta^-1(B_k-A_k)||_F
  double envelope = 0.0;   // theorem rate bound at this k (best-iterate proxy)
  double delta_sup = 0.0;  // gradient-oracle certificate at A_k
  long sinkhorn_iters = 0;
  double grad_norm_a = 0.0;  // ||G~(A_k)||_F (equals residual for fgm)
  double b_norm = 0.0;       // ||B_k||_F, for feasibility audits
};

struct SolveReport {
  Algorithm algorithm = Algorithm::fgm;
  SolveStatus status = SolveStatus::aborted;
  Matrix final_a;        // returned B iterate
  Matrix final_inner_a;  // prox center A_k at termination
  Matrix final_plan;     // coupling at final_a
  double objective = std::numeric_limits<double>::quiet_NaN();  // Phi(final_a)
  double best_objective = std::numeric_limits<double>::quiet_NaN();
  long best_iter = -1;
  double best_a_norm = 0.0;  // ||B_hat*||_F, the envelope proxy
  double final_grad_norm = std::numeric_limits<double>::quiet_NaN();
  long outer_iterations = 0;
  long total_sinkhorn_iterations = 0;
  double l_used = 0.0;
  double delta_plan_used = 0.0;
  double delta_prime = 0.0;
  double c0_distance = 0.0;  // ||C0 - B_hat*||_F (adaptive envelopes)
  std::vector<IterRecord> trace;
  std::vector<std::string> warnings;
};

namespace detail {

inline double resolve_delta_plan(const Problem& prob, const SolveConfig& cfg) {
  if (cfg.delta_plan > 0.0) return cfg.delta_plan;
  if (prob.delta_oracle > 0.0) return prob.delta_oracle;
  const double denom = 10.0 * 32.0 * prob.m * prob.sum_norm_products;
  if (denom <= 0.0) return 1e-9;  // all atoms at the origin
  return cfg.grad_tol / denom;
}

// Convex-mode iteration budget for an eta-approximate solution (conservative
// ||B*|| <= M/2 instantiation).
inline long fgm_iteration_budget(double eta, double delta_prime, double m) {
  const double slack = eta - 3.0 * delta_prime;
  if (!(slack > 0.0)) return std::numeric_limits<long>::max();
  const double k = -1.5 + 0.5 * std::sqrt(1.0 + 128.0 * m * m / slack);
  if (!(k < 2e18)) return std::numeric_limits<long>::max();
  return std::max(0L, static_cast<long>(std::ceil(k)));
}

struct OracleRunner {
  const Problem& prob;
  OracleConfig cfg;
  bool warm_start = true;
  std::optional<Vector> warm_u;
  long total_iters = 0;

  OracleEvaluation eval(const Matrix& a) {
    OracleEvaluation out =
        evaluate_phi(prob, a, cfg, warm_start && warm_u ? &*warm_u : nullptr);
    total_iters += out.cert.iterations;
    if (warm_start) warm_u = out.coupling.u;
    return out;
  }
};

inline void fill_fgm_envelope(SolveReport& rep, double l, double delta_prime) {
  // Phi(B_k) - Phi(B*) <= 2 L ||B*||^2 / ((k+1)(k+2)) + 3 delta'
  const double bnorm2 = rep.best_a_norm * rep.best_a_norm;
  for (auto& row : rep.trace) {
    const double k = double(row.iter);
    row.envelope = 2.0 * l * bnorm2 / ((k + 1.0) * (k + 2.0)) + 3.0 * delta_prime;
  }
}

inline void fill_adaptive_envelope(SolveReport& rep, const Problem& prob, double l,
                                   double delta_prime) {
  // min_i ||beta^-1(B_i - A_i)||^2 <= 96 L^2 ||C0-B*||^2 / (k(k+1)(k+2))
  //   + 24 L L' (||B*||^2 + 5 M^2/16)/k + 8 L delta'   (nonconvex)
  // and without the middle term when Phi is convex.
  const double c0b = rep.c0_distance * rep.c0_distance;
  const double bnorm2 = rep.best_a_norm * rep.best_a_norm;
  const double mid = prob.certified_convex
                         ? 0.0
                         : 24.0 * l * prob.l_prime * (bnorm2 + 5.0 * prob.m * prob.m / 16.0);
  for (auto& row : rep.trace) {
    const double k = double(row.iter);
    row.envelope = 96.0 * l * l * c0b / (k * (k + 1.0) * (k + 2.0)) +
                   (mid > 0.0 ? mid / k : 0.0) + 8.0 * l * delta_prime;
  }
}

// Trace rows and b_iterates are parallel arrays (row p describes the p-th
// computed B iterate regardless of the iteration numbering offset).
inline void finalize_best(SolveReport& rep, const std::vector<Matrix>& b_iterates,
                          const Matrix* c0 = nullptr) {
  rep.best_objective = std::numeric_limits<double>::infinity();
  size_t best_pos = b_iterates.size();
  for (size_t p = 0; p < rep.trace.size() && p < b_iterates.size(); ++p) {
    const auto& row = rep.trace[p];
    if (std::isfinite(row.phi) && row.phi < rep.best_objective) {
      rep.best_objective = row.phi;
      rep.best_iter = row.iter;
      best_pos = p;
    }
  }
  if (best_pos < b_iterates.size()) {
    rep.best_a_norm = b_iterates[best_pos].norm();
    if (c0) rep.c0_distance = (*c0 - b_iterates[best_pos]).norm();
  }
}

}  // namespace detail

/// Algorithm 1: fast gradient method with inexact oracle on the Frobenius
/// ball, L = 64, alpha_k = (k+1)/2, tau_k = 2/(k+3). Intended for the
/// certified-convex regime; running it without the certificate is allowed
/// but recorded as a warning.
///
/// Stops once the gradient at the candidate iterate B_k falls below grad_tol
/// (the returned point then honors the advertised tolerance; the trace still
/// records ||G_k|| at the prox centers A_k).
inline SolveReport solve_fgm(const Problem& prob, const SolveConfig& cfg = {}) {
  SolveReport rep;
  rep.algorithm = Algorithm::fgm;
  const double l = cfg.l_mode == LMode::fixed && cfg.l_fixed > 0.0 ? cfg.l_fixed : 64.0;
  rep.l_used = l;
  if (!prob.certified_convex)
    rep.warnings.push_back("fgm run without a convexity certificate");
  const double delta_plan = detail::resolve_delta_plan(prob, cfg);
  rep.delta_plan_used = delta_plan;
  rep.delta_prime = prob.delta_prime(delta_plan);

  long budget = std::numeric_limits<long>::max();
  if (cfg.target_gap > 0.0) {
    budget = detail::fgm_iteration_budget(cfg.target_gap, rep.delta_prime, prob.m);
    if (budget == std::numeric_limits<long>::max())
      rep.warnings.push_back("target gap not reachable: eta <= 3 delta'");
  }

  detail::OracleRunner grad_oracle{prob, cfg.oracle, cfg.warm_start, std::nullopt, 0};
  detail::OracleRunner value_oracle{prob, cfg.oracle, cfg.warm_start, std::nullopt, 0};
  grad_oracle.cfg.delta_plan = delta_plan;
  value_oracle.cfg.delta_plan = delta_plan;

  Matrix a = Matrix::Zero(prob.d0(), prob.d1());
  Matrix b = a, c = a, w = a, g = a;
  std::vector<Matrix> b_iterates;

  rep.status = SolveStatus::max_iters;
  try {
    OracleEvaluation eval_a = grad_oracle.eval(a);
    g = gradient(prob, a, eval_a.coupling.plan);
    w = 0.5 * g;  // alpha_0 G_0

    for (long k = 0;; ++k) {
      b = project_dm(a - g / l, prob.m);
      c = project_dm(-w / l, prob.m);

      OracleEvaluation eval_b = value_oracle.eval(b);
      const Matrix g_b = gradient(prob, b, eval_b.coupling.plan);

      IterRecord row;
      row.iter = k;
      row.phi = eval_b.value;
      row.residual = g.norm();
      row.grad_norm_a = row.residual;
      row.delta_sup = eval_a.cert.delta_sup;
      row.sinkhorn_iters = eval_a.cert.iterations + eval_b.cert.iterations;
      row.b_norm = b.norm();
      rep.trace.push_back(row);
      b_iterates.push_back(b);

      rep.final_a = b;
      rep.final_inner_a = a;
      rep.final_plan = eval_b.coupling.plan;
      rep.objective = eval_b.value;
      rep.final_grad_norm = g_b.norm();
      rep.outer_iterations = k + 1;

      if (g_b.norm() < cfg.grad_tol) {
        rep.status = SolveStatus::converged;
        break;
      }
      if (k >= budget) {
        rep.status = SolveStatus::converged;  // explicit eta-budget stop
        rep.warnings.push_back("stopped at the eta-accuracy iteration budget");
        break;
      }
      if (k + 1 >= cfg.max_outer_iters) {
        rep.status = SolveStatus::max_iters;
        break;
      }

      const double tau = 2.0 / (double(k) + 3.0);
      a = tau * c + (1.0 - tau) * b;
      eval_a = grad_oracle.eval(a);
      g = gradient(prob, a, eval_a.coupling.plan);
      w += (double(k + 1) + 1.0) / 2.0 * g;  // alpha_{k+1} G_{k+1}
    }
  } catch (const NumericError& e) {
    rep.status = SolveStatus::aborted;
    rep.warnings.push_back(std::string("oracle failure: ") + e.what());
  }

  rep.total_sinkhorn_iterations = grad_oracle.total_iters + value_oracle.total_iters;
  detail::finalize_best(rep, b_iterates);
  detail::fill_fgm_envelope(rep, l, rep.delta_prime);
  return rep;
}

/// Algorithm 2: adaptive (accelerated, convexity-agnostic) gradient method,
/// beta_k = 1/(2L), gamma_k = k/(4L), tau_k = 2/(k+2), projections onto the
/// Frobenius ball D_M (the listing's duplicated entrywise-clamp lines are
/// available behind box_projection_debug for comparison).
inline SolveReport solve_adaptive(const Problem& prob, const SolveConfig& cfg = {},
                                  std::optional<Matrix> c0_opt = std::nullopt) {
  SolveReport rep;
  rep.algorithm = Algorithm::adaptive;

  double l = prob.l_smooth;
  if (cfg.l_mode == LMode::fixed) {
    if (!(cfg.l_fixed > 0.0)) throw ValidationError("fixed L must be positive");
    l = cfg.l_fixed;
  }
  rep.l_used = l;
  const double delta_plan = detail::resolve_delta_plan(prob, cfg);
  rep.delta_plan_used = delta_plan;
  rep.delta_prime = prob.delta_prime(delta_plan);

  Matrix c_prev = c0_opt ? *c0_opt
                         : Matrix::Constant(prob.d0(), prob.d1(),
                                            std::min(prob.m, 1.0) * 1e-5);
  if (c_prev.rows() != prob.d0() || c_prev.cols() != prob.d1())
    throw ValidationError("C0 must be d0 x d1");
  if (c_prev.norm() > prob.m / 2.0 + 1e-12)
    throw ValidationError("C0 lies outside D_M");

  detail::OracleRunner grad_oracle{prob, cfg.oracle, cfg.warm_start, std::nullopt, 0};
  detail::OracleRunner value_oracle{prob, cfg.oracle, cfg.warm_start, std::nullopt, 0};
  grad_oracle.cfg.delta_plan = delta_plan;
  value_oracle.cfg.delta_plan = delta_plan;

  const Matrix c0 = c_prev;
  Matrix a = c_prev, b, c = c_prev, g;
  std::vector<Matrix> b_iterates;

  rep.status = SolveStatus::max_iters;
  try {
    OracleEvaluation eval_a = grad_oracle.eval(a);
    g = gradient(prob, a, eval_a.coupling.plan);
    if (cfg.reject_stationary_init && g.norm() < 10.0 * rep.delta_prime)
      throw ValidationError(
          "C0 is (nearly) a stationary point; pick a different initialization "
          "or pass --allow-stationary-init");

    for (long k = 1;; ++k) {
      const double beta = 1.0 / (2.0 * l);
      const double gamma_k = double(k) / (4.0 * l);
      if (cfg.box_projection_debug) {
        auto clamp = [&](const Matrix& z) {
          return z.cwiseMax(-prob.m / 2.0).cwiseMin(prob.m / 2.0).eval();
        };
        b = clamp(a - beta * g);
        c = clamp(c_prev - gamma_k * g);
      } else {
        b = project_dm(a - beta * g, prob.m);
        c = project_dm(c_prev - gamma_k * g, prob.m);
      }
      const double residual = (b - a).norm() / beta;

      OracleEvaluation eval_b = value_oracle.eval(b);
      const Matrix g_b = gradient(prob, b, eval_b.coupling.plan);

      IterRecord row;
      row.iter = k;
      row.phi = eval_b.value;
      row.residual = residual;
      row.grad_norm_a = g.norm();
      row.delta_sup = eval_a.cert.delta_sup;
      row.sinkhorn_iters = eval_a.cert.iterations + eval_b.cert.iterations;
      row.b_norm = b.norm();
      rep.trace.push_back(row);
      b_iterates.push_back(b);

      rep.final_a = b;
      rep.final_inner_a = a;
      rep.final_plan = eval_b.coupling.plan;
      rep.objective = eval_b.value;
      rep.final_grad_norm = g_b.norm();
      rep.outer_iterations = k;

      if (g_b.norm() < cfg.grad_tol) {
        rep.status = SolveStatus::converged;
        break;
      }
      if (k >= cfg.max_outer_iters) {
        rep.status = SolveStatus::max_iters;
        break;
      }

      const double tau = 2.0 / (double(k) + 2.0);
      a = tau * c + (1.0 - tau) * b;
      c_prev = c;
      eval_a = grad_oracle.eval(a);
      g = gradient(prob, a, eval_a.coupling.plan);
    }
  } catch (const NumericError& e) {
    rep.status = SolveStatus::aborted;
    rep.warnings.push_back(std::string("oracle failure: ") + e.what());
  }

  rep.total_sinkhorn_iterations = grad_oracle.total_iters + value_oracle.total_iters;
  detail::finalize_best(rep, b_iterates, &c0);
  detail::fill_adaptive_envelope(rep, prob, l, rep.delta_prime);
  return rep;
}

/// Dispatch per the auto rule: fgm iff the instance is certified convex.
inline SolveReport solve(const Problem& prob, SolveConfig cfg = {},
                         std::optional<Matrix> c0 = std::nullopt) {
  Algorithm algo = cfg.algorithm;
  if (algo == Algorithm::auto_select)
    algo = prob.certified_convex ? Algorithm::fgm : Algorithm::adaptive;
  if (algo == Algorithm::fgm) return solve_fgm(prob, cfg);
  return solve_adaptive(prob, cfg, std::move(c0));
}

/// Geometric line search on the smoothness constant: starting from the
/// theoretical bound, multiply by `shrink` while the run still converges;
/// returns the last converging L (the theoretical value, with a warning via
/// the report, when even that fails). fixed-L mode bypasses the search.
inline double line_search_L(const Problem& prob, SolveConfig cfg,
                            std::optional<Matrix> c0 = std::nullopt) {
  if (cfg.l_mode == LMode::fixed && cfg.l_fixed > 0.0) return cfg.l_fixed;
  const double l0 = prob.l_smooth;
  cfg.l_mode = LMode::fixed;
  double best = l0;
  bool any = false;
  double trial = l0;
  for (long step = 0; step <= cfg.line_search_max_steps; ++step) {
    cfg.l_fixed = trial;
    SolveReport rep = solve_adaptive(prob, cfg, c0);
    const bool ok = rep.status == SolveStatus::converged;
    if (!ok) break;
    best = trial;
    any = true;
    trial *= cfg.line_search_shrink;
  }
  return any ? best : l0;
}

struct SweepEntry {
  double eps = 0.0;
  SolveReport report;
  double stationarity_residual = 0.0;  // ||beta^-1(B-A)||_F at the last iterate
  double corollary12_bound = 0.0;      // 32 delta sum||x||||y|| + residual
};

/// Continuation toward the unregularized problem: solve at each eps of a
/// strictly decreasing schedule, warm-starting the auxiliary matrix (and the
/// Sinkhorn scalings, via the solver's own caches) from the previous stage.
/// Kernel overflow at a small eps truncates the sweep with a warning entry.
inline std::vector<SweepEntry> eps_sweep(const DiscreteMeasure& mu0,
                                         const DiscreteMeasure& mu1,
                                         const std::vector<double>& schedule,
                                         SolveConfig cfg = {}) {
  if (schedule.empty()) throw ValidationError("eps schedule is empty");
  for (size_t i = 0; i + 1 < schedule.size(); ++i)
    if (!(schedule[i] > schedule[i + 1]))
      throw ValidationError("eps schedule must be strictly decreasing");

  std::vector<SweepEntry> out;
  std::optional<Matrix> warm_a;
  for (const double eps : schedule) {
    Problem prob = make_problem(mu0, mu1, eps);
    SweepEntry entry;
    entry.eps = eps;
    SolveConfig stage_cfg = cfg;
    if (warm_a) stage_cfg.reject_stationary_init = false;  // continuation restarts
    try {
      entry.report = solve(prob, stage_cfg, warm_a);
    } catch (const NumericError& e) {
      entry.report.status = SolveStatus::aborted;
      entry.report.warnings.push_back(std::string("sweep truncated: ") + e.what());
      out.push_back(std::move(entry));
      break;
    }
    if (!entry.report.trace.empty()) {
      const auto& last = entry.report.trace.back();
      entry.stationarity_residual = entry.report.algorithm == Algorithm::adaptive
                                        ? last.residual
                                        : last.grad_norm_a;
      entry.corollary12_bound =
          32.0 * entry.report.delta_plan_used * prob.sum_norm_products +
          entry.stationarity_residual;
    }
    if (entry.report.status == SolveStatus::aborted) {
      out.push_back(std::move(entry));
      break;
    }
    warm_a = entry.report.final_a;
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace egw

#endif  // EGW_SOLVER_HPP
