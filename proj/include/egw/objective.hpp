#ifndef EGW_OBJECTIVE_HPP
#define EGW_OBJECTIVE_HPP

#include <cmath>
#include <optional>
#include <utility>

#include "egw/cost.hpp"
#include "egw/measure.hpp"
#include "egw/sinkhorn.hpp"
#include "egw/types.hpp"

namespace egw {

/// Problem instance for the variational objective
///   Phi(A) = 32 ||A||_F^2 + OT_{A,eps}(mu0, mu1),  A in D_M,
/// together with the analytic constants its guarantees depend on.
struct Problem {
  DiscreteMeasure mu0;
  DiscreteMeasure mu1;
  double eps = 0.0;

  double m = 0.0;            // Frobenius-domain parameter, ||A||_F <= m/2
  double l_smooth = 0.0;     // 64 v (32^2/eps sqrt(M4 M4) - 64)
  double l_prime = 0.0;      // 32^2/eps sqrt(M4 M4), smoothness of the OT term
  double sqrt_m2m2 = 0.0;    // sqrt(M2(mu0) M2(mu1)) = M_{mu0,mu1}
  double sqrt_m4m4 = 0.0;
  bool certified_convex = false;
  double convexity_eps_threshold = 0.0;  // strictly convex once eps exceeds this
  double delta_oracle = 0.0;             // per-call plan-error radius; 0 = pick per run

  double sum_norm_products = 0.0;  // sum_ij ||x_i|| ||y_j||

  Eigen::Index n0() const { return mu0.size(); }
  Eigen::Index n1() const { return mu1.size(); }
  Eigen::Index d0() const { return mu0.dim(); }
  Eigen::Index d1() const { return mu1.dim(); }

  /// Gradient-level error induced by a plan-error radius delta:
  /// delta' = 32 M delta sum_ij ||x_i|| ||y_j||.
  double delta_prime(double delta_plan) const {
    return 32.0 * m * delta_plan * sum_norm_products;
  }
};

/// Fills the constants of Theorem-level guarantees:
/// weak convexity 32^2/eps sqrt(M4M4) - 64, strict convexity once
/// sqrt(M4M4) < eps/16, and L = 64 v (32^2/eps sqrt(M4M4) - 64).
/// Default M is sqrt(M2M2) + 1e-5; any M >= sqrt(M2M2) is accepted.
inline Problem make_problem(DiscreteMeasure mu0, DiscreteMeasure mu1, double eps,
                            std::optional<double> m_override = std::nullopt) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("eps must be a positive real");
  Problem p{std::move(mu0), std::move(mu1), eps};
  const Moments mo0 = moments(p.mu0);
  const Moments mo1 = moments(p.mu1);
  p.sqrt_m2m2 = std::sqrt(mo0.m2 * mo1.m2);
  p.sqrt_m4m4 = std::sqrt(mo0.m4 * mo1.m4);
  p.m = m_override ? *m_override : p.sqrt_m2m2 + 1e-5;
  if (!(p.m > 0.0) || p.m < p.sqrt_m2m2)
    throw ValidationError("M must be positive and at least sqrt(M2(mu0) M2(mu1))");
  p.l_prime = 32.0 * 32.0 * p.sqrt_m4m4 / eps;
  p.l_smooth = std::max(64.0, p.l_prime - 64.0);
  p.convexity_eps_threshold = 16.0 * p.sqrt_m4m4;
  p.certified_convex = p.sqrt_m4m4 < eps / 16.0;
  p.sum_norm_products = p.mu0.squared_norms().cwiseSqrt().sum() *
                        p.mu1.squared_norms().cwiseSqrt().sum();
  return p;
}

/// KL(plan || a b^T) with the 0 log 0 = 0 convention; entries below 1e-300
/// are treated as exact zeros (Sinkhorn plans can underflow).
inline double kl_divergence(const Matrix& plan, const Vector& a, const Vector& b) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < plan.rows(); ++i)
    for (Eigen::Index j = 0; j < plan.cols(); ++j) {
      const double p = plan(i, j);
      if (p < 1e-300) continue;
      acc += p * std::log(p / (a[i] * b[j]));
    }
  return acc;
}

/// Phi evaluated on an explicit plan: 32||A||^2 + <C, plan> + eps KL.
inline double phi_value(const Problem& prob, const Matrix& a, const Matrix& cost,
                        const Matrix& plan) {
  const double transport = cost.cwiseProduct(plan).sum();
  const double kl = kl_divergence(plan, prob.mu0.weights(), prob.mu1.weights());
  return 32.0 * a.squaredNorm() + transport + prob.eps * kl;
}

/// Inexact gradient from a plan (exact when the plan is the EOT coupling):
///   G = 64 A - 32 sum_ij plan_ij x_i y_j^T.
inline Matrix gradient(const Problem& prob, const Matrix& a, const Matrix& plan) {
  if (plan.rows() != prob.n0() || plan.cols() != prob.n1())
    throw ValidationError("gradient: plan dimensions do not match the measures");
  Matrix g = 64.0 * a;
  g.noalias() -= 32.0 * (prob.mu0.points().transpose() * plan * prob.mu1.points());
  return g;
}

/// Cross-correlation half: (1/2) sum_ij plan_ij x_i y_j^T. Stationary points
/// satisfy A = half_correlation(plan at A).
inline Matrix half_correlation(const Problem& prob, const Matrix& plan) {
  return 0.5 * (prob.mu0.points().transpose() * plan * prob.mu1.points());
}

// ---------------------------------------------------------------------------
// The certified inner solve: cost -> kernel -> Sinkhorn with a tolerance
// schedule derived from the requested plan-error radius.

struct OracleConfig {
  double delta_plan = 1e-9;   // requested sup-norm plan error (delta-oracle radius)
  double gamma_override = 0;  // > 0: bypass the schedule, use this stopping gamma
  double gamma_floor = 1e-15; // never schedule below what float64 can reach
  long k_max = 100000;
  bool log_domain = false;
  // eta(K) policy: entries <= threshold get the exact coefficient, above it a
  // conservative bound. Hot paths keep the default.
  Eigen::Index exact_eta_threshold = kExactEtaEntries;
};

struct OracleEvaluation {
  Matrix cost;
  Coupling coupling;
  OracleCertificate cert;
  double value = 0.0;  // Phi(A) on the returned plan
};

/// Solve OT_{A,eps} to a certified tolerance and assemble Phi(A).
/// warm_u, when given, seeds the scalings (certificates are re-derived every
/// call, so warm starts affect speed, never certified accuracy).
inline OracleEvaluation evaluate_phi(const Problem& prob, const Matrix& a,
                                     const OracleConfig& cfg = {},
                                     const Vector* warm_u = nullptr) {
  OracleEvaluation out;
  out.cost = cost_matrix(prob.mu0, prob.mu1, a);
  SinkhornResult sol;
  if (cfg.log_domain) {
    SinkhornOptions opts;
    opts.k_max = cfg.k_max;
    const double lam = contraction_coefficient_log(-out.cost / prob.eps,
                                                   cfg.exact_eta_threshold);
    opts.lambda_hint = lam;
    opts.gamma = cfg.gamma_override > 0.0
                     ? cfg.gamma_override
                     : std::max(cfg.gamma_floor,
                                oracle_tolerance_schedule(std::log1p(cfg.delta_plan), lam,
                                                          prob.mu1.weights().minCoeff()));
    if (warm_u) opts.warm_start_u = *warm_u;
    sol = sinkhorn_log_domain(out.cost, prob.eps, prob.mu0.weights(), prob.mu1.weights(),
                              opts);
  } else {
    const Kernel kernel = build_kernel_from_cost(out.cost, prob.eps);
    SinkhornOptions opts;
    opts.k_max = cfg.k_max;
    const double lam = contraction_coefficient(kernel.k, cfg.exact_eta_threshold);
    opts.lambda_hint = lam;
    // the schedule certifies the Hilbert radius log(1 + delta_plan), which
    // converts to the requested sup-norm radius via e^d - 1
    opts.gamma = cfg.gamma_override > 0.0
                     ? cfg.gamma_override
                     : std::max(cfg.gamma_floor,
                                oracle_tolerance_schedule(std::log1p(cfg.delta_plan), lam,
                                                          prob.mu1.weights().minCoeff()));
    if (warm_u) opts.warm_start_u = *warm_u;
    sol = sinkhorn(kernel, prob.mu0.weights(), prob.mu1.weights(), opts);
  }
  out.value = phi_value(prob, a, out.cost, sol.coupling.plan);
  out.coupling = std::move(sol.coupling);
  out.cert = sol.cert;
  return out;
}

/// S2 component on an explicit plan: 32||A||^2 + <C, plan> + eps KL.
/// The full EGW value for centered marginals is s1_constant + this.
inline double egw_value(const Problem& prob, const Matrix& a, const Matrix& plan) {
  return phi_value(prob, a, cost_matrix(prob.mu0, prob.mu1, a), plan);
}

}  // namespace egw

#endif  // EGW_OBJECTIVE_HPP
