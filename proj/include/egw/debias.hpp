#ifndef EGW_DEBIAS_HPP
#define EGW_DEBIAS_HPP

#include <optional>
#include <utility>

#include "egw/solver.hpp"
#include "egw/types.hpp"

namespace egw {

/// One full EGW evaluation: the solved variational problem plus the moment
/// constant, S_eps = S1 + (32||A||^2 + OT_{A,eps}) for centered marginals.
struct EgwResult {
  double s1 = 0.0;
  double s2 = 0.0;  // Phi at the returned iterate
  double total = 0.0;
  bool centered = true;  // decomposition only valid for centered marginals
  SolveReport report;
};

/// Computes S_eps(mu0, mu1). Inputs are centered first unless auto_center is
/// off; in that case the caller owns the interpretation of s1/s2 and `total`
/// is left NaN (the decomposition needs centered marginals).
inline EgwResult egw_distance(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                              double eps, const SolveConfig& cfg = {},
                              bool auto_center = true,
                              std::optional<double> m_override = std::nullopt) {
  EgwResult out;
  const DiscreteMeasure m0 = auto_center ? center(mu0) : mu0;
  const DiscreteMeasure m1 = auto_center ? center(mu1) : mu1;
  out.centered = m0.is_centered(1e-9) && m1.is_centered(1e-9);
  Problem prob = make_problem(m0, m1, eps, m_override);
  out.report = solve(prob, cfg);
  if (out.report.status == SolveStatus::aborted)
    throw NumericError("EGW solve aborted: " + (out.report.warnings.empty()
                                                    ? std::string("unknown oracle failure")
                                                    : out.report.warnings.back()));
  out.s1 = s1_constant(m0, m1);
  out.s2 = out.report.objective;
  out.total = out.centered ? out.s1 + out.s2
                           : std::numeric_limits<double>::quiet_NaN();
  return out;
}

struct DebiasedResult {
  double cross = 0.0;   // S_eps(mu0, mu1)
  double self0 = 0.0;   // S_eps(mu0, mu0)
  double self1 = 0.0;   // S_eps(mu1, mu1)
  double debiased = 0.0;
  EgwResult cross_result, self0_result, self1_result;
};

/// Debiased EGW: S_eps(mu0,mu1) - (S_eps(mu0,mu0) + S_eps(mu1,mu1))/2,
/// all three solves under identical eps and solver settings. Identical inputs
/// cancel exactly because the solver is deterministic.
inline DebiasedResult debiased_egw(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                                   double eps, const SolveConfig& cfg = {},
                                   bool auto_center = true) {
  DebiasedResult out;
  auto run = [&](const DiscreteMeasure& a, const DiscreteMeasure& b, const char* which) {
    try {
      return egw_distance(a, b, eps, cfg, auto_center);
    } catch (const Error& e) {
      throw NumericError(std::string("debiased EGW: ") + which +
                         " solve failed: " + e.what());
    }
  };
  out.cross_result = run(mu0, mu1, "cross S_eps(mu0,mu1)");
  out.self0_result = run(mu0, mu0, "self S_eps(mu0,mu0)");
  out.self1_result = run(mu1, mu1, "self S_eps(mu1,mu1)");
  out.cross = out.cross_result.total;
  out.self0 = out.self0_result.total;
  out.self1 = out.self1_result.total;
  out.debiased = out.cross - 0.5 * (out.self0 + out.self1);
  return out;
}

}  // namespace egw

#endif  // EGW_DEBIAS_HPP
