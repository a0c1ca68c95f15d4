#ifndef EGW_SINKHORN_HPP
#define EGW_SINKHORN_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "egw/cost.hpp"
#include "egw/measure.hpp"
#include "egw/types.hpp"

namespace egw {

// ---------------------------------------------------------------------------
// Hilbert projective metric and the Birkhoff contraction coefficient.

/// d_H(x, y) = max_i log(x_i/y_i) - min_i log(x_i/y_i) on positive vectors.
inline double hilbert_distance(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw ValidationError("hilbert_distance: length mismatch");
  if (x.size() == 0) throw ValidationError("hilbert_distance: empty vectors");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0))
      throw ValidationError("hilbert_distance: entries must be strictly positive");
    const double r = std::log(x[i]) - std::log(y[i]);
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  return hi - lo;
}

namespace detail {

// log eta(K) from the elementwise log of the kernel. Exact value is
//   max over row pairs (i,j) of [max_k (L_ik - L_jk) - min_k (L_ik - L_jk)],
// the row-pair form of the quadruple cross-ratio max. Cost O(N0^2 N1).
inline double log_eta_exact(const Matrix& log_k) {
  const Eigen::Index n0 = log_k.rows();
  double best = 0.0;
  for (Eigen::Index i = 0; i < n0; ++i) {
    for (Eigen::Index j = i + 1; j < n0; ++j) {
      const auto diff = log_k.row(i) - log_k.row(j);
      best = std::max(best, diff.maxCoeff() - diff.minCoeff());
    }
  }
  return best;
}

// O(N0 N1) upper bound: log eta <= 2 max_k (max_i L_ik - min_i L_ik).
inline double log_eta_upper_bound(const Matrix& log_k) {
  const Vector col_range =
      log_k.colwise().maxCoeff().transpose() - log_k.colwise().minCoeff().transpose();
  return 2.0 * col_range.maxCoeff();
}

// lambda = (sqrt(eta)-1)/(sqrt(eta)+1) = tanh(log(eta)/4), kept < 1.
inline double lambda_from_log_eta(double log_eta) {
  const double lam = std::tanh(log_eta / 4.0);
  return std::min(lam, std::nextafter(1.0, 0.0));
}

}  // namespace detail

/// Entries-threshold below which eta(K) is computed exactly.
inline constexpr Eigen::Index kExactEtaEntries = 4096;

/// Birkhoff contraction coefficient of a positive matrix,
///   lambda(K) = (sqrt(eta)-1)/(sqrt(eta)+1),  eta = max K_ik K_jl/(K_jk K_il).
/// Exact when rows*cols <= exact_threshold, otherwise a conservative upper
/// bound (safe wherever lambda feeds certificates or tolerance schedules).
inline double contraction_coefficient_log(const Matrix& log_k,
                                          Eigen::Index exact_threshold = kExactEtaEntries) {
  const double log_eta = (log_k.size() <= exact_threshold)
                             ? detail::log_eta_exact(log_k)
                             : detail::log_eta_upper_bound(log_k);
  return detail::lambda_from_log_eta(log_eta);
}

inline double contraction_coefficient(const Matrix& k,
                                      Eigen::Index exact_threshold = kExactEtaEntries) {
  if (k.size() == 0) throw ValidationError("contraction_coefficient: empty matrix");
  if (!(k.minCoeff() > 0.0)) throw ValidationError("contraction_coefficient: entries must be positive");
  return contraction_coefficient_log(k.array().log().matrix(), exact_threshold);
}

// ---------------------------------------------------------------------------
// Gibbs kernel.

/// K_ij = exp(-c_A(x_i, y_j)/eps), all entries strictly positive and finite.
struct Kernel {
  Matrix k;
  double cost_sup = 0.0;  // max_ij |c_A| over the support
  double eps = 0.0;
};

inline Kernel build_kernel_from_cost(const Matrix& cost, double eps) {
  if (!(eps > 0.0)) throw ValidationError("eps must be positive");
  Kernel out;
  out.eps = eps;
  out.cost_sup = cost.cwiseAbs().maxCoeff();
  out.k = (-cost / eps).array().exp().matrix();
  if (!out.k.allFinite())
    throw NumericError("kernel overflow, increase eps or rescale data");
  if (!(out.k.minCoeff() > 0.0))
    throw NumericError("kernel underflow, increase eps or rescale data");
  return out;
}

inline Kernel build_kernel(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                           const Matrix& a, double eps) {
  return build_kernel_from_cost(cost_matrix(mu0, mu1, a), eps);
}

// ---------------------------------------------------------------------------
// Sinkhorn iterations with a certified stopping rule.

/// Scaling representation plan = diag(u) K diag(v). After a u-update the row
/// sums equal the source weights by construction.
struct Coupling {
  Matrix plan;
  Vector u;
  Vector v;
};

struct OracleCertificate {
  double delta_hilbert = std::numeric_limits<double>::infinity();
  double delta_sup = std::numeric_limits<double>::infinity();  // = e^delta_hilbert - 1
  long iterations = 0;
  double lambda_k = 0.0;
  double marginal_violation = std::numeric_limits<double>::infinity();
  bool met_tolerance = false;
  // true for the plain multiplicative scheme analyzed in the error bounds;
  // the log-domain variant reports the same numbers but uncertified.
  bool certified = true;
  double first_iterate_hilbert_gap = std::numeric_limits<double>::quiet_NaN();
  double gamma = 0.0;  // stopping threshold actually used
};

struct SinkhornOptions {
  double gamma = 1e-9;       // stop when ||(Pi^k)^T 1 - b||_2 < gamma
  long k_max = 100000;
  std::optional<Vector> warm_start_u;  // replaces the 1/N0 initialization
  double lambda_hint = -1.0;           // reuse a precomputed lambda(K)
  bool stagnation_guard = true;        // stop once violation floors at machine noise
};

struct SinkhornResult {
  Coupling coupling;
  OracleCertificate cert;
};

namespace detail {

inline void check_positive_finite(const Vector& x, const char* what) {
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!(x[i] > 0.0) || !std::isfinite(x[i]))
      throw NumericError(std::string(what) +
                         " hit a zero/non-finite entry (kernel underflow); "
                         "increase eps, rescale data, or use the log-domain variant");
}

// Computable certificate bound (observed marginal violation):
//   d(Pi, Pi*) <= (1/w_{i_min} + 1/b_{i_max}) / (1 - lambda) * ||w - b||_2
// with w = Pi^T 1, i_max maximizing w_i/b_i and i_min minimizing it.
// Ties break to the lowest index.
inline void fill_certificate(OracleCertificate& cert, const Vector& w, const Vector& b,
                             double lambda) {
  cert.lambda_k = lambda;
  cert.marginal_violation = (w - b).norm();
  Eigen::Index i_max = 0, i_min = 0;
  double best_hi = -std::numeric_limits<double>::infinity();
  double best_lo = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double r = w[i] / b[i];
    if (r > best_hi) { best_hi = r; i_max = i; }
    if (r < best_lo) { best_lo = r; i_min = i; }
  }
  const double coeff = (1.0 / w[i_min] + 1.0 / b[i_max]) / (1.0 - lambda);
  cert.delta_hilbert = coeff * cert.marginal_violation;
  cert.delta_sup = std::expm1(cert.delta_hilbert);
}

}  // namespace detail

/// Standard Sinkhorn (multiplicative scheme): u_0 = 1/N0,
///   v_k = b / (K^T u_{k-1}),  u_k = a / (K v_k),
/// stopping once the free marginal satisfies ||(Pi^k)^T 1 - b||_2 < gamma.
/// The returned certificate converts the observed violation into a bound on
/// the Hilbert-metric distance to the true EOT plan and on the sup-norm error.
inline SinkhornResult sinkhorn(const Kernel& kernel, const Vector& a, const Vector& b,
                               const SinkhornOptions& opts = {}) {
  const Matrix& k = kernel.k;
  if (a.size() != k.rows() || b.size() != k.cols())
    throw ValidationError("sinkhorn: marginal sizes do not match the kernel");
  if (!(opts.gamma > 0.0)) throw ValidationError("sinkhorn: gamma must be positive");
  const double lam =
      opts.lambda_hint >= 0.0 ? opts.lambda_hint : contraction_coefficient(k);

  Vector u = opts.warm_start_u ? *opts.warm_start_u
                               : Vector::Constant(k.rows(), 1.0 / double(k.rows()));
  detail::check_positive_finite(u, "sinkhorn warm start");
  Vector ktu = k.transpose() * u;
  detail::check_positive_finite(ktu, "sinkhorn K^T u");

  Vector v(k.cols()), kv(k.rows()), w(k.cols());
  OracleCertificate cert;
  cert.certified = true;
  cert.gamma = opts.gamma;

  double best_violation = std::numeric_limits<double>::infinity();
  long best_iter = 0;
  constexpr long kStagnationWindow = 200;
  const double stagnation_floor = 64.0 * std::numeric_limits<double>::epsilon() *
                                  std::max(1.0, b.norm());

  long iters = 0;
  double violation = std::numeric_limits<double>::infinity();
  for (long it = 1; it <= opts.k_max; ++it) {
    v = b.cwiseQuotient(ktu);
    detail::check_positive_finite(v, "sinkhorn scaling v");
    kv.noalias() = k * v;
    detail::check_positive_finite(kv, "sinkhorn K v");
    u = a.cwiseQuotient(kv);
    detail::check_positive_finite(u, "sinkhorn scaling u");
    ktu.noalias() = k.transpose() * u;
    detail::check_positive_finite(ktu, "sinkhorn K^T u");
    w = v.cwiseProduct(ktu);  // column sums of Pi^it
    violation = (w - b).norm();
    iters = it;
    if (it == 1) cert.first_iterate_hilbert_gap = hilbert_distance(w, b);
    if (violation < opts.gamma) {
      cert.met_tolerance = true;
      break;
    }
    if (violation < best_violation * (1.0 - 1e-3)) {
      best_violation = violation;
      best_iter = it;
    }
    if (opts.stagnation_guard && violation <= stagnation_floor &&
        it - best_iter >= kStagnationWindow)
      break;  // floored at machine noise below the requested gamma
  }

  cert.iterations = iters;
  detail::fill_certificate(cert, w, b, lam);

  SinkhornResult out;
  out.cert = cert;
  out.coupling.plan = u.asDiagonal() * k * v.asDiagonal();
  out.coupling.u = std::move(u);
  out.coupling.v = std::move(v);
  return out;
}

/// Log-domain Sinkhorn on the potentials. Same fixed point and iteration
/// count bookkeeping, immune to kernel over/underflow. The certificate is
/// flagged uncertified: the error analysis covers the multiplicative scheme.
inline SinkhornResult sinkhorn_log_domain(const Matrix& cost, double eps, const Vector& a,
                                          const Vector& b, const SinkhornOptions& opts = {}) {
  if (!(eps > 0.0)) throw ValidationError("eps must be positive");
  if (a.size() != cost.rows() || b.size() != cost.cols())
    throw ValidationError("sinkhorn: marginal sizes do not match the cost");
  if (!(opts.gamma > 0.0)) throw ValidationError("sinkhorn: gamma must be positive");
  const Matrix log_k = -cost / eps;
  const double lam = opts.lambda_hint >= 0.0 ? opts.lambda_hint
                                             : contraction_coefficient_log(log_k);

  const Eigen::Index n0 = cost.rows(), n1 = cost.cols();
  auto lse_cols = [&](const Vector& lu) {  // j -> log sum_i exp(log_k(i,j) + lu_i)
    Vector out(n1);
    for (Eigen::Index j = 0; j < n1; ++j) {
      const auto col = log_k.col(j) + lu;
      const double m = col.maxCoeff();
      out[j] = m + std::log((col.array() - m).exp().sum());
    }
    return out;
  };
  auto lse_rows = [&](const Vector& lv) {
    Vector out(n0);
    for (Eigen::Index i = 0; i < n0; ++i) {
      const auto row = log_k.row(i).transpose() + lv;
      const double m = row.maxCoeff();
      out[i] = m + std::log((row.array() - m).exp().sum());
    }
    return out;
  };

  const Vector log_a = a.array().log().matrix();
  const Vector log_b = b.array().log().matrix();
  Vector lu = opts.warm_start_u ? opts.warm_start_u->array().log().matrix().eval()
                                : Vector::Constant(n0, -std::log(double(n0)));
  Vector lv(n1), w(n1);

  OracleCertificate cert;
  cert.certified = false;
  cert.gamma = opts.gamma;
  long iters = 0;
  for (long it = 1; it <= opts.k_max; ++it) {
    lv = log_b - lse_cols(lu);
    lu = log_a - lse_rows(lv);
    w = (lv + lse_cols(lu)).array().exp().matrix();
    iters = it;
    if (it == 1) cert.first_iterate_hilbert_gap = hilbert_distance(w, b);
    if ((w - b).norm() < opts.gamma) {
      cert.met_tolerance = true;
      break;
    }
  }
  cert.iterations = iters;
  detail::fill_certificate(cert, w, b, lam);

  SinkhornResult out;
  out.cert = cert;
  out.coupling.u = lu.array().exp().matrix();
  out.coupling.v = lv.array().exp().matrix();
  out.coupling.plan.resize(n0, n1);
  for (Eigen::Index i = 0; i < n0; ++i)
    for (Eigen::Index j = 0; j < n1; ++j)
      out.coupling.plan(i, j) = std::exp(lu[i] + log_k(i, j) + lv[j]);
  return out;
}

// ---------------------------------------------------------------------------
// A-priori schedules and iteration bounds.

/// Stopping threshold that certifies d(Pi, Pi*) <= delta once it fires:
///   gamma = alpha_bar * min_j b_j,
///   alpha_bar = (t + 2 - sqrt(t^2 + 4))/2,  t = delta (1 - lambda),
/// evaluated in the rationalized form 2t/(t + 2 + sqrt(t^2 + 4)).
inline double oracle_tolerance_schedule(double delta_hilbert_target, double lambda,
                                        double b_min) {
  if (!(delta_hilbert_target > 0.0))
    throw ValidationError("oracle tolerance target must be positive");
  if (!(lambda >= 0.0 && lambda < 1.0))
    throw ValidationError("lambda must lie in [0, 1)");
  if (!(b_min > 0.0)) throw ValidationError("b_min must be positive");
  const double t = delta_hilbert_target * (1.0 - lambda);
  const double alpha_bar = 2.0 * t / (t + 2.0 + std::sqrt(t * t + 4.0));
  if (!(alpha_bar > 0.0))
    throw NumericError(
        "oracle tolerance underflows double precision; smallest representable "
        "target is about delta = 1e-307/(1 - lambda)");
  return alpha_bar * b_min;
}

inline double oracle_tolerance_schedule(double delta_hilbert_target, const Kernel& kernel,
                                        const Vector& b) {
  return oracle_tolerance_schedule(delta_hilbert_target,
                                   contraction_coefficient(kernel.k), b.minCoeff());
}

/// A-priori cap on Sinkhorn iterations needed for d(Pi, Pi*) <= delta:
/// the min of the geometric-contraction term
///   1 + log(delta (1-lambda) / d_H((Pi^1)^T 1, b)) / (2 log lambda)
/// and the marginal-violation term 1 + R/gamma with
///   R = -2 log(e^{-||C||_inf / eps} min_ij a_i ^ b_j),  gamma = alpha_bar b_min.
/// With lambda = 0 the first term degenerates and the second applies alone.
inline long long max_iterations_bound(const Kernel& kernel, const Vector& a, const Vector& b,
                                      double delta_hilbert,
                                      double first_iterate_hilbert_gap,
                                      double lambda_hint = -1.0) {
  if (!(delta_hilbert > 0.0)) throw ValidationError("delta must be positive");
  const double lam =
      lambda_hint >= 0.0 ? lambda_hint : contraction_coefficient(kernel.k);
  if (!(lam < 1.0)) throw ValidationError("lambda must be < 1");

  const double inf = std::numeric_limits<double>::infinity();
  double term1 = inf;
  if (lam > 0.0) {
    if (!(first_iterate_hilbert_gap > 0.0)) {
      term1 = 1.0;  // first iterate already at the fixed point
    } else {
      const double ratio = delta_hilbert * (1.0 - lam) / first_iterate_hilbert_gap;
      term1 = ratio >= 1.0 ? 1.0 : 1.0 + std::log(ratio) / (2.0 * std::log(lam));
    }
  }

  const double gamma = oracle_tolerance_schedule(delta_hilbert, lam, b.minCoeff());
  const double min_ab = std::min(a.minCoeff(), b.minCoeff());
  const double r = 2.0 * kernel.cost_sup / kernel.eps - 2.0 * std::log(min_ab);
  const double term2 = 1.0 + r / gamma;

  const double bound = std::max(1.0, std::min(term1, term2));
  if (!(bound < 9e18)) return std::numeric_limits<long long>::max();
  return static_cast<long long>(std::ceil(bound));
}

}  // namespace egw

#endif  // EGW_SINKHORN_HPP
