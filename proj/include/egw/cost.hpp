#ifndef EGW_COST_HPP
#define EGW_COST_HPP

#include "egw/measure.hpp"
#include "egw/types.hpp"

namespace egw {

/// Cost of the auxiliary EOT problem:
///   c_A(x, y) = -4 ||x||^2 ||y||^2 - 32 x^T A y.
/// Returned as the N0 x N1 matrix over the atom grid.
inline Matrix cost_matrix(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1,
                          const Matrix& a) {
  if (a.rows() != mu0.dim() || a.cols() != mu1.dim())
    throw ValidationError("auxiliary matrix must be d0 x d1");
  const Vector sx = mu0.squared_norms();
  const Vector sy = mu1.squared_norms();
  Matrix c = -4.0 * (sx * sy.transpose());
  c.noalias() -= 32.0 * (mu0.points() * a * mu1.points().transpose());
  return c;
}

/// Constant part of the decomposition S_eps = S1 + S2_eps (centered marginals):
///   S1 = int ||x-x'||^4 dmu0 dmu0 + int ||y-y'||^4 dmu1 dmu1
///        - 4 int ||x||^2 ||y||^2 dmu0 dmu1,
/// evaluated as exact finite double sums.
inline double s1_constant(const DiscreteMeasure& mu0, const DiscreteMeasure& mu1) {
  auto quartic_self = [](const DiscreteMeasure& m) {
    double acc = 0.0;
    const Matrix& p = m.points();
    const Vector& w = m.weights();
    for (Eigen::Index i = 0; i < m.size(); ++i)
      for (Eigen::Index j = 0; j < m.size(); ++j) {
        const double d2 = (p.row(i) - p.row(j)).squaredNorm();
        acc += w[i] * w[j] * d2 * d2;
      }
    return acc;
  };
  const double cross = moments(mu0).m2 * moments(mu1).m2;
  return quartic_self(mu0) + quartic_self(mu1) - 4.0 * cross;
}

/// Euclidean projection onto D_M = {A : ||A||_F <= M/2}; min(1, M/0) = 1.
inline Matrix project_dm(const Matrix& a, double m) {
  if (!(m > 0.0)) throw ValidationError("domain parameter M must be positive");
  const double norm = a.norm();
  if (norm <= m / 2.0) return a;
  return a * ((m / 2.0) / norm);
}

}  // namespace egw

#endif  // EGW_COST_HPP
