#ifndef EGW_HESSIAN_HPP
#define EGW_HESSIAN_HPP

#include <cmath>
#include <utility>

#include "egw/objective.hpp"
#include "egw/types.hpp"

namespace egw {

/// Discrete solution of the linearized Schroedinger system defining the
/// second derivative of Phi along direction C:
///   a_i h0_i + sum_j plan_ij h1_j = 32 sum_j plan_ij x_i^T C y_j   (all i)
///   sum_i plan_ij h0_i + b_j h1_j = 32 sum_i plan_ij x_i^T C y_j   (all j)
/// pinned by the normalization sum_i a_i h0_i = 0 (the system's kernel is the
/// one-dimensional family (a, -a)).
struct HSystemSolution {
  Vector h0;
  Vector h1;
  double normalization_residual = 0.0;  // |sum_i a_i h0_i|
  double equation_residual = 0.0;       // max row/column equation residual
};

/// Solves the h-system as an (N0+N1+1) x (N0+N1) least-squares problem with
/// the normalization appended as an extra row. The plan should be computed to
/// marginal violation <= 1e-12; these are diagnostics, never the solver path.
inline HSystemSolution solve_h_system(const Problem& prob, const Matrix& plan,
                                      const Matrix& c_dir) {
  const Eigen::Index n0 = prob.n0(), n1 = prob.n1();
  if (plan.rows() != n0 || plan.cols() != n1)
    throw ValidationError("h-system: plan dimensions do not match the measures");
  const Vector& a = prob.mu0.weights();
  const Vector& b = prob.mu1.weights();

  // t_ij = x_i^T C y_j on the atom grid
  const Matrix t = prob.mu0.points() * c_dir * prob.mu1.points().transpose();
  const Vector rhs_rows = 32.0 * (plan.cwiseProduct(t)).rowwise().sum();
  const Vector rhs_cols = 32.0 * (plan.cwiseProduct(t)).colwise().sum().transpose();

  Matrix sys = Matrix::Zero(n0 + n1 + 1, n0 + n1);
  Vector rhs = Vector::Zero(n0 + n1 + 1);
  for (Eigen::Index i = 0; i < n0; ++i) {
    sys(i, i) = a[i];
    sys.block(i, n0, 1, n1) = plan.row(i);
    rhs[i] = rhs_rows[i];
  }
  for (Eigen::Index j = 0; j < n1; ++j) {
    sys.block(n0 + j, 0, 1, n0) = plan.col(j).transpose();
    sys(n0 + j, n0 + j) = b[j];
    rhs[n0 + j] = rhs_cols[j];
  }
  sys.block(n0 + n1, 0, 1, n0) = a.transpose();  // normalization row, rhs 0

  const Vector sol = sys.colPivHouseholderQr().solve(rhs);
  HSystemSolution out;
  out.h0 = sol.head(n0);
  out.h1 = sol.tail(n1);
  out.normalization_residual = std::abs(a.dot(out.h0));
  out.equation_residual =
      (sys.topRows(n0 + n1) * sol - rhs.head(n0 + n1)).cwiseAbs().maxCoeff();
  if (!(out.equation_residual <= 1e-8))
    throw NumericError("h-system ill-conditioned (residual " +
                       std::to_string(out.equation_residual) + ")");
  return out;
}

/// Quadratic form of the second derivative,
///   D^2 Phi_[A](C, C) = 64||C||^2
///     + 32/eps sum_ij plan_ij (x_i^T C y_j)(h0_i + h1_j - 32 x_i^T C y_j).
/// Bounded above by 64||C||^2 and below by (64 - 32^2/eps sqrt(M4M4))||C||^2.
inline double hessian_quadratic_form(const Problem& prob, const Matrix& plan,
                                     const Matrix& c_dir) {
  const HSystemSolution h = solve_h_system(prob, plan, c_dir);
  const Matrix t = prob.mu0.points() * c_dir * prob.mu1.points().transpose();
  double cross = 0.0;
  for (Eigen::Index i = 0; i < plan.rows(); ++i)
    for (Eigen::Index j = 0; j < plan.cols(); ++j)
      cross += plan(i, j) * t(i, j) * (h.h0[i] + h.h1[j] - 32.0 * t(i, j));
  return 64.0 * c_dir.squaredNorm() + 32.0 / prob.eps * cross;
}

}  // namespace egw

#endif  // EGW_HESSIAN_HPP
