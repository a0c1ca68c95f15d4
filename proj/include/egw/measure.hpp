#ifndef EGW_MEASURE_HPP
#define EGW_MEASURE_HPP

#include <cmath>
#include <optional>
#include <utility>

#include "egw/types.hpp"

namespace egw {

/// Weighted point cloud mu = sum_i w_i * delta_{x_i} on R^d.
///
/// Immutable after construction; every factory validates that weights are
/// strictly positive and sum to one, and that all coordinates are finite.
class DiscreteMeasure {
 public:
  // kStrictWeightTol: accepted |sum w - 1| before construction fails; files
  // that round-trip through decimal text land within this.
  static constexpr double kStrictWeightTol = 1e-9;

  DiscreteMeasure(Matrix points, Vector weights, bool renormalize = false)
      : points_(std::move(points)), weights_(std::move(weights)) {
    validate(renormalize);
  }

  Eigen::Index size() const { return points_.rows(); }
  Eigen::Index dim() const { return points_.cols(); }

  const Matrix& points() const { return points_; }
  const Vector& weights() const { return weights_; }

  /// Weighted mean sum_i w_i x_i.
  Vector mean() const { return points_.transpose() * weights_; }

  /// Squared Euclidean norm of each atom, as a length-N vector.
  Vector squared_norms() const { return points_.rowwise().squaredNorm(); }

  bool is_centered(double tol = 1e-12) const {
    return mean().cwiseAbs().maxCoeff() <= tol;
  }

 private:
  void validate(bool renormalize) {
    if (points_.rows() < 1 || points_.cols() < 1)
      throw ValidationError("measure needs at least one atom in dimension >= 1");
    if (weights_.size() != points_.rows())
      throw ValidationError("weight count does not match atom count");
    if (!points_.allFinite())
      throw ValidationError("measure has a NaN/Inf coordinate");
    for (Eigen::Index i = 0; i < weights_.size(); ++i) {
      if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i]))
        throw ValidationError("weights must be strictly positive and finite");
    }
    const double total = weights_.sum();
    if (!renormalize && std::abs(total - 1.0) > kStrictWeightTol)
      throw ValidationError("weights not normalized (sum = " +
                            std::to_string(total) +
                            "); pass raw intensities explicitly to renormalize");
    // Exact rescale either way so downstream code can rely on sum == 1
    // to machine precision.
    weights_ /= total;
  }

  Matrix points_;
  Vector weights_;
};

struct Moments {
  double m2 = 0.0;  // sum_i w_i ||x_i||^2
  double m4 = 0.0;  // sum_i w_i ||x_i||^4
};

inline Moments moments(const DiscreteMeasure& m) {
  const Vector sq = m.squared_norms();
  Moments out;
  out.m2 = m.weights().dot(sq);
  out.m4 = m.weights().dot(sq.cwiseProduct(sq).matrix());
  return out;
}

/// Translate so the weighted mean is the origin. Weights unchanged.
inline DiscreteMeasure center(const DiscreteMeasure& m) {
  Matrix pts = m.points();
  pts.rowwise() -= m.mean().transpose();
  return DiscreteMeasure(std::move(pts), m.weights());
}

/// Composition of a positive scale, an orthogonal map and a translation,
/// applied to atoms as x |-> scale * Q x + t.
struct AffineIsometry {
  std::optional<Matrix> rotation;  // columns orthonormal (checked on apply)
  std::optional<Vector> translation;
  double scale = 1.0;
};

inline DiscreteMeasure transform(const DiscreteMeasure& m, const AffineIsometry& map) {
  if (!(map.scale > 0.0) || !std::isfinite(map.scale))
    throw ValidationError("transform scale must be a positive real");
  Matrix pts = m.points();
  if (map.rotation) {
    const Matrix& q = *map.rotation;
    if (q.rows() != m.dim())
      throw ValidationError("rotation matrix does not act on the measure's space");
    const Matrix gram = q.transpose() * q;
    if ((gram - Matrix::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff() > 1e-10)
      throw ValidationError("declared rotation is not orthogonal (1e-10 check)");
    pts = pts * q.transpose();  // row-per-atom layout: (Q x)^T = x^T Q^T
  }
  pts *= map.scale;
  if (map.translation) {
    if (map.translation->size() != pts.cols())
      throw ValidationError("translation dimension mismatch");
    pts.rowwise() += map.translation->transpose();
  }
  return DiscreteMeasure(std::move(pts), m.weights());
}

/// Convenience: the eps-rescaled measure (eps^{-1/4} Id)_# mu used by the
/// identity S_eps(mu0, mu1) = eps * S_1(mu0^eps, mu1^eps).
inline DiscreteMeasure eps_rescale(const DiscreteMeasure& m, double eps) {
  if (!(eps > 0.0)) throw ValidationError("eps must be positive");
  AffineIsometry map;
  map.scale = std::pow(eps, -0.25);
  return transform(m, map);
}

}  // namespace egw

#endif  // EGW_MEASURE_HPP
