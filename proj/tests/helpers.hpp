#ifndef EGW_TESTS_HELPERS_HPP
#define EGW_TESTS_HELPERS_HPP

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "egw/egw.hpp"

namespace egw_test {

using egw::DiscreteMeasure;
using egw::Matrix;
using egw::Vector;

inline DiscreteMeasure make1d(std::initializer_list<double> xs,
                              std::initializer_list<double> ws) {
  Matrix p(Eigen::Index(xs.size()), 1);
  Vector w(Eigen::Index(ws.size()));
  Eigen::Index i = 0;
  for (double x : xs) p(i++, 0) = x;
  i = 0;
  for (double x : ws) w[i++] = x;
  return DiscreteMeasure(p, w);
}

/// Random cloud with weights bounded away from zero (certificates stay
/// informative on small instances).
inline DiscreteMeasure random_measure(std::mt19937_64& rng, int n, int d,
                                      double sigma = 0.5) {
  std::normal_distribution<double> coord(0.0, sigma);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  Matrix p(n, d);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k) p(i, k) = coord(rng);
  Vector w(n);
  for (int i = 0; i < n; ++i) w[i] = unif(rng);
  return DiscreteMeasure(p, w, /*renormalize=*/true);
}

inline Vector random_positive_vector(std::mt19937_64& rng, int n, double lo = 0.1,
                                     double hi = 4.0) {
  std::uniform_real_distribution<double> unif(lo, hi);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = unif(rng);
  return v;
}

/// The analytic two-point instance: mu0 = (d_0 + d_a)/2, mu1 = (d_0 + d_b)/2.
/// The EOT coupling has pi_ab = e^z / (2(1+e^z)), z = (2||a||^2||b||^2 +
/// 16 a^T A b)/eps, and plan [[pi_ab, 1/2-pi_ab], [1/2-pi_ab, pi_ab]].
struct TwoPoint {
  DiscreteMeasure mu0;
  DiscreteMeasure mu1;
  Vector a, b;

  static TwoPoint make(const Vector& a, const Vector& b) {
    Matrix p0(2, a.size());
    p0.row(0).setZero();
    p0.row(1) = a.transpose();
    Matrix p1(2, b.size());
    p1.row(0).setZero();
    p1.row(1) = b.transpose();
    Vector half = Vector::Constant(2, 0.5);
    return TwoPoint{DiscreteMeasure(p0, half), DiscreteMeasure(p1, half), a, b};
  }

  static TwoPoint make1d(double a, double b) {
    Vector va(1), vb(1);
    va << a;
    vb << b;
    return make(va, vb);
  }

  double z(const Matrix& aux, double eps) const {
    return (2.0 * a.squaredNorm() * b.squaredNorm() +
            16.0 * (a.transpose() * aux * b).value()) /
           eps;
  }
  double pi_ab(const Matrix& aux, double eps) const {
    const double ez = std::exp(z(aux, eps));
    return ez / (2.0 * (1.0 + ez));
  }
  Matrix closed_form_plan(const Matrix& aux, double eps) const {
    const double p = pi_ab(aux, eps);
    Matrix plan(2, 2);
    plan << p, 0.5 - p, 0.5 - p, p;
    return plan;
  }
};

/// High-precision reference plan (marginal violation target ~1e-14..1e-15).
inline egw::SinkhornResult reference_sinkhorn(const egw::Kernel& kernel, const Vector& a,
                                              const Vector& b, double gamma = 1e-14) {
  egw::SinkhornOptions opts;
  opts.gamma = gamma;
  opts.k_max = 2000000;
  return egw::sinkhorn(kernel, a, b, opts);
}

class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 10000; ++i) {
      auto candidate = base / ("egw_test_" + std::to_string(counter_++));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("cannot create temp dir");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace egw_test

#endif  // EGW_TESTS_HELPERS_HPP
