#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace egw;
using egw_test::TwoPoint;
using Catch::Approx;

TEST_CASE("hilbert distance") {
  Vector x(3), y(3);
  x << 1, 2, 3;
  y = x;
  REQUIRE(hilbert_distance(x, y) == 0.0);
  REQUIRE(hilbert_distance(2.0 * x, y) == Approx(0.0).margin(1e-14));

  Vector a(2), b(2);
  a << 2, 1;
  b << 1, 1;
  REQUIRE(hilbert_distance(a, b) == Approx(std::log(2.0)));

  SECTION("projective scale invariance") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 30; ++t) {
      Vector u = egw_test::random_positive_vector(rng, 6);
      Vector v = egw_test::random_positive_vector(rng, 6);
      const double d = hilbert_distance(u, v);
      REQUIRE(hilbert_distance(3.7 * u, 0.01 * v) == Approx(d).margin(1e-12));
    }
  }
  SECTION("nonpositive entries rejected") {
    Vector bad(2);
    bad << 1, 0;
    REQUIRE_THROWS_AS(hilbert_distance(bad, b), ValidationError);
  }
}

TEST_CASE("contraction coefficient") {
  SECTION("rank-one kernels have lambda 0") {
    Vector u(3), v(4);
    u << 1, 2, 3;
    v << 0.5, 1, 2, 4;
    REQUIRE(contraction_coefficient(u * v.transpose()) == Approx(0.0).margin(1e-14));
    REQUIRE(contraction_coefficient(Matrix::Ones(3, 3)) == 0.0);
  }
  SECTION("two-point kernel") {
    Matrix k(2, 2);
    k << 1, 1, 1, std::exp(4.0);
    const double e2 = std::exp(2.0);
    REQUIRE(contraction_coefficient(k) == Approx((e2 - 1.0) / (e2 + 1.0)).epsilon(1e-14));
  }
  SECTION("Birkhoff contraction property") {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 100; ++t) {
      const int n = 2 + int(rng() % 5), m = 2 + int(rng() % 5);
      Matrix k(n, m);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
          k(i, j) = std::exp(std::uniform_real_distribution<double>(-3, 3)(rng));
      const double lam = contraction_coefficient(k);
      Vector x = egw_test::random_positive_vector(rng, m);
      Vector y = egw_test::random_positive_vector(rng, m);
      REQUIRE(hilbert_distance(k * x, k * y) <= lam * hilbert_distance(x, y) + 1e-12);
    }
  }
  SECTION("conservative mode upper-bounds the exact value") {
    std::mt19937_64 rng(23);
    for (int t = 0; t < 20; ++t) {
      Matrix k(5, 6);
      for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 6; ++j)
          k(i, j) = std::exp(std::uniform_real_distribution<double>(-2, 2)(rng));
      const double exact = contraction_coefficient(k);
      const double bound = contraction_coefficient(k, /*exact_threshold=*/0);
      REQUIRE(bound >= exact - 1e-15);
      REQUIRE(bound < 1.0);
    }
  }
}

TEST_CASE("kernel construction") {
  SECTION("single atoms at the origin") {
    auto tp = TwoPoint::make1d(1.0, 1.0);
    Matrix z = Matrix::Zero(1, 1);
    Matrix p0(1, 1), p1(1, 1);
    p0 << 0;
    p1 << 0;
    DiscreteMeasure d0(p0, Vector::Ones(1)), d1(p1, Vector::Ones(1));
    auto k = build_kernel(d0, d1, z, 1.0);
    REQUIRE(k.k(0, 0) == 1.0);
    REQUIRE(k.cost_sup == 0.0);
  }
  SECTION("scalar example") {
    Matrix p(1, 1);
    p << 1;
    DiscreteMeasure d(p, Vector::Ones(1));
    auto k = build_kernel(d, d, Matrix::Zero(1, 1), 4.0);
    REQUIRE(k.k(0, 0) == Approx(std::exp(1.0)).epsilon(1e-15));  // c = -4, exp(4/4)
  }
  SECTION("two-point instance") {
    auto tp = TwoPoint::make1d(1.0, 1.0);
    auto k = build_kernel(tp.mu0, tp.mu1, Matrix::Zero(1, 1), 1.0);
    REQUIRE(k.k(0, 0) == 1.0);
    REQUIRE(k.k(0, 1) == 1.0);
    REQUIRE(k.k(1, 0) == 1.0);
    REQUIRE(k.k(1, 1) == Approx(std::exp(4.0)).epsilon(1e-15));
    REQUIRE(k.cost_sup == Approx(4.0));
  }
  SECTION("overflow detection") {
    auto tp = TwoPoint::make1d(20.0, 20.0);  // cost -4*20^4, eps tiny
    REQUIRE_THROWS_AS(build_kernel(tp.mu0, tp.mu1, Matrix::Zero(1, 1), 1e-3),
                      NumericError);
  }
}

TEST_CASE("sinkhorn basics") {
  SECTION("constant kernel converges to the product coupling in one iteration") {
    Vector a(3), b(2);
    a << 0.2, 0.3, 0.5;
    b << 0.4, 0.6;
    Kernel k;
    k.k = Matrix::Ones(3, 2);
    k.eps = 1.0;
    SinkhornOptions opts;
    opts.gamma = 1e-12;
    auto res = sinkhorn(k, a, b, opts);
    REQUIRE(res.cert.iterations == 1);
    REQUIRE(res.cert.met_tolerance);
    REQUIRE((res.coupling.plan - a * b.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SECTION("row marginals are exact by construction") {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 10; ++t) {
      auto mu0 = egw_test::random_measure(rng, 6, 2);
      auto mu1 = egw_test::random_measure(rng, 5, 2);
      auto k = build_kernel(mu0, mu1, Matrix::Zero(2, 2), 2.0);
      SinkhornOptions opts;
      opts.gamma = 1e-3;  // stop early on purpose
      auto res = sinkhorn(k, mu0.weights(), mu1.weights(), opts);
      REQUIRE((res.coupling.plan.rowwise().sum() - mu0.weights())
                  .cwiseAbs()
                  .maxCoeff() <= 1e-13);
    }
  }
  SECTION("underflowing kernel reports a numeric error") {
    Kernel k;
    k.k = Matrix::Constant(2, 2, 1e-300);
    k.k(0, 0) = 1e300;
    k.eps = 1.0;
    Vector a = Vector::Constant(2, 0.5), b = Vector::Constant(2, 0.5);
    SinkhornOptions opts;
    opts.gamma = 1e-9;
    REQUIRE_THROWS_AS(sinkhorn(k, a, b, opts), NumericError);
  }
  SECTION("k_max exceeded is a non-fatal certificate status") {
    auto tp = TwoPoint::make1d(1.3, 0.9);
    auto k = build_kernel(tp.mu0, tp.mu1, Matrix::Zero(1, 1), 0.05);
    SinkhornOptions opts;
    opts.gamma = 1e-13;
    opts.k_max = 2;
    auto res = sinkhorn(k, tp.mu0.weights(), tp.mu1.weights(), opts);
    REQUIRE_FALSE(res.cert.met_tolerance);
    REQUIRE(res.cert.iterations == 2);
    REQUIRE(res.cert.delta_sup == Approx(std::expm1(res.cert.delta_hilbert)));
  }
}

TEST_CASE("analytic two-point oracle") {
  for (double aux : {0.0, 0.1, -0.1}) {
    auto tp = TwoPoint::make1d(1.0, 1.0);
    Matrix a_mat = Matrix::Constant(1, 1, aux);
    auto k = build_kernel(tp.mu0, tp.mu1, a_mat, 1.0);
    auto res = egw_test::reference_sinkhorn(k, tp.mu0.weights(), tp.mu1.weights(), 1e-15);
    const double expected = tp.pi_ab(a_mat, 1.0);
    INFO("aux = " << aux << " z = " << tp.z(a_mat, 1.0));
    REQUIRE(res.coupling.plan(1, 1) == Approx(expected).margin(1e-10));
    REQUIRE((res.coupling.plan - tp.closed_form_plan(a_mat, 1.0)).cwiseAbs().maxCoeff() <=
            1e-10);
  }
}

TEST_CASE("oracle soundness against a high-precision reference") {
  std::mt19937_64 rng(1234);
  for (int t = 0; t < 12; ++t) {
    auto mu0 = egw_test::random_measure(rng, 8, 2);
    auto mu1 = egw_test::random_measure(rng, 8, 2);
    auto k = build_kernel(mu0, mu1, Matrix::Zero(2, 2), 1.0);
    auto ref = egw_test::reference_sinkhorn(k, mu0.weights(), mu1.weights(), 1e-14);

    SinkhornOptions opts;
    opts.gamma = oracle_tolerance_schedule(0.05, contraction_coefficient(k.k),
                                           mu1.weights().minCoeff());
    auto res = sinkhorn(k, mu0.weights(), mu1.weights(), opts);
    REQUIRE(res.cert.met_tolerance);
    const double actual = (res.coupling.plan - ref.coupling.plan).cwiseAbs().maxCoeff();
    REQUIRE(actual <= res.cert.delta_sup);
    REQUIRE(res.cert.delta_hilbert <= 0.05 * (1.0 + 1e-9));
  }
}

TEST_CASE("iterate convergence follows the geometric envelope") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 5; ++t) {
    auto mu0 = egw_test::random_measure(rng, 5, 1, 0.4);
    auto mu1 = egw_test::random_measure(rng, 5, 1, 0.4);
    auto k = build_kernel(mu0, mu1, Matrix::Zero(1, 1), 1.5);
    const double lam = contraction_coefficient(k.k);
    auto ref = egw_test::reference_sinkhorn(k, mu0.weights(), mu1.weights(), 1e-15);

    double first_gap = 0.0;
    for (long steps = 2; steps <= 8; ++steps) {
      SinkhornOptions opts;
      opts.gamma = 1e-300;  // never met: observe the k-th iterate exactly
      opts.k_max = steps;
      opts.stagnation_guard = false;
      auto res = sinkhorn(k, mu0.weights(), mu1.weights(), opts);
      first_gap = res.cert.first_iterate_hilbert_gap;
      const double dist = hilbert_distance(res.coupling.u, ref.coupling.u) +
                          hilbert_distance(res.coupling.v, ref.coupling.v);
      const double envelope =
          std::pow(lam, 2.0 * double(steps - 1)) / (1.0 - lam) * first_gap;
      REQUIRE(dist <= envelope + 1e-10);
    }
  }
}

TEST_CASE("oracle tolerance schedule") {
  SECTION("formula values") {
    REQUIRE(oracle_tolerance_schedule(1.0, 0.0, 1.0) ==
            Approx((3.0 - std::sqrt(5.0)) / 2.0).epsilon(1e-14));
    REQUIRE(oracle_tolerance_schedule(2.0, 0.0, 1.0) ==
            Approx(2.0 - std::sqrt(2.0)).epsilon(1e-14));
    REQUIRE(oracle_tolerance_schedule(1.0, 0.0, 0.25) ==
            Approx(0.25 * (3.0 - std::sqrt(5.0)) / 2.0).epsilon(1e-14));
  }
  SECTION("monotone decay to zero") {
    double prev = std::numeric_limits<double>::infinity();
    for (double d = 1.0; d > 1e-12; d /= 10.0) {
      const double g = oracle_tolerance_schedule(d, 0.3, 0.5);
      REQUIRE(g > 0.0);
      REQUIRE(g < prev);
      prev = g;
    }
  }
  SECTION("certified stop achieves the requested Hilbert radius") {
    auto tp = TwoPoint::make1d(1.0, 0.8);
    auto k = build_kernel(tp.mu0, tp.mu1, Matrix::Zero(1, 1), 1.0);
    const double lam = contraction_coefficient(k.k);
    const double delta = 0.01;
    SinkhornOptions opts;
    opts.gamma = oracle_tolerance_schedule(delta, lam, tp.mu1.weights().minCoeff());
    auto res = sinkhorn(k, tp.mu0.weights(), tp.mu1.weights(), opts);
    REQUIRE(res.cert.met_tolerance);
    REQUIRE(res.cert.delta_hilbert <= delta * (1.0 + 1e-9));
  }
}

TEST_CASE("max iterations bound") {
  auto tp = TwoPoint::make1d(1.0, 1.0);
  auto k = build_kernel(tp.mu0, tp.mu1, Matrix::Zero(1, 1), 1.0);
  const Vector& a = tp.mu0.weights();
  const Vector& b = tp.mu1.weights();

  SECTION("bound dominates the observed iteration count") {
    const double delta = 0.1;
    const double lam = contraction_coefficient(k.k);
    SinkhornOptions opts;
    opts.gamma = oracle_tolerance_schedule(delta, lam, b.minCoeff());
    auto res = sinkhorn(k, a, b, opts);
    REQUIRE(res.cert.met_tolerance);
    const auto bound =
        max_iterations_bound(k, a, b, delta, res.cert.first_iterate_hilbert_gap, lam);
    REQUIRE(bound >= res.cert.iterations);
  }
  SECTION("monotone nonincreasing in delta") {
    long long prev = std::numeric_limits<long long>::max();
    for (double delta : {0.01, 0.05, 0.2, 1.0, 4.0}) {
      const auto bound = max_iterations_bound(k, a, b, delta, 0.8);
      REQUIRE(bound <= prev);
      prev = bound;
    }
  }
  SECTION("lambda 0 falls back to the marginal-violation term") {
    Kernel flat;
    flat.k = Matrix::Ones(2, 2);
    flat.eps = 1.0;
    flat.cost_sup = 0.0;
    const double delta = 0.5;
    const double gamma = oracle_tolerance_schedule(delta, 0.0, 0.5);
    const double r = -2.0 * std::log(0.5);
    const auto expected = (long long)std::ceil(1.0 + r / gamma);
    REQUIRE(max_iterations_bound(flat, Vector::Constant(2, 0.5),
                                 Vector::Constant(2, 0.5), delta, 0.7) == expected);
  }
}

TEST_CASE("log-domain variant") {
  auto tp = TwoPoint::make1d(1.2, 0.7);
  const Matrix cost = cost_matrix(tp.mu0, tp.mu1, Matrix::Zero(1, 1));

  SECTION("agrees with the multiplicative scheme where both run") {
    auto k = build_kernel_from_cost(cost, 1.0);
    SinkhornOptions opts;
    opts.gamma = 1e-12;
    auto mult = sinkhorn(k, tp.mu0.weights(), tp.mu1.weights(), opts);
    auto logd = sinkhorn_log_domain(cost, 1.0, tp.mu0.weights(), tp.mu1.weights(), opts);
    REQUIRE((mult.coupling.plan - logd.coupling.plan).cwiseAbs().maxCoeff() <= 1e-12);
    REQUIRE(mult.cert.certified);
    REQUIRE_FALSE(logd.cert.certified);
  }
  SECTION("survives regimes where the kernel overflows") {
    auto big = TwoPoint::make1d(20.0, 20.0);
    const Matrix bigcost = cost_matrix(big.mu0, big.mu1, Matrix::Zero(1, 1));
    REQUIRE_THROWS_AS(build_kernel_from_cost(bigcost, 1e-3), NumericError);
    SinkhornOptions opts;
    opts.gamma = 1e-10;
    auto res = sinkhorn_log_domain(bigcost, 1e-3, big.mu0.weights(), big.mu1.weights(),
                                   opts);
    REQUIRE(res.coupling.plan.allFinite());
    // at eps -> 0 the two-point problem concentrates on the diagonal
    REQUIRE(res.coupling.plan(1, 1) == Approx(0.5).margin(1e-6));
  }
}
