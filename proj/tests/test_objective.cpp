#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace egw;
using egw_test::TwoPoint;
using egw_test::make1d;
using Catch::Approx;

namespace {

DiscreteMeasure single_atom(std::initializer_list<double> coords) {
  Matrix p(1, Eigen::Index(coords.size()));
  Eigen::Index k = 0;
  for (double c : coords) p(0, k++) = c;
  return DiscreteMeasure(p, Vector::Ones(1));
}

}  // namespace

TEST_CASE("cost matrix") {
  auto x = single_atom({1.0});
  auto y = single_atom({1.0});

  SECTION("scalar value") {
    REQUIRE(cost_matrix(x, y, Matrix::Ones(1, 1))(0, 0) == Approx(-36.0));
    REQUIRE(cost_matrix(x, y, Matrix::Zero(1, 1))(0, 0) == Approx(-4.0));
  }
  SECTION("A = 0 leaves the quartic term") {
    std::mt19937_64 rng(2);
    auto mu0 = egw_test::random_measure(rng, 4, 2);
    auto mu1 = egw_test::random_measure(rng, 3, 2);
    const Matrix c = cost_matrix(mu0, mu1, Matrix::Zero(2, 2));
    const Vector sx = mu0.squared_norms(), sy = mu1.squared_norms();
    for (Eigen::Index i = 0; i < 4; ++i)
      for (Eigen::Index j = 0; j < 3; ++j)
        REQUIRE(c(i, j) == Approx(-4.0 * sx[i] * sy[j]).margin(1e-14));
  }
  SECTION("linearity in A") {
    std::mt19937_64 rng(4);
    auto mu0 = egw_test::random_measure(rng, 3, 2);
    auto mu1 = egw_test::random_measure(rng, 4, 3);
    Matrix a = Matrix::Random(2, 3), b = Matrix::Random(2, 3);
    const Matrix diff = cost_matrix(mu0, mu1, a + b) - cost_matrix(mu0, mu1, a);
    const Matrix expected = -32.0 * mu0.points() * b * mu1.points().transpose();
    REQUIRE((diff - expected).cwiseAbs().maxCoeff() <= 1e-10);
  }
  SECTION("dimension mismatch") {
    REQUIRE_THROWS_AS(cost_matrix(x, y, Matrix::Zero(2, 2)), ValidationError);
  }
}

TEST_CASE("s1 constant") {
  SECTION("point masses at the origin") {
    auto d0 = single_atom({0.0});
    REQUIRE(s1_constant(d0, d0) == 0.0);
  }
  SECTION("symmetric two-point value") {
    auto m = make1d({-1, 1}, {0.5, 0.5});
    REQUIRE(s1_constant(m, m) == Approx(12.0));  // 8 + 8 - 4
  }
  SECTION("symmetric in its arguments") {
    std::mt19937_64 rng(8);
    auto mu0 = center(egw_test::random_measure(rng, 5, 2));
    auto mu1 = center(egw_test::random_measure(rng, 6, 2));
    REQUIRE(s1_constant(mu0, mu1) == Approx(s1_constant(mu1, mu0)).epsilon(1e-13));
  }
}

TEST_CASE("problem constants") {
  SECTION("certified convex regime has L = 64") {
    auto m = make1d({0, 1}, {0.5, 0.5});  // sqrt(M4 M4) = 0.5, threshold eps = 8
    auto p = make_problem(m, m, 9.0);
    REQUIRE(p.certified_convex);
    REQUIRE(p.l_smooth == 64.0);
    REQUIRE(p.convexity_eps_threshold == Approx(8.0));
    auto q = make_problem(m, m, 7.9);
    REQUIRE_FALSE(q.certified_convex);
  }
  SECTION("small eps switches the max branch") {
    auto m = make1d({0, 1}, {0.5, 0.5});
    auto p = make_problem(m, m, 0.1);
    REQUIRE(p.l_smooth == Approx(32.0 * 32.0 * 0.5 / 0.1 - 64.0));
    REQUIRE(p.l_smooth > 64.0);
    REQUIRE(p.l_prime == Approx(32.0 * 32.0 * 0.5 / 0.1));
  }
  SECTION("default M and the feasibility floor") {
    auto m = make1d({0, 1}, {0.5, 0.5});
    auto p = make_problem(m, m, 1.0);
    REQUIRE(p.m == Approx(0.5 + 1e-5));  // sqrt(M2 M2) = 0.5
    REQUIRE_THROWS_AS(make_problem(m, m, 1.0, 0.25), ValidationError);
    REQUIRE(make_problem(m, m, 1.0, 0.7).m == 0.7);
  }
}

TEST_CASE("projection onto D_M") {
  Matrix a = Matrix::Ones(2, 2);  // norm 2
  SECTION("interior points pass through") {
    REQUIRE((project_dm(a, 8.01) - a).cwiseAbs().maxCoeff() == 0.0);  // M/4 case
  }
  SECTION("boundary scaling") {
    const Matrix p = project_dm(a, 2.0);  // ||a|| = M -> scaled by 1/2
    REQUIRE(p.norm() == Approx(1.0).epsilon(1e-14));
    REQUIRE((p - 0.5 * a).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SECTION("zero maps to zero") {
    REQUIRE(project_dm(Matrix::Zero(3, 2), 1.0).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("phi value") {
  SECTION("forced single-atom coupling") {
    auto x = single_atom({1.0, 0.0});
    auto y = single_atom({0.0, 2.0});
    auto prob = make_problem(x, y, 1.0);
    Matrix a(2, 2);
    a << 0.1, -0.2, 0.3, 0.05;
    a = project_dm(a, prob.m);
    auto ev = evaluate_phi(prob, a);
    REQUIRE(ev.coupling.plan(0, 0) == Approx(1.0).margin(1e-12));
    const double expected = 32.0 * a.squaredNorm() + cost_matrix(x, y, a)(0, 0);
    REQUIRE(ev.value == Approx(expected).margin(1e-10));
  }
  SECTION("two-point closed form") {
    auto tp = TwoPoint::make1d(1.0, 1.0);
    auto prob = make_problem(tp.mu0, tp.mu1, 1.0);
    const Matrix a = Matrix::Zero(1, 1);
    OracleConfig cfg;
    cfg.delta_plan = 1e-12;
    auto ev = evaluate_phi(prob, a, cfg);
    const double p = tp.pi_ab(a, 1.0);
    const double z = tp.z(a, 1.0);
    // <C, plan> = -2 eps z pi_ab ; KL = 2 pi log(4 pi) + (1-2pi) log(2-4pi)
    const double expected =
        -2.0 * z * p + (2.0 * p * std::log(4.0 * p) +
                        (1.0 - 2.0 * p) * std::log(2.0 - 4.0 * p));
    REQUIRE(ev.value == Approx(expected).margin(1e-9));
  }
  SECTION("phi(A) = phi(-A) for a sign-symmetric mu1") {
    auto mu0 = make1d({0.3, -0.7}, {0.5, 0.5});
    auto mu1 = make1d({-0.9, 0.9}, {0.5, 0.5});  // invariant under negation
    auto prob = make_problem(mu0, mu1, 1.0);
    OracleConfig cfg;
    cfg.delta_plan = 1e-12;
    Matrix a = Matrix::Constant(1, 1, 0.04);
    const double plus = evaluate_phi(prob, a, cfg).value;
    const double minus = evaluate_phi(prob, -a, cfg).value;
    REQUIRE(plus == Approx(minus).margin(1e-10));
  }
  SECTION("KL handles zero entries") {
    Vector a = Vector::Constant(2, 0.5), b = Vector::Constant(2, 0.5);
    Matrix plan(2, 2);
    plan << 0.5, 0.0, 0.0, 0.5;
    REQUIRE(kl_divergence(plan, a, b) == Approx(std::log(2.0)).epsilon(1e-14));
  }
}

TEST_CASE("gradient") {
  SECTION("single-atom fixed point") {
    auto x = single_atom({0.6, 0.2});
    auto y = single_atom({-0.3, 0.4, 0.1});
    auto prob = make_problem(x, y, 1.0);
    const Matrix a_star = 0.5 * x.points().row(0).transpose() * y.points().row(0);
    Matrix plan = Matrix::Ones(1, 1);
    REQUIRE(gradient(prob, a_star, plan).cwiseAbs().maxCoeff() <= 1e-15);
  }
  SECTION("A = 0 leaves the correlation term") {
    std::mt19937_64 rng(21);
    auto mu0 = egw_test::random_measure(rng, 4, 2);
    auto mu1 = egw_test::random_measure(rng, 5, 2);
    auto prob = make_problem(mu0, mu1, 2.0);
    auto ev = evaluate_phi(prob, Matrix::Zero(2, 2));
    const Matrix g = gradient(prob, Matrix::Zero(2, 2), ev.coupling.plan);
    const Matrix expected =
        -32.0 * mu0.points().transpose() * ev.coupling.plan * mu1.points();
    REQUIRE((g - expected).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SECTION("matches central finite differences") {
    std::mt19937_64 rng(77);
    for (int t = 0; t < 5; ++t) {
      auto mu0 = egw_test::random_measure(rng, 5, 2, 0.4);
      auto mu1 = egw_test::random_measure(rng, 4, 2, 0.4);
      auto prob = make_problem(mu0, mu1, 1.5);
      Matrix a = 0.1 * Matrix::Random(2, 2);
      a = project_dm(a, prob.m);
      Matrix dir = Matrix::Random(2, 2);
      dir /= dir.norm();

      OracleConfig precise;
      precise.delta_plan = 1e-12;
      precise.gamma_override = 1e-14;
      const double h = 1e-5;
      const double up = evaluate_phi(prob, a + h * dir, precise).value;
      const double down = evaluate_phi(prob, a - h * dir, precise).value;
      const double fd = (up - down) / (2.0 * h);

      auto ev = evaluate_phi(prob, a, precise);
      const double analytic = gradient(prob, a, ev.coupling.plan)
                                  .cwiseProduct(dir)
                                  .sum();
      REQUIRE(std::abs(analytic - fd) <= 1e-4 * std::max(1.0, std::abs(analytic)));
    }
  }
  SECTION("inexact-gradient error bound from the certificate") {
    std::mt19937_64 rng(123);
    auto mu0 = egw_test::random_measure(rng, 6, 2);
    auto mu1 = egw_test::random_measure(rng, 6, 2);
    auto prob = make_problem(mu0, mu1, 1.0);
    Matrix a = project_dm(0.05 * Matrix::Random(2, 2).eval(), prob.m);

    OracleConfig loose;
    loose.delta_plan = 1e-2;
    auto cheap = evaluate_phi(prob, a, loose);
    OracleConfig tight;
    tight.gamma_override = 1e-14;
    auto ref = evaluate_phi(prob, a, tight);

    const Matrix diff = gradient(prob, a, cheap.coupling.plan) -
                        gradient(prob, a, ref.coupling.plan);
    const double bound = 32.0 * (cheap.cert.delta_sup + ref.cert.delta_sup) *
                         prob.sum_norm_products;
    REQUIRE(diff.norm() <= bound);
  }
}

TEST_CASE("egw assembly and debias") {
  SECTION("identical point masses give zero") {
    auto d0 = single_atom({0.0});
    auto prob = make_problem(d0, d0, 1.0);
    auto ev = evaluate_phi(prob, Matrix::Zero(1, 1));
    REQUIRE(s1_constant(d0, d0) + egw_value(prob, Matrix::Zero(1, 1), ev.coupling.plan) ==
            Approx(0.0).margin(1e-14));
  }
  SECTION("debias of a measure against itself is exactly zero") {
    auto m = make1d({0.1, -0.4, 0.8}, {0.3, 0.3, 0.4});
    SolveConfig cfg;
    cfg.grad_tol = 1e-7;
    cfg.algorithm = Algorithm::adaptive;
    cfg.reject_stationary_init = true;
    auto res = debiased_egw(m, m, 2.0, cfg);
    REQUIRE(res.debiased == 0.0);
  }
  SECTION("debias is symmetric in its arguments") {
    auto m0 = make1d({0.2, -0.5}, {0.4, 0.6});
    auto m1 = make1d({0.7, -0.1, 0.3}, {0.2, 0.5, 0.3});
    SolveConfig cfg;
    cfg.grad_tol = 1e-9;
    auto ab = debiased_egw(m0, m1, 6.0, cfg);
    auto ba = debiased_egw(m1, m0, 6.0, cfg);
    REQUIRE(ab.debiased == Approx(ba.debiased).margin(1e-8));
  }
}
