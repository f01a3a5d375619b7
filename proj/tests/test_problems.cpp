#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tracksplit/inner_solvers.hpp"
#include "tracksplit/problems.hpp"

using namespace tracksplit;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

Vector vec2(double a, double b) { return (Vector(2) << a, b).finished(); }

BilevelInstance bq1() { return make_quadratic_bilevel(1.0, scalar(1.0)); }

} // namespace

TEST(QuadraticBilevel, ClosedForms)
{
    auto inst = bq1();
    EXPECT_NEAR(solve_inner_exact(inst, scalar(2.0))(0), 1.0, 1e-15);
    EXPECT_EQ(solve_inner_exact(inst, scalar(0.0))(0), 0.0);
    EXPECT_NEAR(inst.F_prime(scalar(2.0))(0), 0.0, 1e-15);
    ASSERT_TRUE(inst.x_star.has_value());
    EXPECT_NEAR((*inst.x_star)(0), 2.0, 1e-15);

    auto g3 = make_quadratic_bilevel(3.0, scalar(1.0));
    EXPECT_NEAR(solve_inner_exact(g3, scalar(4.0))(0), 1.0, 1e-15);
    EXPECT_THROW(make_quadratic_bilevel(0.0, scalar(1.0)), std::invalid_argument);
}

TEST(QuadraticBilevel, FbInnerKappaWithUnitStep)
{
    auto inst = bq1();
    InnerSpec spec;
    spec.alg = InnerAlgorithm::FB;
    spec.tau = 1.0;
    auto c = estimate_inner_constants(inst, spec, ConstantsMode::Analytic);
    EXPECT_DOUBLE_EQ(c.kappa_u, 2.0);
}

TEST(ReducedAdjoint, QuadraticValues)
{
    auto inst = bq1();
    EXPECT_NEAR(solve_reduced_adjoint_exact(inst, scalar(2.0))(0), 0.0, 1e-15);
    // w·2 + (0 − 1) = 0
    EXPECT_NEAR(solve_reduced_adjoint_exact(inst, scalar(0.0))(0), 0.5, 1e-15);
}

TEST(BasicAdjoint, QuadraticIsConstantHalf)
{
    auto inst = bq1();
    for (double x : {-3.0, 0.0, 1.7, 10.0}) EXPECT_NEAR(solve_basic_adjoint_exact(inst, scalar(x))(0, 0), 0.5, 1e-15);
}

TEST(ExactGradient, QuadraticClosedForm)
{
    auto inst = bq1();
    EXPECT_NEAR(exact_gradient(inst, scalar(2.0))(0), 0.0, 1e-15);
    EXPECT_NEAR(exact_gradient(inst, scalar(0.0))(0), -0.5, 1e-15);
    for (double x = -4.0; x <= 4.0; x += 0.5) EXPECT_NEAR(exact_gradient(inst, scalar(x))(0), x / 4.0 - 0.5, 1e-14);
}

TEST(ExactGradient, MatchesCentralDifferences)
{
    auto check = [](const BilevelInstance& inst, const Vector& x) {
        Vector g = exact_gradient(inst, x);
        const double eps = 1e-5;
        for (Index j = 0; j < x.size(); ++j) {
            Vector e = Vector::Zero(x.size());
            e(j) = eps;
            double fd = (objective_value(inst, x + e) - objective_value(inst, x - e)) / (2.0 * eps);
            EXPECT_NEAR(g(j), fd, 1e-6);
        }
    };
    check(bq1(), scalar(0.3));
    check(make_quadratic_bilevel(2.0, vec2(1.0, -1.0)), vec2(0.4, 2.0));
    check(make_saddle_bilevel(scalar(1.0)), scalar(0.7));
    check(make_parametric_poisson(16), vec2(0.6, 2.5));
}

TEST(ExactGradient, ReducedAndBasicDerivationsAgree)
{
    auto inst = make_parametric_poisson(16);
    std::mt19937_64 rng(5);
    for (int t = 0; t < 25; ++t) {
        Vector x = inst.omega.sample(rng);
        Vector u = solve_inner_exact(inst, x);
        Vector via_basic = solve_basic_adjoint_exact(inst, x).transpose() * inst.J_prime(u);
        Vector via_reduced = inst.inner.d_x(u, x).transpose() * solve_reduced_adjoint_exact(inst, x);
        EXPECT_NEAR((via_basic - via_reduced).norm(), 0.0, 1e-10 * (1.0 + via_basic.norm()));
    }
}

TEST(Poisson, InnerSolveMatchesDenseLu)
{
    auto inst = make_parametric_poisson(16);
    ASSERT_TRUE(inst.linear.has_value());
    std::mt19937_64 rng(1);
    for (int t = 0; t < 20; ++t) {
        Vector x = inst.omega.sample(rng);
        Matrix A = inst.linear->A(x);
        Vector b = inst.linear->b(x);
        Vector oracle = A.fullPivLu().solve(b);
        EXPECT_LE((solve_inner_exact(inst, x) - oracle).norm(), 1e-11 * (1.0 + oracle.norm()));

        Vector u = oracle;
        Vector rhs = -inst.J_prime(u);
        Vector w_oracle = A.transpose().fullPivLu().solve(rhs);
        EXPECT_LE((solve_reduced_adjoint_exact(inst, x) - w_oracle).norm(), 1e-11 * (1.0 + w_oracle.norm()));

        Matrix dx = inst.inner.d_x(u, x);
        Matrix p = solve_basic_adjoint_exact(inst, x);
        for (Index j = 0; j < dx.cols(); ++j) {
            Vector col = A.fullPivLu().solve(Vector(-dx.col(j)));
            EXPECT_LE((p.col(j) - col).norm(), 1e-11 * (1.0 + col.norm()));
        }
    }
}

TEST(Poisson, DiagonallyDominantAndJacobiContractsOnCorners)
{
    auto inst = make_parametric_poisson(16);
    for (const auto& x : inst.omega.corners()) {
        Matrix A = inst.linear->A(x);
        for (Index i = 0; i < A.rows(); ++i) {
            double off = A.row(i).cwiseAbs().sum() - std::abs(A(i, i));
            EXPECT_GT(std::abs(A(i, i)), off);
        }
        Matrix D = A.diagonal().asDiagonal();
        Matrix B = Matrix::Identity(A.rows(), A.cols()) - D.inverse() * A;
        double rho = B.eigenvalues().cwiseAbs().maxCoeff();
        EXPECT_LT(rho, 1.0);
    }
}

TEST(Poisson, RejectsBadBox)
{
    Box bad(vec2(-2.0, 1.0), vec2(0.0, 2.0));
    EXPECT_THROW(make_parametric_poisson(16, bad), std::invalid_argument);
    EXPECT_THROW(make_parametric_poisson(3), std::invalid_argument);
}

TEST(Poisson, OutsideOmegaRejected)
{
    auto inst = make_parametric_poisson(8);
    EXPECT_THROW(solve_inner_exact(inst, vec2(5.0, 5.0)), std::domain_error);
}

TEST(ImplicitFunction, FirstOrderExpansion)
{
    auto inst = make_parametric_poisson(12);
    std::mt19937_64 rng(9);
    for (int t = 0; t < 10; ++t) {
        Vector x = inst.omega.center() + 0.2 * (inst.omega.sample(rng) - inst.omega.center());
        Vector e = (inst.omega.sample(rng) - inst.omega.center()).normalized();
        Matrix p = solve_basic_adjoint_exact(inst, x);
        double r1 = (solve_inner_exact(inst, x + 1e-3 * e) - solve_inner_exact(inst, x) - 1e-3 * p * e).norm();
        double r2 = (solve_inner_exact(inst, x + 5e-4 * e) - solve_inner_exact(inst, x) - 5e-4 * p * e).norm();
        // halving ε quarters the remainder
        EXPECT_NEAR(r1 / r2, 4.0, 0.2);
    }
}

TEST(InnerProblem, ResidualJacobianFiniteDifference)
{
    auto inst = make_saddle_bilevel(scalar(1.0));
    Vector u = (Vector(2) << 0.3, -0.2).finished(), x = scalar(0.5);
    Matrix J = inst.inner.d_u(u, x);
    const double eps = 1e-4;
    for (Index j = 0; j < 2; ++j) {
        Vector e = Vector::Zero(2);
        e(j) = eps;
        Vector d = inst.inner.residual(u + e, x) - inst.inner.residual(u, x) - eps * J.col(j);
        EXPECT_LE(d.norm(), 10.0 * eps * eps);
    }
}
