#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "tracksplit/adjoint_solvers.hpp"
#include "tracksplit/outer_methods.hpp"

using namespace tracksplit;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

Vector vec2(double a, double b) { return (Vector(2) << a, b).finished(); }

BilevelInstance bq1(std::optional<Box> omega = {}) { return make_quadratic_bilevel(1.0, scalar(1.0), omega); }

Box bq1_box() { return Box(scalar(-4.0), scalar(4.0)); }

} // namespace

TEST(ReducedAdjointStep, QuadraticExamples)
{
    auto inst = bq1();
    for (double w : {-2.0, 0.0, 5.0}) {
        EXPECT_NEAR(reduced_adjoint_step(scalar(w), scalar(1.0), scalar(2.0), inst, SplittingScheme::Jacobi)(0), 0.0,
                    1e-15);
        EXPECT_NEAR(reduced_adjoint_step(scalar(w), scalar(0.0), scalar(0.0), inst, SplittingScheme::Jacobi)(0), 0.5,
                    1e-15);
    }
}

TEST(ReducedAdjointStep, PoissonFixedPointIsExactAdjoint)
{
    auto inst = make_parametric_poisson(16);
    Vector x = vec2(0.7, 2.4);
    Vector u = solve_inner_exact(inst, x);
    Vector oracle = inst.linear->A(x).transpose().fullPivLu().solve(Vector(-inst.J_prime(u)));
    for (auto scheme : {SplittingScheme::Jacobi, SplittingScheme::GaussSeidel}) {
        Vector w = Vector::Zero(16);
        for (int k = 0; k < 400; ++k) w = reduced_adjoint_step(w, u, x, inst, scheme);
        EXPECT_LE((w - oracle).norm(), 1e-11 * (1.0 + oracle.norm()));
        EXPECT_LE((w - solve_reduced_adjoint_exact(inst, x)).norm(), 1e-11 * (1.0 + oracle.norm()));
    }
}

TEST(BasicAdjointStep, QuadraticIsExactInOneStep)
{
    auto inst = bq1();
    for (double p : {-1.0, 0.0, 3.0})
        EXPECT_NEAR(basic_adjoint_step(Matrix::Constant(1, 1, p), scalar(0.3), scalar(0.6), inst,
                                       SplittingScheme::GaussSeidel)(0, 0),
                    0.5, 1e-15);
}

TEST(BasicAdjointStep, FixedPointIsExactBasicAdjoint)
{
    auto inst = make_parametric_poisson(8);
    Vector x = vec2(0.2, 3.5);
    Vector u = solve_inner_exact(inst, x);
    Matrix p = Matrix::Zero(8, 2);
    for (int k = 0; k < 400; ++k) p = basic_adjoint_step(p, u, x, inst, SplittingScheme::Jacobi);
    EXPECT_LE((p - solve_basic_adjoint_exact(inst, x)).norm(), 1e-11);
}

TEST(BasicAdjointStep, PoissonContractionMatchesJacobiRadius)
{
    auto inst = make_parametric_poisson(8);
    Vector x = vec2(0.5, 3.0);
    Vector u = solve_inner_exact(inst, x);
    Matrix A = inst.linear->A(x);
    Matrix B = Matrix::Identity(8, 8) - Matrix(A.diagonal().cwiseInverse().asDiagonal()) * A;
    const double rho = B.eigenvalues().cwiseAbs().maxCoeff();
    const Matrix exact = solve_basic_adjoint_exact(inst, x);
    Matrix p = Matrix::Zero(8, 2);
    double e = (p - exact).norm(), e_prev = e;
    for (int k = 0; k < 20; ++k) {
        e_prev = e;
        p = basic_adjoint_step(p, u, x, inst, SplittingScheme::Jacobi);
        e = (p - exact).norm();
    }
    EXPECT_NEAR(e / e_prev, rho, 0.05 * rho);
}

TEST(DifferentialTransform, QuadraticValues)
{
    auto inst = bq1();
    EXPECT_NEAR(differential_transform_reduced(scalar(0.0), scalar(1.0), scalar(2.0), inst)(0), 0.0, 1e-15);
    EXPECT_NEAR(differential_transform_reduced(scalar(0.5), scalar(0.0), scalar(0.0), inst)(0), -0.5, 1e-15);
    EXPECT_NEAR(differential_transform_basic(Matrix::Constant(1, 1, 0.5), scalar(1.0), inst)(0), 0.0, 1e-15);
    EXPECT_NEAR(differential_transform_basic(Matrix::Constant(1, 1, 0.5), scalar(0.0), inst)(0), -0.5, 1e-15);
}

TEST(DifferentialTransform, ExactInputsGiveExactGradient)
{
    auto inst = make_parametric_poisson(16);
    std::mt19937_64 rng(2);
    for (int t = 0; t < 10; ++t) {
        Vector x = inst.omega.sample(rng);
        Vector u = solve_inner_exact(inst, x);
        Vector g = exact_gradient(inst, x);
        Vector r = differential_transform_reduced(solve_reduced_adjoint_exact(inst, x), u, x, inst);
        Vector b = differential_transform_basic(solve_basic_adjoint_exact(inst, x), u, inst);
        EXPECT_LE((r - g).norm(), 1e-10 * (1.0 + g.norm()));
        EXPECT_LE((b - g).norm(), 1e-10 * (1.0 + g.norm()));
    }
}

TEST(TransformConstants, QuadraticAnalytic)
{
    auto inst = bq1(bq1_box());
    auto red = estimate_transform_constants(inst, ConstantsMode::Analytic, AdjointVariant::Reduced);
    EXPECT_DOUBLE_EQ(red.M_Tx, 1.0);
    EXPECT_DOUBLE_EQ(red.L_Tx_u, 0.0);
    EXPECT_DOUBLE_EQ(red.alpha_u, 0.0);
    EXPECT_DOUBLE_EQ(red.alpha_w, 1.0);
    auto bas = estimate_transform_constants(inst, ConstantsMode::Analytic, AdjointVariant::Basic);
    EXPECT_DOUBLE_EQ(bas.N_Sup, 0.5);
}

TEST(TransformConstants, EmpiricalDominatesSingleSamples)
{
    auto inst = make_parametric_poisson(8);
    auto c = estimate_transform_constants(inst, ConstantsMode::Empirical, AdjointVariant::Reduced, 0.0, 100, 0);
    std::mt19937_64 rng(99);
    for (int t = 0; t < 20; ++t) {
        Vector x = inst.omega.sample(rng);
        EXPECT_GE(c.N_Sw, solve_reduced_adjoint_exact(inst, x).norm());
        EXPECT_GE(c.N_Sup, spectral_norm(solve_basic_adjoint_exact(inst, x)));
    }
    EXPECT_THROW(estimate_transform_constants(bq1(), ConstantsMode::Empirical, AdjointVariant::Reduced),
                 std::domain_error);
}

TEST(TransformErrorBound, ExactInputsBothSidesZero)
{
    auto inst = bq1(bq1_box());
    auto c = estimate_transform_constants(inst, ConstantsMode::Analytic, AdjointVariant::Reduced);
    Vector x = scalar(1.3);
    auto r = transform_error_bound(solve_inner_exact(inst, x), solve_reduced_adjoint_exact(inst, x), x, inst, c);
    EXPECT_NEAR(r.lhs, 0.0, 1e-15);
    EXPECT_NEAR(r.rhs, 0.0, 1e-15);
    EXPECT_TRUE(r.holds);
}

TEST(TransformErrorBound, RandomPerturbationsHold)
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> nd;
    auto perturb = [&](const Vector& v, double r) {
        Vector d(v.size());
        for (Index i = 0; i < d.size(); ++i) d(i) = nd(rng);
        return Vector(v + r * d / d.norm());
    };
    const double radius = 0.5;
    auto q = bq1(bq1_box());
    auto p = make_parametric_poisson(8);
    for (auto variant : {AdjointVariant::Reduced, AdjointVariant::Basic}) {
        auto cq = estimate_transform_constants(q, ConstantsMode::Analytic, variant, radius);
        auto cp = estimate_transform_constants(p, ConstantsMode::Empirical, variant, radius, 100, 1);
        for (int t = 0; t < 1000; ++t) {
            const BilevelInstance& inst = t % 2 ? p : q;
            const auto& c = t % 2 ? cp : cq;
            Vector x = inst.omega.sample(rng);
            std::uniform_real_distribution<double> ur(0.0, radius);
            Vector u = perturb(solve_inner_exact(inst, x), ur(rng));
            Vector w = perturb(exact_adjoint(inst, x, variant), ur(rng));
            auto r = transform_error_bound(u, w, x, inst, c);
            ASSERT_TRUE(r.holds) << "sample " << t << " lhs " << r.lhs << " rhs " << r.rhs;
        }
    }
}

TEST(AdjointTracking, QuadraticSingleLoopRun)
{
    auto inst = bq1();
    InnerSpec in{InnerAlgorithm::FB, 0.5, 1.0, 1};
    AdjointSpec ad;
    OuterSpec o;
    o.tau = 0.25;
    RunOptions opt;
    opt.budget = 200;
    opt.tolerance = 0.0;
    opt.x0 = scalar(0.0);
    auto tr = run_single_loop(&inst, in, ad, o, opt);
    auto c = estimate_adjoint_constants(inst, ad, ConstantsMode::Analytic);
    for (double s : measure_adjoint_tracking(tr, c.kappa_w, c.mu_u, c.pi_w, SymOperator::identity(1)))
        EXPECT_GE(s, -1e-10);
}

TEST(AdjointTracking, PoissonSingleLoopRunWithEmpiricalConstants)
{
    auto inst = make_parametric_poisson(16);
    InnerSpec in{InnerAlgorithm::Jacobi, 1.0, 1.0, 1};
    AdjointSpec ad;
    OuterSpec o;
    o.tau = 0.3;
    RunOptions opt;
    opt.budget = 150;
    opt.tolerance = 0.0;
    opt.x0 = vec2(0.7, 2.5);
    auto tr = run_single_loop(&inst, in, ad, o, opt);
    auto c = estimate_adjoint_constants(inst, ad, ConstantsMode::Empirical, 0.0, 100, 0);
    for (double s : measure_adjoint_tracking(tr, c.kappa_w, c.mu_u, c.pi_w, SymOperator::identity(2)))
        EXPECT_GE(s, -1e-10);
}
