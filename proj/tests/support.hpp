#pragma once

#include "tracksplit/tracksplit.hpp"

namespace tracksplit::testing {

inline Vector scalar(double v) { return Vector::Constant(1, v); }

inline Vector vec2(double a, double b) { return (Vector(2) << a, b).finished(); }

/// Single-loop run on BQ1 (FB inner τ=1/2, reduced Jacobi adjoint, FB outer) with analytic ledger constants.
struct Bq1Run {
    BilevelInstance inst = make_quadratic_bilevel(1.0, scalar(1.0));
    InnerSpec inner{InnerAlgorithm::FB, 0.5, 1.0, 1};
    AdjointSpec adjoint;
    OuterSpec outer;
    RunOptions opts;
    TrackingConstants constants;
    SymOperator D;
    SymOperator Lambda;
    IterateTrace trace;

    explicit Bq1Run(long budget, double tau = 0.25, double gamma_tilde = 0.84, double x0 = 0.0)
    {
        outer.tau = tau;
        auto ic = estimate_inner_constants(inst, inner, ConstantsMode::Analytic);
        auto ac = estimate_adjoint_constants(inst, adjoint, ConstantsMode::Analytic);
        Box box(scalar(-4.0), scalar(4.0));
        auto bounded = make_quadratic_bilevel(1.0, scalar(1.0), box);
        auto tc = estimate_transform_constants(bounded, ConstantsMode::Analytic, adjoint.variant);
        const double L = inst.analytic->F_lipschitz;
        D = SymOperator::identity(1, 1.0 / tau);
        Lambda = D.scaled(L * tau);
        constants = assemble_tracking_constants(ic, ac, tc, Lambda, D);
        opts.budget = budget;
        opts.tolerance = 0.0;
        opts.x0 = scalar(x0);
        opts.constants = constants;
        opts.transform = tc;
        opts.L = L;
        opts.gamma_tilde = gamma_tilde;
        trace = run_single_loop(&inst, inner, adjoint, outer, opts);
    }

    double b1() const { return (trace.rows[0].u - trace.rows[0].su).norm(); }
    double c1() const { return (trace.rows[0].w - trace.rows[0].sw).norm(); }
};

} // namespace tracksplit::testing
