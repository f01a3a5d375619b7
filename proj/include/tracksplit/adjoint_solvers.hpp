#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tracksplit/core.hpp"
#include "tracksplit/inner_solvers.hpp"
#include "tracksplit/problems.hpp"

namespace tracksplit {

enum class AdjointVariant { Reduced, Basic };

inline const char* to_string(AdjointVariant v) { return v == AdjointVariant::Reduced ? "reduced" : "basic"; }

struct AdjointSpec {
    AdjointVariant variant = AdjointVariant::Reduced;
    SplittingScheme scheme = SplittingScheme::Jacobi;
    int steps = 1;
};

/// Reduced iterate w (length dim_w) or basic iterate p (dim_u×dim_x, stored column-major).
struct AdjointState {
    Vector w;
    AdjointSpec spec;
};

/// One splitting step on (∂T/∂u)ᵀ w = −J'(u_next).
inline Vector reduced_adjoint_step(const Vector& w, const Vector& u_next, const Vector& x, const BilevelInstance& inst,
                                   SplittingScheme scheme)
{
    require_dim(w.size(), inst.dim_w(), "reduced_adjoint_step: w");
    require_dim(u_next.size(), inst.dim_u(), "reduced_adjoint_step: u");
    Matrix At = inst.inner.d_u(u_next, x).transpose();
    return splitting_step(At, -inst.J_prime(u_next), w, scheme);
}

/// One splitting step, column by column, on (∂T/∂u) p = −∂T/∂x.
inline Matrix basic_adjoint_step(const Matrix& p, const Vector& u_next, const Vector& x, const BilevelInstance& inst,
                                 SplittingScheme scheme)
{
    require_dim(p.rows(), inst.dim_u(), "basic_adjoint_step: p rows");
    require_dim(p.cols(), inst.dim_x(), "basic_adjoint_step: p columns");
    Matrix A = inst.inner.d_u(u_next, x);
    Matrix rhs = -inst.inner.d_x(u_next, x);
    Matrix out(p.rows(), p.cols());
    for (Index j = 0; j < p.cols(); ++j) out.col(j) = splitting_step(A, rhs.col(j), p.col(j), scheme);
    return out;
}

/// m adjoint steps; basic iterates travel flattened.
inline Vector adjoint_steps(Vector w, const Vector& u_next, const Vector& x, const AdjointSpec& spec,
                            const BilevelInstance& inst)
{
    if (spec.steps < 1) throw std::invalid_argument("adjoint steps per outer iteration must be >= 1");
    for (int i = 0; i < spec.steps; ++i) {
        if (spec.variant == AdjointVariant::Reduced)
            w = reduced_adjoint_step(w, u_next, x, inst, spec.scheme);
        else
            w = flatten(basic_adjoint_step(unflatten(w, inst.dim_u(), inst.dim_x()), u_next, x, inst, spec.scheme));
    }
    return w;
}

inline Vector differential_transform_reduced(const Vector& w_next, const Vector& u_next, const Vector& x,
                                             const BilevelInstance& inst)
{
    require_dim(w_next.size(), inst.dim_w(), "differential_transform_reduced: w");
    return inst.inner.d_x(u_next, x).transpose() * w_next;
}

inline Vector differential_transform_basic(const Matrix& p_next, const Vector& u_next, const BilevelInstance& inst)
{
    require_dim(p_next.rows(), inst.dim_u(), "differential_transform_basic: p rows");
    require_dim(p_next.cols(), inst.dim_x(), "differential_transform_basic: p columns");
    return p_next.transpose() * inst.J_prime(u_next);
}

inline Vector differential_transform(const Vector& w_next, const Vector& u_next, const Vector& x,
                                     AdjointVariant variant, const BilevelInstance& inst)
{
    if (variant == AdjointVariant::Reduced) return differential_transform_reduced(w_next, u_next, x, inst);
    return differential_transform_basic(unflatten(w_next, inst.dim_u(), inst.dim_x()), u_next, inst);
}

/// Exact S_w(x): reduced adjoint, or S_u'(x) flattened for the basic variant.
inline Vector exact_adjoint(const BilevelInstance& inst, const Vector& x, AdjointVariant variant,
                            SolveCounters* counters = nullptr)
{
    if (variant == AdjointVariant::Reduced) return solve_reduced_adjoint_exact(inst, x, counters);
    return flatten(solve_basic_adjoint_exact(inst, x, counters));
}

struct TransformConstants {
    double alpha_u = 0.0;
    double alpha_w = 0.0;
    AdjointVariant variant = AdjointVariant::Reduced;
    ConstantsMode mode = ConstantsMode::Analytic;
    double N_Jp = kNaN;
    double L_Jp = kNaN;
    double N_Sup = kNaN;
    double N_Sw = kNaN;
    double L_Tx_u = kNaN;
    double M_Tx = kNaN;
    double region_radius = 0.0;
};

struct TransformErrorReport {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = true;
};

/// Checks ‖∇̃F − F'‖ ≤ α_u‖u − S_u(x)‖ + α_w‖w − S_w(x)‖ (Frobenius for p).
inline TransformErrorReport transform_error_bound(const Vector& u_next, const Vector& w_or_p_next, const Vector& x,
                                                  const BilevelInstance& inst, const TransformConstants& c)
{
    Vector su = solve_inner_exact(inst, x);
    Vector sw = exact_adjoint(inst, x, c.variant);
    Vector est = differential_transform(w_or_p_next, u_next, x, c.variant, inst);
    Vector exact = exact_gradient(inst, x);
    TransformErrorReport r;
    r.lhs = (est - exact).norm();
    double du = (u_next - su).norm(), dw = (w_or_p_next - sw).norm();
    r.rhs = (c.alpha_u == 0.0 ? 0.0 : c.alpha_u * du) + (c.alpha_w == 0.0 ? 0.0 : c.alpha_w * dw);
    r.holds = r.lhs <= r.rhs + 1e-10;
    return r;
}

namespace detail {

/// ‖∂T/∂x(u,x) − ∂T/∂x(u',x)‖_F ≤ L‖u − u'‖; exact for linear families.
inline double tx_u_lipschitz(const BilevelInstance& inst, const std::vector<Vector>& pts, double radius,
                             std::uint64_t seed)
{
    if (inst.linear) {
        double s = 0.0;
        for (const auto& A : inst.linear->A_terms) {
            double n = spectral_norm(A);
            s += n * n;
        }
        return std::sqrt(s);
    }
    std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
    std::normal_distribution<double> nd;
    double m = 0.0;
    for (const auto& x : pts) {
        Vector u = solve_inner_exact(inst, x);
        Vector d(u.size());
        for (Index i = 0; i < d.size(); ++i) d(i) = nd(rng);
        d *= std::max(radius, 1e-3) / d.norm();
        m = std::max(m, (inst.inner.d_x(u + d, x) - inst.inner.d_x(u, x)).norm() / d.norm());
    }
    return 1.05 * m;
}

inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, const Box& omega,
                          double h = 1e-6)
{
    Vector f0 = f(x);
    Matrix J(f0.size(), x.size());
    for (Index i = 0; i < x.size(); ++i) {
        Vector xp = x, xm = x;
        double hp = std::min(h, omega.hi(i) - x(i)), hm = std::min(h, x(i) - omega.lo(i));
        xp(i) += hp;
        xm(i) -= hm;
        J.col(i) = (f(xp) - f(xm)) / (hp + hm);
    }
    return J;
}

} // namespace detail

inline TransformConstants estimate_transform_constants(const BilevelInstance& inst, ConstantsMode mode,
                                                       AdjointVariant variant, double region_radius = 0.0,
                                                       int samples = 1000, std::uint64_t seed = 0)
{
    TransformConstants c;
    c.variant = variant;
    c.mode = mode;
    c.region_radius = region_radius;
    c.L_Jp = inst.J_prime_lipschitz;
    if (mode == ConstantsMode::Analytic) {
        if (!inst.analytic) throw std::invalid_argument(inst.name + ": no analytic constants");
        const auto& a = *inst.analytic;
        c.N_Sup = a.N_Sup;
        c.L_Tx_u = a.L_Tx_u;
        c.M_Tx = a.M_Tx_at_S;
        c.N_Sw = a.N_Sw(inst.omega);
        c.N_Jp = a.N_Jp_at_S(inst.omega);
    } else {
        auto pts = omega_samples(inst.omega, samples, seed);
        double nsup = 0, nsw = 0, mtx = 0, njp = 0;
        for (const auto& x : pts) {
            Vector u = solve_inner_exact(inst, x);
            nsup = std::max(nsup, spectral_norm(solve_basic_adjoint_exact(inst, x)));
            nsw = std::max(nsw, solve_reduced_adjoint_exact(inst, x).norm());
            mtx = std::max(mtx, spectral_norm(inst.inner.d_x(u, x)));
            njp = std::max(njp, inst.J_prime(u).norm());
        }
        c.N_Sup = 1.05 * nsup;
        c.N_Sw = 1.05 * nsw;
        c.M_Tx = 1.05 * mtx;
        c.N_Jp = 1.05 * njp;
        c.L_Tx_u = detail::tx_u_lipschitz(inst, pts, region_radius, seed);
    }
    if (variant == AdjointVariant::Reduced) {
        c.alpha_u = c.L_Tx_u == 0.0 ? 0.0 : c.N_Sw * c.L_Tx_u;
        c.alpha_w = c.M_Tx + c.L_Tx_u * region_radius;
    } else {
        c.alpha_u = c.L_Jp == 0.0 ? 0.0 : c.L_Jp * c.N_Sup;
        c.alpha_w = c.N_Jp + c.L_Jp * region_radius;
    }
    return c;
}

/// Adjoint tracking constants (κ_w, μ_u, π_w) for d_W Euclidean/Frobenius and Euclidean λ.
struct AdjointConstants {
    double kappa_w = kNaN;
    double mu_u = kNaN;
    double pi_w = kNaN;
    double rho = kNaN;
    double N_Ainv = kNaN;
    double L_rhs = kNaN;
    ConstantsMode mode = ConstantsMode::Empirical;
};

inline AdjointConstants estimate_adjoint_constants(const BilevelInstance& inst, const AdjointSpec& spec,
                                                   ConstantsMode mode, double region_radius = 0.0,
                                                   int samples = 1000, std::uint64_t seed = 0,
                                                   double kappa_cap = 3.0)
{
    if (!inst.inner.affine_in_u)
        throw std::invalid_argument("estimate_adjoint_constants: inner problem must be affine in u");
    AdjointConstants c;
    c.mode = mode;
    const bool reduced = spec.variant == AdjointVariant::Reduced;
    if (mode == ConstantsMode::Analytic) {
        if (!inst.analytic) throw std::invalid_argument(inst.name + ": no analytic constants");
        const auto& a = *inst.analytic;
        // Analytic data covers diagonal ∂T/∂u, for which both splittings are exact.
        c.rho = 0.0;
        c.N_Ainv = a.N_Ainv;
        c.L_rhs = reduced ? inst.J_prime_lipschitz : a.L_Tx_u;
        c.pi_w = reduced ? a.L_Sw : a.L_Sp;
    } else {
        auto pts = omega_samples(inst.omega, samples, seed);
        double rho = 0, nainv = 0, lsw = 0;
        for (const auto& x : pts) {
            auto [A, b] = inst.linear_system_at(x);
            Matrix Bit = iteration_matrix(reduced ? Matrix(A.transpose()) : A, spec.scheme);
            Matrix Bm = Matrix::Identity(Bit.rows(), Bit.cols());
            for (int i = 0; i < spec.steps; ++i) Bm = Bit * Bm;
            rho = std::max(rho, spectral_norm(Bm));
            nainv = std::max(nainv, 1.0 / Eigen::JacobiSVD<Matrix>(A).singularValues().minCoeff());
            auto sw = [&](const Vector& xx) { return exact_adjoint(inst, xx, spec.variant); };
            lsw = std::max(lsw, reduced ? spectral_norm(detail::fd_jacobian(sw, x, inst.omega))
                                        : detail::fd_jacobian(sw, x, inst.omega).norm());
        }
        c.rho = rho;
        c.N_Ainv = 1.05 * nainv;
        c.L_rhs = reduced ? inst.J_prime_lipschitz : detail::tx_u_lipschitz(inst, pts, region_radius, seed);
        c.pi_w = 1.05 * lsw;
    }
    c.kappa_w = std::min(kappa_cap, 1.0 / (c.rho + 1e-6));
    if (!(c.kappa_w > 1.0)) throw std::domain_error("estimate_adjoint_constants: adjoint splitting does not contract");
    c.mu_u = std::max(c.kappa_w * (1.0 + c.rho) * c.N_Ainv * c.L_rhs, 1e-8);
    c.pi_w = std::max(c.pi_w, 1e-8);
    return c;
}

/**
 * @brief Per-step adjoint tracking slack for k ≥ 1:
 * d_W(w^k, S_w(x^{k−1})) + μ_u d_U(u^{k+1}, S_u(x^k)) + π_w λ(x^k, x^{k−1}) − κ_w d_W(w^{k+1}, S_w(x^k)).
 */
inline std::vector<double> measure_adjoint_tracking(const IterateTrace& trace, double kappa_w, double mu_u,
                                                    double pi_w, const SymOperator& Lambda)
{
    if (trace.rows.size() < 2) throw std::invalid_argument("measure_adjoint_tracking: need at least 2 outer steps");
    std::vector<double> out;
    for (std::size_t k = 1; k < trace.rows.size(); ++k) {
        const auto& prev = trace.rows[k - 1];
        const auto& cur = trace.rows[k];
        double ck = (prev.w - prev.sw).norm();
        double ck1 = (cur.w - cur.sw).norm();
        double bk1 = (cur.u - cur.su).norm();
        out.push_back(ck + mu_u * bk1 + pi_w * seminorm(Lambda, cur.x - prev.x) - kappa_w * ck1);
    }
    return out;
}

} // namespace tracksplit
