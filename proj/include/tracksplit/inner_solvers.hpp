#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "tracksplit/core.hpp"
#include "tracksplit/operator_core.hpp"
#include "tracksplit/problems.hpp"
#include "tracksplit/trace.hpp"

namespace tracksplit {

enum class InnerAlgorithm { FB, PDPS, Jacobi, GaussSeidel };
enum class SplittingScheme { Jacobi, GaussSeidel };

inline const char* to_string(InnerAlgorithm a)
{
    switch (a) {
    case InnerAlgorithm::FB: return "fb";
    case InnerAlgorithm::PDPS: return "pdps";
    case InnerAlgorithm::Jacobi: return "jacobi";
    case InnerAlgorithm::GaussSeidel: return "gauss_seidel";
    }
    return "?";
}

inline const char* to_string(SplittingScheme s) { return s == SplittingScheme::Jacobi ? "jacobi" : "gauss_seidel"; }

/// Inner algorithm choice; `steps` is the number m of inner steps per outer iteration.
struct InnerSpec {
    InnerAlgorithm alg = InnerAlgorithm::FB;
    double tau = 1.0;
    double sigma = 1.0;
    int steps = 1;
};

struct InnerState {
    Vector u;
    InnerSpec spec;
};

/// One Jacobi or Gauss–Seidel sweep N⁻¹(b − M u) for A = N + M.
inline Vector splitting_step(const Matrix& A, const Vector& b, const Vector& u, SplittingScheme scheme)
{
    const Index n = A.rows();
    if (A.cols() != n) throw DimensionError("splitting_step: matrix is not square");
    require_dim(b.size(), n, "splitting_step: right-hand side");
    require_dim(u.size(), n, "splitting_step: iterate");
    for (Index i = 0; i < n; ++i)
        if (A(i, i) == 0.0) throw SingularError("splitting_step: zero diagonal entry");
    Vector out(n);
    if (scheme == SplittingScheme::Jacobi) {
        for (Index i = 0; i < n; ++i) {
            double s = b(i) - A.row(i).dot(u) + A(i, i) * u(i);
            out(i) = s / A(i, i);
        }
    } else {
        for (Index i = 0; i < n; ++i) {
            double s = b(i);
            for (Index j = 0; j < i; ++j) s -= A(i, j) * out(j);
            for (Index j = i + 1; j < n; ++j) s -= A(i, j) * u(j);
            out(i) = s / A(i, i);
        }
    }
    return out;
}

/// Iteration matrix −N⁻¹M of the splitting.
inline Matrix iteration_matrix(const Matrix& A, SplittingScheme scheme)
{
    const Index n = A.rows();
    Matrix N = scheme == SplittingScheme::Jacobi ? Matrix(A.diagonal().asDiagonal())
                                                 : Matrix(A.triangularView<Eigen::Lower>());
    for (Index i = 0; i < n; ++i)
        if (A(i, i) == 0.0) throw SingularError("iteration_matrix: zero diagonal entry");
    Matrix B = -N.triangularView<Eigen::Lower>().solve(A - N);
    return B;
}

inline double spectral_radius(const Matrix& B)
{
    if (B.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> es(B, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline Vector jacobi_step(const Vector& u, const Vector& x, const ParametricLinearSystem& system)
{
    return splitting_step(system.A(x), system.b(x), u, SplittingScheme::Jacobi);
}

inline Vector gauss_seidel_step(const Vector& u, const Vector& x, const ParametricLinearSystem& system)
{
    return splitting_step(system.A(x), system.b(x), u, SplittingScheme::GaussSeidel);
}

inline Vector fb_inner_step(const Vector& u, const Vector& x, double tau, const BilevelInstance& inst)
{
    if (!inst.fb) throw std::invalid_argument(inst.name + ": no forward-backward inner structure");
    if (!(tau > 0.0) || tau * inst.fb->lipschitz_f > 1.0 + 1e-12)
        throw StepSizeError("fb_inner_step: need 0 < tau*L_f <= 1");
    detail::require_in_omega(inst, x, "fb_inner_step");
    require_dim(u.size(), inst.dim_u(), "fb_inner_step: u");
    return inst.fb->g(x).prox(tau, u - tau * inst.fb->grad_f(u, x));
}

inline void check_inner_pdps_steps(double tau, double sigma, const Matrix& K)
{
    const double nk = spectral_norm(K);
    if (!(tau > 0.0) || !(sigma > 0.0) || tau * sigma * nk > 1.0 + 1e-12 || tau * sigma * nk * nk > 1.0 + 1e-12)
        throw StepSizeError("pdps_inner_step: need tau*sigma*||K|| <= 1 and tau*sigma*||K||^2 <= 1");
}

inline std::pair<Vector, Vector> pdps_inner_step(const Vector& z, const Vector& y, const Vector& x, double tau,
                                                 double sigma, const BilevelInstance& inst)
{
    if (!inst.pdps) throw std::invalid_argument(inst.name + ": no primal-dual inner structure");
    const auto& pd = *inst.pdps;
    check_inner_pdps_steps(tau, sigma, pd.K);
    detail::require_in_omega(inst, x, "pdps_inner_step");
    require_dim(z.size(), pd.K.cols(), "pdps_inner_step: z");
    require_dim(y.size(), pd.K.rows(), "pdps_inner_step: y");
    Vector zn = pd.f(x).prox(tau, z - tau * pd.K.transpose() * y);
    Vector yn = pd.g(x).prox(sigma, y + sigma * pd.K * (2.0 * zn - z));
    return {zn, yn};
}

/// One step of the configured inner algorithm; PDPS iterates are stored as u = (z, y).
inline Vector inner_step(const Vector& u, const Vector& x, const InnerSpec& spec, const BilevelInstance& inst)
{
    switch (spec.alg) {
    case InnerAlgorithm::FB: return fb_inner_step(u, x, spec.tau, inst);
    case InnerAlgorithm::PDPS: {
        if (!inst.pdps) throw std::invalid_argument(inst.name + ": no primal-dual inner structure");
        const Index nz = inst.pdps->K.cols();
        require_dim(u.size(), nz + inst.pdps->K.rows(), "inner_step: (z, y)");
        auto [z, y] = pdps_inner_step(u.head(nz), u.tail(u.size() - nz), x, spec.tau, spec.sigma, inst);
        Vector out(u.size());
        out << z, y;
        return out;
    }
    case InnerAlgorithm::Jacobi:
    case InnerAlgorithm::GaussSeidel: {
        detail::require_in_omega(inst, x, "inner_step");
        auto [A, b] = inst.linear_system_at(x);
        return splitting_step(A, b, u,
                              spec.alg == InnerAlgorithm::Jacobi ? SplittingScheme::Jacobi
                                                                 : SplittingScheme::GaussSeidel);
    }
    }
    throw std::invalid_argument("inner_step: unknown algorithm");
}

inline Vector inner_steps(Vector u, const Vector& x, const InnerSpec& spec, const BilevelInstance& inst)
{
    if (spec.steps < 1) throw std::invalid_argument("inner steps per outer iteration must be >= 1");
    for (int i = 0; i < spec.steps; ++i) u = inner_step(u, x, spec, inst);
    return u;
}

/// Jacobian of an affine map v ↦ step(v) by unit differences about a base point.
inline Matrix affine_step_matrix(const std::function<Vector(const Vector&)>& step, const Vector& base)
{
    const Index n = base.size();
    const Vector f0 = step(base);
    Matrix B(f0.size(), n);
    for (Index i = 0; i < n; ++i) {
        Vector v = base;
        v(i) += 1.0;
        B.col(i) = step(v) - f0;
    }
    return B;
}

/**
 * @brief Empirical or analytic inner tracking constants (κ_u, π_u) with d_U Euclidean and λ Euclidean.
 *
 * `kappa_empirical` marks the inner-PDPS case, for which no closed-form κ_u is available.
 */
struct InnerConstants {
    double kappa_u = kNaN;
    double pi_u = kNaN;
    double rho = kNaN;
    ConstantsMode mode = ConstantsMode::Empirical;
    bool kappa_empirical = false;
};

/// sup over Ω samples of ‖S_u'(x)‖₂, inflated by 5%.
inline double estimate_solution_lipschitz(const BilevelInstance& inst, int samples, std::uint64_t seed)
{
    double m = 0.0;
    for (const auto& x : omega_samples(inst.omega, samples, seed))
        m = std::max(m, spectral_norm(solve_basic_adjoint_exact(inst, x)));
    return 1.05 * m;
}

inline InnerConstants estimate_inner_constants(const BilevelInstance& inst, const InnerSpec& spec, ConstantsMode mode,
                                               int samples = 1000, std::uint64_t seed = 0, double kappa_cap = 3.0)
{
    if (!inst.inner.affine_in_u)
        throw std::invalid_argument("estimate_inner_constants: inner problem must be affine in u");
    if (spec.steps < 1) throw std::invalid_argument("estimate_inner_constants: steps must be >= 1");
    InnerConstants c;
    c.mode = mode;
    if (mode == ConstantsMode::Analytic) {
        if (!inst.analytic) throw std::invalid_argument(inst.name + ": no analytic constants");
        if (spec.alg != InnerAlgorithm::FB)
            throw std::invalid_argument("estimate_inner_constants: analytic mode covers the forward-backward inner only");
        const double q = 1.0 + spec.tau * inst.fb->gamma_g;
        c.kappa_u = std::pow(q, spec.steps);
        c.rho = 1.0 / c.kappa_u;
        c.pi_u = inst.analytic->L_s;
        return c;
    }
    double rho = 0.0;
    for (const auto& x : omega_samples(inst.omega, samples, seed)) {
        Vector s = solve_inner_exact(inst, x);
        Matrix B = affine_step_matrix([&](const Vector& v) { return inner_steps(v, x, spec, inst); }, s);
        rho = std::max(rho, spectral_norm(B));
    }
    c.rho = rho;
    c.kappa_u = std::min(kappa_cap, 1.0 / (rho + 1e-6));
    c.pi_u = estimate_solution_lipschitz(inst, samples, seed);
    c.kappa_empirical = spec.alg == InnerAlgorithm::PDPS;
    if (!(c.kappa_u > 1.0))
        throw std::domain_error("estimate_inner_constants: inner step map is not a contraction on Ω");
    return c;
}

/**
 * @brief Per-step inner tracking slack for k ≥ 1:
 * d_U(u^k, S_u(x^{k−1})) + π_u λ(x^k, x^{k−1}) − κ_u d_U(u^{k+1}, S_u(x^k)).
 */
inline std::vector<double> measure_inner_tracking(const IterateTrace& trace, double kappa_u, double pi_u,
                                                  const SymOperator& Lambda)
{
    if (trace.rows.size() < 2) throw std::invalid_argument("measure_inner_tracking: need at least 2 outer steps");
    std::vector<double> out;
    for (std::size_t k = 1; k < trace.rows.size(); ++k) {
        const auto& prev = trace.rows[k - 1];
        const auto& cur = trace.rows[k];
        if (cur.su.size() == 0 || prev.su.size() == 0)
            throw std::invalid_argument("measure_inner_tracking: trace lacks exact S_u values");
        double bk = (prev.u - prev.su).norm();
        double bk1 = (cur.u - cur.su).norm();
        out.push_back(bk + pi_u * seminorm(Lambda, cur.x - prev.x) - kappa_u * bk1);
    }
    return out;
}

} // namespace tracksplit
