#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "tracksplit/core.hpp"
#include "tracksplit/prox.hpp"

namespace tracksplit {

/// Axis-aligned box Ω; infinite bounds are allowed.
struct Box {
    Vector lo;
    Vector hi;

    Box() = default;
    Box(Vector l, Vector h) : lo(std::move(l)), hi(std::move(h))
    {
        require_dim(hi.size(), lo.size(), "Box bounds");
        for (Index i = 0; i < lo.size(); ++i)
            if (!(lo(i) <= hi(i))) throw std::invalid_argument("Box: lower bound exceeds upper bound");
    }

    static Box whole(Index n) { return Box(Vector::Constant(n, -kInf), Vector::Constant(n, kInf)); }

    Index dim() const { return lo.size(); }

    bool contains(const Vector& x) const
    {
        require_dim(x.size(), dim(), "Box::contains");
        for (Index i = 0; i < x.size(); ++i)
            if (!(x(i) >= lo(i) && x(i) <= hi(i))) return false;
        return true;
    }

    bool bounded() const { return lo.allFinite() && hi.allFinite(); }

    Vector center() const
    {
        if (!bounded()) throw std::domain_error("Box::center: unbounded box");
        return 0.5 * (lo + hi);
    }

    std::vector<Vector> corners() const
    {
        if (!bounded()) throw std::domain_error("Box::corners: unbounded box");
        if (dim() > 20) throw std::invalid_argument("Box::corners: dimension too large");
        std::vector<Vector> out;
        for (unsigned long mask = 0; mask < (1UL << dim()); ++mask) {
            Vector c(dim());
            for (Index i = 0; i < dim(); ++i) c(i) = (mask >> i) & 1UL ? hi(i) : lo(i);
            out.push_back(c);
        }
        return out;
    }

    Vector sample(std::mt19937_64& rng) const
    {
        if (!bounded()) throw std::domain_error("Box::sample: unbounded box");
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Vector x(dim());
        for (Index i = 0; i < dim(); ++i) x(i) = lo(i) + u(rng) * (hi(i) - lo(i));
        return x;
    }
};

/// Inner problem 0 = T(u, x) with Jacobians; ∂T/∂u is dim_w×dim_u, ∂T/∂x is dim_w×dim_x.
struct ParametricInnerProblem {
    Index dim_u = 0;
    Index dim_x = 0;
    Index dim_w = 0;
    std::function<Vector(const Vector&, const Vector&)> residual;
    std::function<Matrix(const Vector&, const Vector&)> d_u;
    std::function<Matrix(const Vector&, const Vector&)> d_x;
    bool affine_in_u = false;
};

/// A(x)u = b(x) with A(x) = A0 + Σ x_i A_i and b(x) = b0 + Σ x_i b_i.
struct ParametricLinearSystem {
    Matrix A0;
    std::vector<Matrix> A_terms;
    Vector b0;
    std::vector<Vector> b_terms;

    Index dim() const { return A0.rows(); }
    Index dim_x() const { return static_cast<Index>(A_terms.size()); }

    Matrix A(const Vector& x) const
    {
        require_dim(x.size(), dim_x(), "ParametricLinearSystem::A");
        Matrix a = A0;
        for (Index i = 0; i < x.size(); ++i) a += x(i) * A_terms[i];
        return a;
    }

    Vector b(const Vector& x) const
    {
        require_dim(x.size(), dim_x(), "ParametricLinearSystem::b");
        Vector v = b0;
        for (Index i = 0; i < x.size(); ++i) v += x(i) * b_terms[i];
        return v;
    }

    ParametricInnerProblem as_inner_problem() const
    {
        ParametricLinearSystem sys = *this;
        ParametricInnerProblem p;
        p.dim_u = p.dim_w = dim();
        p.dim_x = dim_x();
        p.affine_in_u = true;
        p.residual = [sys](const Vector& u, const Vector& x) -> Vector { return sys.A(x) * u - sys.b(x); };
        p.d_u = [sys](const Vector&, const Vector& x) -> Matrix { return sys.A(x); };
        p.d_x = [sys](const Vector& u, const Vector&) -> Matrix {
            Matrix d(sys.dim(), sys.dim_x());
            for (Index j = 0; j < sys.dim_x(); ++j) d.col(j) = sys.A_terms[j] * u - sys.b_terms[j];
            return d;
        };
        return p;
    }
};

/// T(u,x) = ∇f(u;x) + ∂g(u;x) with smooth f and prox-friendly g (inner forward-backward).
struct FbInnerStructure {
    std::function<Vector(const Vector&, const Vector&)> grad_f;
    std::function<ProxFunction(const Vector&)> g;
    double lipschitz_f = 1.0;
    double gamma_g = 0.0;
};

/// u = (z, y) with T = (∇f(z;x) + Kᵀy, ∇g(y;x) − Kz) (inner primal-dual).
struct PdpsInnerStructure {
    Matrix K;
    std::function<ProxFunction(const Vector&)> f;
    std::function<ProxFunction(const Vector&)> g;
};

/// Closed-form sups and Lipschitz factors, available for the quadratic family only.
struct AnalyticData {
    double L_s = 0.0;
    double N_Ainv = 0.0;
    double L_Sw = 0.0;
    double L_Sp = 0.0;
    double N_Sup = 0.0;
    double L_Tx_u = 0.0;
    double M_Tx_at_S = 0.0;
    std::function<double(const Box&)> N_Sw;
    std::function<double(const Box&)> N_Jp_at_S;
    double F_lipschitz = 0.0;
    double F_monotone = 0.0;
};

enum class ConstantsMode { Analytic, Empirical };

inline const char* to_string(ConstantsMode m) { return m == ConstantsMode::Analytic ? "analytic" : "empirical"; }

struct BilevelInstance {
    std::string name;
    ParametricInnerProblem inner;
    std::function<double(const Vector&)> J;
    std::function<Vector(const Vector&)> J_prime;
    double J_prime_lipschitz = 1.0;
    std::function<double(const Vector&)> F;
    std::function<Vector(const Vector&)> F_prime;
    std::optional<Vector> x_star;
    Box omega;
    std::optional<FbInnerStructure> fb;
    std::optional<PdpsInnerStructure> pdps;
    std::optional<ParametricLinearSystem> linear;
    std::optional<AnalyticData> analytic;

    Index dim_x() const { return inner.dim_x; }
    Index dim_u() const { return inner.dim_u; }
    Index dim_w() const { return inner.dim_w; }

    /// (A, b) of the affine inner equation at x; uses the stored linear family when present.
    std::pair<Matrix, Vector> linear_system_at(const Vector& x) const
    {
        if (linear) return {linear->A(x), linear->b(x)};
        if (!inner.affine_in_u) throw std::invalid_argument(name + ": inner problem is not affine in u");
        Vector zero = Vector::Zero(dim_u());
        return {inner.d_u(zero, x), -inner.residual(zero, x)};
    }
};

/// Algorithmic solve counters; diagnostics oracles do not touch these.
struct SolveCounters {
    long lu_solves = 0;
    long newton_iterations = 0;
};

namespace detail {

inline Matrix lu_solve(const Matrix& A, const Matrix& B, const std::string& what)
{
    require_finite(A, what);
    Eigen::PartialPivLU<Matrix> lu(A);
    if (!(lu.rcond() > 1e-12)) throw SingularError(what + ": singular Jacobian");
    return lu.solve(B);
}

inline void require_in_omega(const BilevelInstance& inst, const Vector& x, const char* what)
{
    require_dim(x.size(), inst.dim_x(), what);
    if (!inst.omega.contains(x)) throw std::domain_error(std::string(what) + ": x outside Ω");
}

} // namespace detail

inline Vector solve_inner_exact(const BilevelInstance& inst, const Vector& x, SolveCounters* counters = nullptr)
{
    detail::require_in_omega(inst, x, "solve_inner_exact");
    const auto& in = inst.inner;
    if (in.affine_in_u) {
        auto [A, b] = inst.linear_system_at(x);
        if (counters) ++counters->lu_solves;
        return detail::lu_solve(A, b, "solve_inner_exact");
    }
    Vector u = Vector::Zero(in.dim_u);
    for (int it = 0; it < 50; ++it) {
        Vector r = in.residual(u, x);
        if (r.norm() <= 1e-12) return u;
        if (counters) {
            ++counters->newton_iterations;
            ++counters->lu_solves;
        }
        u -= detail::lu_solve(in.d_u(u, x), r, "solve_inner_exact");
    }
    if (in.residual(u, x).norm() <= 1e-12) return u;
    throw ConvergenceError("solve_inner_exact: Newton did not converge in 50 iterations");
}

inline Vector solve_reduced_adjoint_exact(const BilevelInstance& inst, const Vector& x,
                                          SolveCounters* counters = nullptr)
{
    Vector u = solve_inner_exact(inst, x, counters);
    Matrix Tu = inst.inner.d_u(u, x);
    if (counters) ++counters->lu_solves;
    return detail::lu_solve(Tu.transpose(), -inst.J_prime(u), "solve_reduced_adjoint_exact");
}

inline Matrix solve_basic_adjoint_exact(const BilevelInstance& inst, const Vector& x,
                                        SolveCounters* counters = nullptr)
{
    Vector u = solve_inner_exact(inst, x, counters);
    if (counters) ++counters->lu_solves;
    return detail::lu_solve(inst.inner.d_u(u, x), -inst.inner.d_x(u, x), "solve_basic_adjoint_exact");
}

inline Vector exact_gradient(const BilevelInstance& inst, const Vector& x)
{
    Vector u = solve_inner_exact(inst, x);
    Vector w = detail::lu_solve(inst.inner.d_u(u, x).transpose(), -inst.J_prime(u), "exact_gradient");
    return inst.inner.d_x(u, x).transpose() * w;
}

inline double objective_value(const BilevelInstance& inst, const Vector& x)
{
    return inst.J(solve_inner_exact(inst, x));
}

/// BQ1 family: f(u;x)=½‖u−x‖², g(u)=(γ/2)‖u‖², T=(1+γ)u−x, J(u)=½‖u−target‖².
inline BilevelInstance make_quadratic_bilevel(double gamma, const Vector& target, std::optional<Box> omega = {})
{
    if (!(gamma > 0.0)) throw std::invalid_argument("make_quadratic_bilevel: gamma must be positive");
    const Index n = target.size();
    if (n == 0) throw std::invalid_argument("make_quadratic_bilevel: empty target");
    const double s = 1.0 + gamma;

    BilevelInstance inst;
    inst.name = "quadratic";
    inst.omega = omega ? *omega : Box::whole(n);
    require_dim(inst.omega.dim(), n, "make_quadratic_bilevel: Ω");

    auto& in = inst.inner;
    in.dim_u = in.dim_x = in.dim_w = n;
    in.affine_in_u = true;
    in.residual = [s](const Vector& u, const Vector& x) -> Vector { return s * u - x; };
    in.d_u = [s, n](const Vector&, const Vector&) -> Matrix { return s * Matrix::Identity(n, n); };
    in.d_x = [n](const Vector&, const Vector&) -> Matrix { return -Matrix::Identity(n, n); };

    inst.J = [target](const Vector& u) { return 0.5 * (u - target).squaredNorm(); };
    inst.J_prime = [target](const Vector& u) -> Vector { return u - target; };
    inst.J_prime_lipschitz = 1.0;
    inst.F = [target, s](const Vector& x) { return 0.5 * (x / s - target).squaredNorm(); };
    inst.F_prime = [target, s](const Vector& x) -> Vector { return (x / s - target) / s; };
    inst.x_star = Vector(s * target);

    FbInnerStructure fb;
    fb.grad_f = [](const Vector& u, const Vector& x) -> Vector { return u - x; };
    fb.g = [gamma](const Vector&) { return ProxFunction::quadratic(gamma); };
    fb.lipschitz_f = 1.0;
    fb.gamma_g = gamma;
    inst.fb = fb;

    auto corner_sup = [target, s](const Box& box) {
        if (!box.bounded()) return kInf;
        double m = 0.0;
        for (const auto& c : box.corners()) m = std::max(m, (c / s - target).norm());
        return m;
    };
    AnalyticData a;
    a.L_s = 1.0 / s;
    a.N_Ainv = 1.0 / s;
    a.L_Sw = 1.0 / (s * s);
    a.L_Sp = 0.0;
    a.N_Sup = 1.0 / s;
    a.L_Tx_u = 0.0;
    a.M_Tx_at_S = 1.0;
    a.N_Sw = [corner_sup, s](const Box& b) { return corner_sup(b) / s; };
    a.N_Jp_at_S = corner_sup;
    a.F_lipschitz = 1.0 / (s * s);
    a.F_monotone = 1.0 / (s * s);
    inst.analytic = a;
    return inst;
}

/// Saddle-form inner problem solved by inner PDPS: u=(z,y), T=(z−x+y, y−z), J(u)=½‖z−target‖².
inline BilevelInstance make_saddle_bilevel(const Vector& target, std::optional<Box> omega = {})
{
    const Index n = target.size();
    if (n == 0) throw std::invalid_argument("make_saddle_bilevel: empty target");
    BilevelInstance inst;
    inst.name = "saddle";
    inst.omega = omega ? *omega : Box(Vector::Constant(n, -10.0), Vector::Constant(n, 10.0));
    require_dim(inst.omega.dim(), n, "make_saddle_bilevel: Ω");

    const Matrix I = Matrix::Identity(n, n);
    auto& in = inst.inner;
    in.dim_u = in.dim_w = 2 * n;
    in.dim_x = n;
    in.affine_in_u = true;
    in.residual = [n](const Vector& u, const Vector& x) -> Vector {
        Vector r(2 * n);
        r.head(n) = u.head(n) - x + u.tail(n);
        r.tail(n) = u.tail(n) - u.head(n);
        return r;
    };
    in.d_u = [I, n](const Vector&, const Vector&) -> Matrix {
        Matrix d(2 * n, 2 * n);
        d << I, I, -I, I;
        return d;
    };
    in.d_x = [I, n](const Vector&, const Vector&) -> Matrix {
        Matrix d = Matrix::Zero(2 * n, n);
        d.topRows(n) = -I;
        return d;
    };
    inst.J = [target, n](const Vector& u) { return 0.5 * (u.head(n) - target).squaredNorm(); };
    inst.J_prime = [target, n](const Vector& u) -> Vector {
        Vector g = Vector::Zero(2 * n);
        g.head(n) = u.head(n) - target;
        return g;
    };
    inst.J_prime_lipschitz = 1.0;
    inst.F = [target](const Vector& x) { return 0.5 * (x / 2.0 - target).squaredNorm(); };
    inst.F_prime = [target](const Vector& x) -> Vector { return (x / 2.0 - target) / 2.0; };
    inst.x_star = Vector(2.0 * target);

    PdpsInnerStructure pd;
    pd.K = I;
    pd.f = [](const Vector& x) { return ProxFunction::quadratic(1.0, x); };
    pd.g = [](const Vector&) { return ProxFunction::quadratic(1.0); };
    inst.pdps = pd;
    return inst;
}

/// A(x) = (1+x₁)·tridiag(−1,2,−1) + x₂·I, b(x) = b₀ + x₁b₁, J(u)=½‖u−u_ref‖² with u_ref = S_u(x_ref).
inline BilevelInstance make_parametric_poisson(Index n, std::optional<Box> coeff_box = {},
                                               std::optional<Vector> x_ref = {})
{
    if (n < 4) throw std::invalid_argument("make_parametric_poisson: n must be at least 4");
    Box box = coeff_box ? *coeff_box : Box((Vector(2) << 0.0, 2.0).finished(), (Vector(2) << 1.0, 4.0).finished());
    require_dim(box.dim(), 2, "make_parametric_poisson: coefficient box");
    if (!box.bounded()) throw std::invalid_argument("make_parametric_poisson: coefficient box must be bounded");
    if (!(box.lo(0) > -1.0) || !(box.lo(1) > 0.0))
        throw std::invalid_argument(
            "make_parametric_poisson: coefficient box permits singular or non-dominant A(x) (need x1 > -1, x2 > 0)");

    Matrix L = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i) {
        L(i, i) = 2.0;
        if (i > 0) L(i, i - 1) = -1.0;
        if (i + 1 < n) L(i, i + 1) = -1.0;
    }
    ParametricLinearSystem sys;
    sys.A0 = L;
    sys.A_terms = {L, Matrix::Identity(n, n)};
    sys.b0 = Vector(n);
    for (Index i = 0; i < n; ++i)
        sys.b0(i) = 1.0 + 0.5 * std::sin(M_PI * static_cast<double>(i + 1) / static_cast<double>(n + 1));
    sys.b_terms = {Vector::Zero(n), Vector::Constant(n, 2.0)};

    Vector xr = x_ref ? *x_ref : box.center();
    require_dim(xr.size(), 2, "make_parametric_poisson: x_ref");
    if (!box.contains(xr)) throw std::invalid_argument("make_parametric_poisson: x_ref outside the box");
    Vector u_ref = detail::lu_solve(sys.A(xr), sys.b(xr), "make_parametric_poisson");

    BilevelInstance inst;
    inst.name = "poisson";
    inst.omega = box;
    inst.inner = sys.as_inner_problem();
    inst.linear = sys;
    inst.J = [u_ref](const Vector& u) { return 0.5 * (u - u_ref).squaredNorm(); };
    inst.J_prime = [u_ref](const Vector& u) -> Vector { return u - u_ref; };
    inst.J_prime_lipschitz = 1.0;
    inst.x_star = xr;
    return inst;
}

} // namespace tracksplit

namespace tracksplit {

/// Corners of Ω (when few enough) followed by `count` seeded uniform samples.
inline std::vector<Vector> omega_samples(const Box& omega, int count, std::uint64_t seed)
{
    if (!omega.bounded()) throw std::domain_error("omega_samples: Ω must be bounded for empirical constants");
    std::vector<Vector> pts;
    if (omega.dim() <= 10) pts = omega.corners();
    std::mt19937_64 rng(seed);
    for (int i = 0; i < count; ++i) pts.push_back(omega.sample(rng));
    return pts;
}

} // namespace tracksplit
