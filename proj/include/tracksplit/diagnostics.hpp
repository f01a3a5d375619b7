#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "tracksplit/core.hpp"
#include "tracksplit/operator_core.hpp"
#include "tracksplit/prox.hpp"
#include "tracksplit/trace.hpp"

namespace tracksplit {

/// Result of one checkable inequality; `slacks` are normalized by (1 + largest term magnitude).
struct CheckReport {
    std::string name;
    std::string citation;
    std::vector<double> slacks;
    double min_slack = kInf;
    long worst_index = -1;
    double tolerance = 1e-9;
    bool pass = true;
    std::uint64_t seed = 0;
    std::string note;

    void add(double raw_slack, double magnitude)
    {
        double s = raw_slack / (1.0 + std::abs(magnitude));
        if (std::isnan(s)) s = -kInf;
        slacks.push_back(s);
        if (s < min_slack) {
            min_slack = s;
            worst_index = static_cast<long>(slacks.size()) - 1;
        }
        pass = min_slack >= -tolerance;
    }

    void merge(const CheckReport& other)
    {
        for (double s : other.slacks) add(s, 0.0);
    }
};

namespace detail {
inline double max_abs(std::initializer_list<double> xs)
{
    double m = 0.0;
    for (double x : xs) m = std::max(m, std::abs(x));
    return m;
}
} // namespace detail

/// 𝒢(x; x̄) = [F+G](x) − [F+G](x̄) − ⟨Ξx, x̄⟩ given the two values of F+G.
inline double lagrangian_gap(double FG_x, double FG_xbar, const SkewOperator& Xi, const Vector& x, const Vector& xbar)
{
    if (std::isinf(FG_x) && FG_x > 0) return kInf;
    if (std::isnan(FG_x) || std::isnan(FG_xbar) || std::isinf(FG_xbar))
        throw std::domain_error("lagrangian_gap: function values must be finite at x̄");
    return FG_x - FG_xbar - Xi.apply(x).dot(xbar);
}

struct DescentReports {
    CheckReport descent;
    CheckReport quasi_monotone;
};

/**
 * @brief ⟨q̃^{k+1}, x^{k+1}−x^k⟩ ≥ 𝒢(x^{k+1};x^k) − ½‖x^{k+1}−x^k‖²_Λ̆ − errDesc^k per row,
 * and 𝒢(x^{k+1};x^k) + η‖x^{k+1}−x^k‖²_M ≤ errDesc^k.
 */
inline DescentReports descent_check(const IterateTrace& tr, const SymOperator& Lambda_breve, double eta,
                                    double tol = 1e-9)
{
    if (tr.empty()) throw std::invalid_argument("descent_check: empty trace");
    DescentReports r;
    r.descent.name = "descent";
    r.descent.citation = "outer descent inequality with errDesc";
    r.quasi_monotone.name = "quasi_monotone";
    r.quasi_monotone.citation = "quasi-monotonicity of the Lagrangian gap";
    r.descent.tolerance = r.quasi_monotone.tolerance = tol;
    for (const auto& row : tr.rows) {
        if (row.q_tilde.size() == 0) throw std::invalid_argument("descent_check: missing q̃ in trace");
        const Vector d = row.x_next - row.x;
        const double lhs = row.q_tilde.dot(d);
        const double lb = 0.5 * seminorm_sq(Lambda_breve, d);
        r.descent.add(lhs - row.gap + lb + row.err_desc, detail::max_abs({lhs, row.gap, lb, row.err_desc}));
        const double dm = eta * seminorm_sq(tr.M, d);
        r.quasi_monotone.add(row.err_desc - row.gap - dm, detail::max_abs({row.gap, dm, row.err_desc}));
    }
    return r;
}

/// (p/2)‖x^{k+1}−x̄‖²_M ≤ ½‖x^k−x̄‖²_M + e^k, plus x^k ∈ 𝕆_M(x̄, δ) when δ is given.
inline CheckReport quasi_fejer_check(const IterateTrace& tr, const Vector& xbar, double p, const std::vector<double>& err,
                                     std::optional<double> delta = {}, double tol = 1e-9)
{
    if (tr.empty()) throw std::invalid_argument("quasi_fejer_check: empty trace");
    if (err.size() < tr.rows.size()) throw std::invalid_argument("quasi_fejer_check: error series too short");
    CheckReport r;
    r.name = "quasi_fejer";
    r.citation = "p-strong quasi-Fejer monotonicity (non-escape lemma)";
    r.tolerance = tol;
    for (std::size_t k = 0; k < tr.rows.size(); ++k) {
        const auto& row = tr.rows[k];
        const double a = 0.5 * seminorm_sq(tr.M, row.x - xbar);
        const double b = 0.5 * p * seminorm_sq(tr.M, row.x_next - xbar);
        r.add(a + err[k] - b, detail::max_abs({a, b, err[k]}));
        if (delta) {
            const double d = seminorm(tr.M, row.x_next - xbar);
            if (!(d < *delta)) {
                r.add(*delta - d, *delta);
                r.note = "iterate outside the non-escape ball at k=" + std::to_string(k);
            }
        }
    }
    return r;
}

/// Partial sums Σ_{k<N} p^{k−N} e^k for N = 1..len; their maximum is the budget-bounded r_p.
inline std::vector<double> r_p_partial_sums(const std::vector<double>& err, double p)
{
    if (!(p >= 1.0)) throw std::invalid_argument("r_p_partial_sums: p must be >= 1");
    std::vector<double> out;
    double s = 0.0;
    for (double e : err) {
        s = (s + e) / p;
        out.push_back(s);
    }
    return out;
}

/// ‖F'(x^{k+1}) − ∇̃F(x^k) − M(x^{k+1}−x^k) − mismatch‖, the norm of an element of H(x^{k+1}).
inline double subdiff_residual(const TraceRow& row, const std::function<Vector(const Vector&)>& F_prime,
                               const SymOperator& M)
{
    if (row.dG.size() == 0) throw std::invalid_argument("subdiff_residual: trace row lacks the recorded ∂G element");
    Vector mm = row.mismatch.size() ? row.mismatch : Vector::Zero(row.x.size());
    return (F_prime(row.x_next) - row.grad_estimate - M.matrix() * (row.x_next - row.x) - mm).norm();
}

struct RateFit {
    double p_est = kNaN;
    bool converged_exactly = false;
    std::string status;
};

/// Least-squares slope of log d_k over the trailing window; p_est = exp(−slope).
inline RateFit linear_rate_fit(const std::vector<double>& dist_sq, std::size_t window)
{
    if (window < 1 || dist_sq.size() < window + 1) throw std::invalid_argument("linear_rate_fit: need window+1 values");
    RateFit f;
    const std::size_t start = dist_sq.size() - window - 1;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(window + 1);
    for (std::size_t i = start; i < dist_sq.size(); ++i) {
        if (!(dist_sq[i] > 0.0)) {
            f.converged_exactly = true;
            f.status = "converged-exactly";
            return f;
        }
        double x = static_cast<double>(i - start), y = std::log(dist_sq[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    f.p_est = std::exp(-slope);
    f.status = "ok";
    return f;
}

/// Series ‖x^k−x̄‖²_M for k = 0..N.
inline std::vector<double> distance_series(const IterateTrace& tr, const Vector& xbar)
{
    std::vector<double> d;
    d.push_back(seminorm_sq(tr.M, tr.x0 - xbar));
    for (const auto& row : tr.rows) d.push_back(seminorm_sq(tr.M, row.x_next - xbar));
    return d;
}

inline RateFit linear_rate_fit(const IterateTrace& tr, const Vector& xbar, std::size_t window)
{
    return linear_rate_fit(distance_series(tr, xbar), window);
}

struct ErgodicPoint {
    long N = 0;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct ErgodicReport {
    std::vector<ErgodicPoint> points;
    double sup_ball = 0.0;
    bool holds = true;
    long first_violation = -1;
};

/**
 * @brief Primal value gap at the ergodic z̃^N = (1/N)Σ_{k=1}^N z^k against
 * sup_{ŷ ∈ Dom h_*} ‖(z⁰,y⁰)−(z̄,ŷ)‖²_M/(2N) + Σ_{k<N} e_{1,k}/(2γ̃λN).
 *
 * `primal` evaluates f + g + h∘K; the supremum is attained at a vertex of the box Dom h_*.
 */
inline ErgodicReport ergodic_values(const IterateTrace& tr, const std::function<double(const Vector&)>& primal,
                                    const Vector& zbar, const ProxFunction& h_star, bool f_convex,
                                    const std::vector<double>& e1 = {}, double gamma_tilde = 1.0, double lambda = 1.0)
{
    if (!f_convex) throw std::invalid_argument("ergodic_values: requires convex f");
    if (tr.empty()) throw std::invalid_argument("ergodic_values: empty trace");
    const Index nz = zbar.size();
    const Index ny = tr.x0.size() - nz;
    if (!h_star.bounded_domain(ny)) throw std::invalid_argument("ergodic_values: Dom h_* must be bounded");
    ErgodicReport r;
    for (const Vector& yv : h_star.domain_vertices(ny)) {
        Vector xb(nz + ny);
        xb << zbar, yv;
        r.sup_ball = std::max(r.sup_ball, seminorm_sq(tr.M, tr.x0 - xb));
    }
    const double Pbar = primal(zbar);
    Vector zsum = Vector::Zero(nz);
    double esum = 0.0;
    for (std::size_t k = 0; k < tr.rows.size(); ++k) {
        zsum += tr.rows[k].x_next.head(nz);
        if (k < e1.size()) esum += e1[k];
        const double N = static_cast<double>(k + 1);
        ErgodicPoint pt;
        pt.N = static_cast<long>(k + 1);
        pt.lhs = primal(zsum / N) - Pbar;
        pt.rhs = r.sup_ball / (2.0 * N) + (esum != 0.0 ? esum / (2.0 * gamma_tilde * lambda * N) : 0.0);
        if (pt.lhs > pt.rhs + 1e-9 && r.holds) {
            r.holds = false;
            r.first_violation = pt.N;
        }
        r.points.push_back(pt);
    }
    return r;
}

using ScalarFn = std::function<double(const Vector&)>;
using VectorFn = std::function<Vector(const Vector&)>;

/// F(x) − F(z) − ⟨DF(z), x−z⟩ ≤ ½‖z−x‖²_Λ over sampled (x, z).
inline CheckReport check_descent_lemma(const ScalarFn& F, const VectorFn& DF, const SymOperator& Lambda,
                                       const std::vector<std::pair<Vector, Vector>>& pairs, std::uint64_t seed = 0,
                                       double tol = 1e-9)
{
    CheckReport r;
    r.name = "descent_lemma";
    r.citation = "descent inequality for a Lambda-firmly Lipschitz derivative";
    r.tolerance = tol;
    r.seed = seed;
    for (const auto& [x, z] : pairs) {
        const double fx = F(x), fz = F(z), lin = DF(z).dot(x - z), q = 0.5 * seminorm_sq(Lambda, z - x);
        r.add(q - (fx - fz - lin), detail::max_abs({fx, fz, lin, q}));
    }
    return r;
}

struct Triple {
    Vector z;
    Vector x;
    Vector xbar;
};

/// ⟨DF(z), x−x̄⟩ ≥ F(x)−F(x̄) + ½q_{Γ−β|Γ|}(x−x̄) − ½q_{Λ+β⁻¹|Γ|−Γ}(x−z).
inline CheckReport check_three_point_descent(const ScalarFn& F, const VectorFn& DF, const SymOperator& Lambda,
                                             const SymOperator& Gamma, double beta, const std::vector<Triple>& samples,
                                             std::uint64_t seed = 0, double tol = 1e-9)
{
    if (!(beta > 0.0)) throw std::invalid_argument("check_three_point_descent: beta must be positive");
    const SymOperator absG = young_companion(Gamma);
    const SymOperator A = Gamma - absG.scaled(beta);
    const SymOperator B = Lambda + absG.scaled(1.0 / beta) - Gamma;
    CheckReport r;
    r.name = "three_point_descent";
    r.citation = "operator-relative three-point descent inequality";
    r.tolerance = tol;
    r.seed = seed;
    for (const auto& t : samples) {
        const double lhs = DF(t.z).dot(t.x - t.xbar);
        const double fx = F(t.x), fb = F(t.xbar);
        const double qa = 0.5 * quad_form(A, t.x - t.xbar), qb = 0.5 * quad_form(B, t.x - t.z);
        r.add(lhs - (fx - fb + qa - qb), detail::max_abs({lhs, fx, fb, qa, qb}));
    }
    return r;
}

/// ⟨DF(z)−DF(x̄), x−x̄⟩ ≥ q_{Γ̃−β|Γ̃|}(x−x̄) − q_{Λ/(2ζ)+β⁻¹|Γ̃|−Γ̃}(x−z) with Γ̃ = Γ − (ζ/2)Λ.
inline CheckReport check_three_point_mono(const VectorFn& DF, const SymOperator& Lambda, const SymOperator& Gamma,
                                          double beta, double zeta, const std::vector<Triple>& samples,
                                          std::uint64_t seed = 0, double tol = 1e-9)
{
    if (!(beta > 0.0) || !(zeta > 0.0)) throw std::invalid_argument("check_three_point_mono: beta, zeta must be positive");
    const SymOperator Gt = Gamma - Lambda.scaled(0.5 * zeta);
    const SymOperator absG = young_companion(Gt);
    const SymOperator A = Gt - absG.scaled(beta);
    const SymOperator B = Lambda.scaled(0.5 / zeta) + absG.scaled(1.0 / beta) - Gt;
    CheckReport r;
    r.name = "three_point_mono";
    r.citation = "operator-relative three-point monotonicity inequality";
    r.tolerance = tol;
    r.seed = seed;
    for (const auto& t : samples) {
        const double lhs = (DF(t.z) - DF(t.xbar)).dot(t.x - t.xbar);
        const double qa = quad_form(A, t.x - t.xbar), qb = quad_form(B, t.x - t.z);
        r.add(lhs - (qa - qb), detail::max_abs({lhs, qa, qb}));
    }
    return r;
}

struct RobbinsReport {
    double limit_estimate = kNaN;
    std::vector<double> d_partial_sums;
    double product_bound = kNaN;
    bool holds = true;
    long violated_index = -1;
};

/// a_{k+1} ≤ a_k(1+b_k) + c_k − d_k for nonnegative sequences.
inline RobbinsReport robbins_check(const std::vector<double>& a, const std::vector<double>& b,
                                   const std::vector<double>& c, const std::vector<double>& d, double tol = 1e-12)
{
    if (a.empty()) throw std::invalid_argument("robbins_check: empty sequence");
    const std::size_t n = a.size() - 1;
    if (b.size() < n || c.size() < n || d.size() < n) throw std::invalid_argument("robbins_check: series too short");
    RobbinsReport r;
    double s = 0.0, prod = 1.0, csum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (a[k] < 0 || b[k] < 0 || c[k] < 0 || d[k] < 0) throw std::invalid_argument("robbins_check: negative term");
        const double rhs = a[k] * (1.0 + b[k]) + c[k] - d[k];
        if (a[k + 1] > rhs + tol * (1.0 + std::abs(rhs)) && r.holds) {
            r.holds = false;
            r.violated_index = static_cast<long>(k);
        }
        s += d[k];
        r.d_partial_sums.push_back(s);
        prod *= 1.0 + b[k];
        csum += c[k];
    }
    r.limit_estimate = a.back();
    r.product_bound = prod * (a.front() + csum);
    return r;
}

} // namespace tracksplit
