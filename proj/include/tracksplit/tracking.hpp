#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "tracksplit/core.hpp"
#include "tracksplit/operator_core.hpp"

namespace tracksplit {

/// (κ_u, κ_w, π_u, π_w, μ_u, α_u, α_w) for a fixed choice of d_U, d_W, λ and d_{X*}.
struct TrackingConstants {
    double kappa_u = 2.0;
    double kappa_w = 2.0;
    double pi_u = 1.0;
    double pi_w = 1.0;
    double mu_u = 1.0;
    double alpha_u = 0.0;
    double alpha_w = 0.0;

    double kappa() const { return std::min(kappa_u, kappa_w); }
    double kappa_bar() const { return std::max(kappa_u, kappa_w); }

    void validate() const
    {
        auto bad = [](const char* what) { throw std::invalid_argument(std::string("TrackingConstants: ") + what); };
        for (double v : {kappa_u, kappa_w, pi_u, pi_w, mu_u, alpha_u, alpha_w})
            if (!std::isfinite(v)) bad("all constants must be finite");
        if (!(kappa_u > 1.0) || !(kappa_w > 1.0)) bad("kappa_u and kappa_w must exceed 1");
        if (!(pi_u > 0.0) || !(pi_w > 0.0) || !(mu_u > 0.0)) bad("pi_u, pi_w, mu_u must be positive");
        if (alpha_u < 0.0 || alpha_w < 0.0) bad("alpha_u, alpha_w must be nonnegative");
    }

    /// Constants for λ = ‖·‖_Λ and d_{X*} = ‖·‖_{D⁻¹}, given Euclidean ones and the smallest eigenvalues of Λ and D.
    TrackingConstants rescaled(double lambda_min_Lambda, double lambda_min_D) const
    {
        if (!(lambda_min_Lambda > 0.0) || !(lambda_min_D > 0.0))
            throw std::invalid_argument("TrackingConstants::rescaled: metrics must be positive definite");
        TrackingConstants c = *this;
        c.pi_u /= std::sqrt(lambda_min_Lambda);
        c.pi_w /= std::sqrt(lambda_min_Lambda);
        c.alpha_u /= std::sqrt(lambda_min_D);
        c.alpha_w /= std::sqrt(lambda_min_D);
        return c;
    }

    std::string describe() const
    {
        std::ostringstream os;
        os.precision(6);
        os << "kappa_u=" << kappa_u << " kappa_w=" << kappa_w << " pi_u=" << pi_u << " pi_w=" << pi_w
           << " mu_u=" << mu_u << " alpha_u=" << alpha_u << " alpha_w=" << alpha_w;
        return os.str();
    }
};

/// ι_k = Σ_{m=1}^{k} κ_u^{−m} κ_w^{−(k+1−m)}, with ι_0 = 0.
inline double iota(long k, double kappa_u, double kappa_w)
{
    if (!(kappa_u > 1.0) || !(kappa_w > 1.0)) throw std::invalid_argument("iota: kappas must exceed 1");
    if (k < 0) throw std::invalid_argument("iota: k must be nonnegative");
    double s = 0.0;
    for (long m = 1; m <= k; ++m)
        s += std::pow(kappa_u, -static_cast<double>(m)) * std::pow(kappa_w, -static_cast<double>(k + 1 - m));
    return s;
}

inline double psi(long j, const TrackingConstants& c)
{
    const double dj = static_cast<double>(j);
    double io = iota(j, c.kappa_u, c.kappa_w);
    double a = c.alpha_u == 0.0 ? 0.0 : c.alpha_u * std::pow(c.kappa_u, -dj) * c.pi_u;
    double b = c.alpha_w == 0.0 ? 0.0 : c.alpha_w * (io * c.mu_u * c.pi_u + std::pow(c.kappa_w, -dj) * c.pi_w);
    return a + b;
}

/// Closed-form upper bound on θ(p).
inline double theta_bound(double p, const TrackingConstants& c)
{
    const double k = c.kappa(), kb = c.kappa_bar();
    if (!(p > 0.0) || !(p < k)) throw std::invalid_argument("theta_bound: need 0 < p < kappa");
    return (c.alpha_u * c.pi_u + c.alpha_w * c.pi_w) * k * kb / (p * (k - p)) +
           c.alpha_w * c.mu_u * c.pi_u * kb / ((k - p) * (k - p));
}

/// θ(p) = (κ̄/p) Σ_j p^j ψ_j, truncated once the tail bound drops below tol·(partial sum + 1).
inline double theta(double p, const TrackingConstants& c, double tol = 1e-12)
{
    const double k = c.kappa(), kb = c.kappa_bar();
    if (!(p > 0.0) || !(p < k)) throw std::invalid_argument("theta: need 0 < p < kappa");
    if (c.alpha_u == 0.0 && c.alpha_w == 0.0) return 0.0;
    const double r = p / k;
    const double A = c.alpha_u * c.pi_u + c.alpha_w * c.pi_w;
    const double B = c.alpha_w * c.mu_u * c.pi_u / k;
    // Scaled terms (p/κ_u)^j, (p/κ_w)^j and p^j ι_j, so nothing overflows when p is close to κ.
    double sum = 0.0, pio = 0.0;
    const double ru = p / c.kappa_u, rw = p / c.kappa_w;
    double u_pow = 1.0, w_pow = 1.0;
    for (long j = 0; j < 100000000L; ++j) {
        sum += c.alpha_u * u_pow * c.pi_u + c.alpha_w * (pio * c.mu_u * c.pi_u + w_pow * c.pi_w);
        // Tail over indices ≥ j+1.
        const double J = static_cast<double>(j + 1);
        const double rJ = std::pow(r, J);
        const double tail = A * rJ / (1.0 - r) + B * rJ * (J * (1.0 - r) + r) / ((1.0 - r) * (1.0 - r));
        if (tail < tol * (sum + 1.0)) return kb / p * sum;
        pio = rw * (u_pow / c.kappa_u + pio);
        u_pow *= ru;
        w_pow *= rw;
    }
    throw ConvergenceError("theta: series did not reach tolerance");
}

/**
 * @brief Right-hand side of the generic recursion bound on α_u b_{k+1} + α_w c_{k+1}.
 *
 * `d` holds d_1, …, d_k (d[j] = d_{j+1}).
 */
inline double recursion_bound(long k, double alpha_u, double alpha_w, const TrackingConstants& c, double b1,
                              double c1, const std::vector<double>& d)
{
    if (b1 < 0.0 || c1 < 0.0) throw std::invalid_argument("recursion_bound: b1, c1 must be nonnegative");
    if (static_cast<long>(d.size()) < k) throw std::invalid_argument("recursion_bound: d history too short");
    const double dk = static_cast<double>(k);
    double r = (alpha_u * std::pow(c.kappa_u, -dk) + alpha_w * iota(k, c.kappa_u, c.kappa_w) * c.mu_u) * b1 +
               alpha_w * std::pow(c.kappa_w, -dk) * c1;
    for (long j = 0; j < k; ++j) {
        if (d[j] < 0.0) throw std::invalid_argument("recursion_bound: d must be nonnegative");
        const double e = static_cast<double>(k - j);
        r += (alpha_u * std::pow(c.kappa_u, -e) * c.pi_u +
              alpha_w * (iota(k - j, c.kappa_u, c.kappa_w) * c.mu_u * c.pi_u + std::pow(c.kappa_w, -e) * c.pi_w)) *
             d[j];
    }
    return r;
}

/**
 * @brief Running ledger of e_{p,k} and e_lip^k for one run.
 *
 * Holds b₁ = d_U(u¹, S_u(x⁰)), c₁ = d_W(w¹, S_w(x⁰)) and the histories λ²(x^{j+1}, x^j), d_X²(x^{j+1}, x^j).
 * `printed_elip` switches the third e_lip term to d_X² instead of λ².
 */
class ErrorLedger {
public:
    ErrorLedger() = default;

    ErrorLedger(const TrackingConstants& c, double p, double b1, double c1, bool printed_elip = false)
        : c_(c), p_(p), b1_(b1), c1_(c1), printed_elip_(printed_elip)
    {
        c.validate();
        if (!(p >= 1.0) || !(p < c.kappa())) throw std::invalid_argument("ErrorLedger: need 1 <= p < kappa");
        if (b1 < 0.0 || c1 < 0.0) throw std::invalid_argument("ErrorLedger: initial distances must be nonnegative");
        theta_ = tracksplit::theta(p, c);
        theta1_ = tracksplit::theta(1.0, c);
    }

    const TrackingConstants& constants() const { return c_; }
    double p() const { return p_; }
    double theta() const { return theta_; }
    double theta1() const { return theta1_; }
    double b1() const { return b1_; }
    double c1() const { return c1_; }
    std::size_t steps() const { return lambda_sq_.size(); }
    const std::vector<double>& lambda_sq_history() const { return lambda_sq_; }

    /// Appends λ²(x^{j+1}, x^j) and d_X²(x^{j+1}, x^j) for the next j.
    void push_step(double lambda_sq, double dX_sq)
    {
        require_finite(lambda_sq, "ErrorLedger::push_step");
        lambda_sq_.push_back(lambda_sq);
        dX_sq_.push_back(dX_sq);
    }

    double psi_cached(long j) const
    {
        while (static_cast<long>(psi_.size()) <= j) psi_.push_back(tracksplit::psi(static_cast<long>(psi_.size()), c_));
        return psi_[j];
    }

    /// e_{p,k}(x) with λ²(x, x^k) supplied; needs λ² history through j = k−1.
    double e_pk(long k, double lambda_sq_x_xk) const
    {
        require_history(k);
        return head_terms(k, theta_, p_) + tail_sum(k, theta_, p_, false) - theta_ * theta_ * lambda_sq_x_xk;
    }

    double e_lip(long k) const
    {
        require_history(k);
        return head_terms(k, theta1_, 1.0) + tail_sum(k, theta1_, 1.0, printed_elip_);
    }

    /// Closed-form bound on Σ_{k<N} p^k e_{p,k}(x^{k+1}).
    double error_sum_bound() const { return init_sum_bound(theta_); }

    /// Bound on Σ_{k<N} e_lip^k using the first N−1 λ² entries.
    double lipschitz_sum_bound(long N) const
    {
        double s = 0.0;
        for (long j = 0; j + 1 < N && j < static_cast<long>(lambda_sq_.size()); ++j)
            s += printed_elip_ ? dX_sq_[j] : lambda_sq_[j];
        return init_sum_bound(theta1_) + theta1_ * theta1_ / c_.kappa_bar() * s;
    }

private:
    void require_history(long k) const
    {
        if (k < 0 || static_cast<long>(lambda_sq_.size()) < k)
            throw std::invalid_argument("ErrorLedger: missing history for step " + std::to_string(k));
    }

    double head_terms(long k, double th, double p) const
    {
        const double dk = static_cast<double>(k), pk = std::pow(p, dk);
        double t1 = th * (c_.alpha_u * std::pow(c_.kappa_u, -dk) + c_.alpha_w * iota(k, c_.kappa_u, c_.kappa_w) * c_.mu_u) /
                    (c_.pi_u * pk) * b1_ * b1_;
        double t2 = th * c_.alpha_w * std::pow(c_.kappa_w, -dk) / (c_.pi_w * pk) * c1_ * c1_;
        return t1 + t2;
    }

    double tail_sum(long k, double th, double p, bool use_dX) const
    {
        double s = 0.0;
        for (long j = 0; j < k; ++j) {
            double v = use_dX ? dX_sq_[j] : lambda_sq_[j];
            s += th * psi_cached(k - j) / std::pow(p, static_cast<double>(k - j)) * v;
        }
        return s;
    }

    double init_sum_bound(double th) const
    {
        const double k = c_.kappa();
        return b1_ * b1_ / c_.pi_u * (th * c_.alpha_u * k / (k - 1.0) + th * c_.alpha_w * c_.mu_u / ((k - 1.0) * (k - 1.0))) +
               c1_ * c1_ / c_.pi_w * (th * c_.alpha_w * k / (k - 1.0));
    }

    TrackingConstants c_;
    double p_ = 1.0;
    double b1_ = 0.0;
    double c1_ = 0.0;
    bool printed_elip_ = false;
    double theta_ = 0.0;
    double theta1_ = 0.0;
    std::vector<double> lambda_sq_;
    std::vector<double> dX_sq_;
    mutable std::vector<double> psi_;
};

/// e_{p,k}(x) with λ = ‖·‖_Λ.
inline double e_pk(long k, const Vector& x, const ErrorLedger& ledger, const Vector& x_k, const SymOperator& Lambda)
{
    return ledger.e_pk(k, seminorm_sq(Lambda, x - x_k));
}

inline double e_lip(long k, const ErrorLedger& ledger) { return ledger.e_lip(k); }

/// RHS − LHS of d²_{X*}(∇̃F(x^k), F'(x^k)) ≤ θ²λ²(x, x^k) + e_{p,k}(x); d_{X*} = ‖·‖_{D⁻¹}.
inline double gradient_error_check(long k, const ErrorLedger& ledger, const Vector& estimate, const Vector& exact,
                                   const SymOperator& dual_metric, const Vector& x, const Vector& x_k,
                                   const SymOperator& Lambda)
{
    double lsq = seminorm_sq(Lambda, x - x_k);
    double lhs = std::pow(dual_seminorm(dual_metric, estimate - exact), 2);
    double rhs = ledger.theta() * ledger.theta() * lsq + ledger.e_pk(k, lsq);
    return rhs - lhs;
}

struct DescentWithErrorReport {
    double slack = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
};

/**
 * @brief ⟨∇̃F(x^k) − F'(x^k), x − x̄⟩ ≥ −(γ̃/2)d_X²(x, x̄) − (θ²/2γ̃)λ²(x, x^k) − e_{p,k}(x)/(2γ̃).
 *
 * d_X = ‖·‖_D, λ = ‖·‖_Λ.
 */
inline DescentWithErrorReport descent_with_error_check(long k, const ErrorLedger& ledger, const Vector& estimate,
                                                       const Vector& exact, const Vector& x, const Vector& xbar,
                                                       const Vector& x_k, double gamma_tilde, const SymOperator& d_X,
                                                       const SymOperator& Lambda)
{
    if (!(gamma_tilde > 0.0)) throw std::invalid_argument("descent_with_error_check: gamma_tilde must be positive");
    double lsq = seminorm_sq(Lambda, x - x_k);
    DescentWithErrorReport r;
    r.lhs = (estimate - exact).dot(x - xbar);
    r.rhs = -0.5 * gamma_tilde * seminorm_sq(d_X, x - xbar) -
            ledger.theta() * ledger.theta() / (2.0 * gamma_tilde) * lsq - ledger.e_pk(k, lsq) / (2.0 * gamma_tilde);
    r.slack = r.lhs - r.rhs;
    return r;
}

/// Slack of the inexact descent inequality at (x, x^k); λ² = ‖x − x^k‖²_Λ with the Lipschitz factor inside Λ.
inline double inexact_descent_slack(double F_x, double F_xk, const Vector& estimate, const Vector& x, const Vector& x_k,
                                    double theta, double gamma_tilde, double lambda_sq, double dX_sq, double e)
{
    double lhs = estimate.dot(x - x_k);
    double rhs = F_x - F_xk - 0.5 * (theta * theta / gamma_tilde) * lambda_sq - 0.5 * lambda_sq -
                 0.5 * gamma_tilde * dX_sq - e / (2.0 * gamma_tilde);
    return lhs - rhs;
}

/// Slack of the inexact three-point descent inequality with strong-convexity factor β on d_X².
inline double inexact_three_point_slack(double F_x, double F_xbar, const Vector& estimate, const Vector& x,
                                        const Vector& xbar, double beta, double theta, double gamma_tilde,
                                        double lambda_sq, double dX_sq_x_xbar, double e)
{
    double lhs = estimate.dot(x - xbar);
    double rhs = F_x - F_xbar + 0.5 * (beta - gamma_tilde) * dX_sq_x_xbar -
                 0.5 * (theta * theta / gamma_tilde + 1.0) * lambda_sq - e / (2.0 * gamma_tilde);
    return lhs - rhs;
}

/// RHS − LHS of ½d²(∇̃F(x^k), x*) ≤ ((1+ϑ)/2)d²(F'(x^k), x*) + ((1+ϑ⁻¹)/2)e_lip^k.
inline double lipschitz_with_error_check(long k, const ErrorLedger& ledger, const Vector& estimate,
                                         const Vector& exact_at_xk, const Vector& target, double vartheta,
                                         const SymOperator& dual_metric, double elip_factor = 1.0)
{
    if (!(vartheta > 0.0)) throw std::invalid_argument("lipschitz_with_error_check: vartheta must be positive");
    double lhs = 0.5 * std::pow(dual_seminorm(dual_metric, estimate - target), 2);
    double rhs = 0.5 * (1.0 + vartheta) * std::pow(dual_seminorm(dual_metric, exact_at_xk - target), 2) +
                 0.5 * (1.0 + 1.0 / vartheta) * elip_factor * ledger.e_lip(k);
    return rhs - lhs;
}

} // namespace tracksplit
