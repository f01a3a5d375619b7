#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tracksplit/adjoint_solvers.hpp"
#include "tracksplit/core.hpp"
#include "tracksplit/inner_solvers.hpp"
#include "tracksplit/operator_core.hpp"
#include "tracksplit/problems.hpp"
#include "tracksplit/prox.hpp"
#include "tracksplit/trace.hpp"
#include "tracksplit/tracking.hpp"

namespace tracksplit {

enum class OuterAlgorithm { FB, PDPS, PDPSMismatch };

inline const char* to_string(OuterAlgorithm a)
{
    switch (a) {
    case OuterAlgorithm::FB: return "fb";
    case OuterAlgorithm::PDPS: return "pdps";
    case OuterAlgorithm::PDPSMismatch: return "pdps_mismatch";
    }
    return "?";
}

/// Result of one outer step in implicit form: q̃ = −M(x⁺ − x) and the recorded ∂G element.
struct OuterStep {
    Vector x_next;
    Vector q_tilde;
    Vector dG;
    Vector mismatch;
};

/// x⁺ = prox_{τG}(x − τ·g).
inline OuterStep fb_outer_step(const Vector& x, const Vector& grad_estimate, double tau, const ProxFunction& G)
{
    if (!(tau > 0.0)) throw StepSizeError("fb_outer_step: tau must be positive");
    require_dim(grad_estimate.size(), x.size(), "fb_outer_step: gradient");
    OuterStep s;
    s.x_next = G.prox(tau, x - tau * grad_estimate);
    s.q_tilde = -(s.x_next - x) / tau;
    s.dG = s.q_tilde - grad_estimate;
    s.mismatch = Vector::Zero(x.size());
    return s;
}

struct PdpsStep {
    Vector z;
    Vector y;
    double err_mono = 0.0;
};

inline PdpsStep pdps_outer_step(const Vector& z, const Vector& y, const Vector& grad_estimate_f, double tau,
                                double sigma, const Matrix& K, const ProxFunction& g, const ProxFunction& h_star)
{
    if (!(tau > 0.0) || !(sigma > 0.0)) throw StepSizeError("pdps_outer_step: step sizes must be positive");
    require_dim(z.size(), K.cols(), "pdps_outer_step: z");
    require_dim(y.size(), K.rows(), "pdps_outer_step: y");
    require_dim(grad_estimate_f.size(), z.size(), "pdps_outer_step: gradient");
    PdpsStep s;
    s.z = g.prox(tau, z - tau * grad_estimate_f - tau * K.transpose() * y);
    s.y = h_star.prox(sigma, y + sigma * K * (2.0 * s.z - z));
    return s;
}

/// PDPS with a mismatched adjoint K_adj (Z ← Y) in the primal step; f = 0.
inline PdpsStep mismatched_pdps_step(const Vector& z, const Vector& y, double tau, double sigma, const Matrix& K,
                                     const Matrix& K_adj_mismatched, const ProxFunction& g,
                                     const ProxFunction& h_star)
{
    const double gamma_g = g.strong_convexity();
    if (!(gamma_g > 0.0)) throw std::invalid_argument("mismatched_pdps_step: g must be strongly convex");
    if (!h_star.bounded_domain(y.size())) throw std::invalid_argument("mismatched_pdps_step: Dom h_* must be bounded");
    require_dim(K_adj_mismatched.rows(), K.cols(), "mismatched_pdps_step: mismatched adjoint rows");
    require_dim(K_adj_mismatched.cols(), K.rows(), "mismatched_pdps_step: mismatched adjoint columns");
    if (!(tau > 0.0) || !(sigma > 0.0)) throw StepSizeError("mismatched_pdps_step: step sizes must be positive");
    PdpsStep s;
    s.z = g.prox(tau, z - tau * K_adj_mismatched * y);
    s.y = h_star.prox(sigma, y + sigma * K * (2.0 * s.z - z));
    s.err_mono = ((K_adj_mismatched - K.transpose()) * y).squaredNorm() / (2.0 * gamma_g);
    return s;
}

/// ε = (1/2γ_g)(‖K*≈ − K*‖·diam Dom h_*)².
inline double mismatch_epsilon(const Matrix& K, const Matrix& K_adj_mismatched, double gamma_g, double diam)
{
    double n = spectral_norm(K_adj_mismatched - K.transpose());
    return n * diam * n * diam / (2.0 * gamma_g);
}

/// Outer method configuration. For PDPS the iterate is x = (z, y), M_z = I, M_y = I,
/// and f is F = J∘S_u on z (or 0 with no instance).
struct OuterSpec {
    OuterAlgorithm alg = OuterAlgorithm::FB;
    double tau = 1.0;
    double sigma = 1.0;
    double lambda = 0.0;
    ProxFunction G;
    Matrix K;
    ProxFunction g;
    ProxFunction h_star;
    std::optional<Matrix> K_adj_mismatched;

    bool primal_dual() const { return alg != OuterAlgorithm::FB; }
};

struct RunOptions {
    long budget = 500;
    double tolerance = 1e-8;
    bool presolve = false;
    bool exact = false;
    Vector x0;
    Vector y0;
    std::optional<Vector> xbar;
    /// Metric-scaled tracking constants; enables the e_{p,k}/e_lip ledger.
    std::optional<TrackingConstants> constants;
    std::optional<TransformConstants> transform;
    double p = 1.0;
    double gamma_tilde = 1.0;
    double L = 1.0;
    bool printed_elip = false;
    double region_radius = 0.0;
};

/// The PDPS preconditioner or τ⁻¹I, and the matching skew part.
inline std::pair<SymOperator, SkewOperator> outer_operators(const OuterSpec& o, Index dim_x)
{
    if (!o.primal_dual()) return {SymOperator::identity(dim_x, 1.0 / o.tau), SkewOperator::zero(dim_x)};
    return {pdps_preconditioner(o.tau, o.sigma, SymOperator::identity(o.K.cols()), SymOperator::identity(o.K.rows()), o.K),
            pdps_skew(o.K)};
}

/// Primal metric D on the F-variable: M for FB, M_z for PDPS.
inline SymOperator primal_metric(const OuterSpec& o, Index dim_f)
{
    return SymOperator::identity(dim_f, o.primal_dual() ? 1.0 : 1.0 / o.tau);
}

inline void validate_outer(const OuterSpec& o, Index dim_f)
{
    if (!(o.tau > 0.0)) throw StepSizeError("outer tau must be positive");
    if (!o.primal_dual()) return;
    if (!(o.sigma > 0.0)) throw StepSizeError("outer sigma must be positive");
    require_dim(o.K.cols(), dim_f, "outer K columns");
    const Index nz = o.K.cols(), ny = o.K.rows();
    if (!pdps_step_check(o.tau, o.sigma, o.lambda, SymOperator::identity(nz), SymOperator::identity(ny), o.K,
                         Matrix::Identity(ny, ny)))
        throw StepSizeError("PDPS step length condition fails");
    if (o.alg == OuterAlgorithm::PDPSMismatch) {
        if (!o.K_adj_mismatched) throw std::invalid_argument("mismatch run needs a mismatched adjoint");
        if (!(o.g.strong_convexity() > 0.0)) throw std::invalid_argument("mismatch run needs gamma_g > 0");
        if (!o.h_star.bounded_domain(ny)) throw std::invalid_argument("mismatch run needs a bounded dual domain");
    }
}

namespace detail {

inline double lu_work(Index n)
{
    const double d = static_cast<double>(n);
    return 2.0 / 3.0 * d * d * d + 2.0 * d * d;
}

inline double sweep_work(Index n, Index cols = 1)
{
    const double d = static_cast<double>(n);
    return 2.0 * d * d * static_cast<double>(cols);
}

} // namespace detail

/**
 * @brief Single-loop (or, with `opts.exact`, exact-oracle) run.
 *
 * Per iteration: m inner steps, m adjoint steps, differential transform, outer step, ledger row.
 * `inst` may be null for PDPS runs with f = 0.
 */
inline IterateTrace run_single_loop(const BilevelInstance* inst, const InnerSpec& inner, const AdjointSpec& adjoint,
                                    const OuterSpec& outer, const RunOptions& opts)
{
    const auto t_start = std::chrono::steady_clock::now();
    const bool pd = outer.primal_dual();
    const Index nf = inst ? inst->dim_x() : (pd ? outer.K.cols() : opts.x0.size());
    validate_outer(outer, nf);
    if (outer.alg == OuterAlgorithm::PDPSMismatch && inst)
        throw std::invalid_argument("mismatch runs take f = 0 (no bilevel instance)");
    if (!inst && !pd) throw std::invalid_argument("forward-backward runs need a bilevel instance");
    require_dim(opts.x0.size(), nf, "x0");
    const Index ny = pd ? outer.K.rows() : 0;
    if (pd) require_dim(opts.y0.size(), ny, "y0");
    if (opts.budget < 1) throw std::invalid_argument("budget must be >= 1");

    IterateTrace tr;
    tr.method = std::string(to_string(outer.alg)) + (opts.exact ? "/exact" : "");
    auto [M, Xi] = outer_operators(outer, nf);
    tr.M = M;
    tr.Xi = Xi;
    tr.p = opts.p;
    const SymOperator D = primal_metric(outer, nf);
    const SymOperator Lambda = D.scaled(pd ? opts.L : opts.L * outer.tau);
    const double ledger_div = pd ? outer.lambda : 1.0;

    Vector x(nf + ny);
    x.head(nf) = opts.x0;
    if (pd) x.tail(ny) = opts.y0;
    tr.x0 = x;
    if (opts.xbar) {
        require_dim(opts.xbar->size(), x.size(), "xbar");
        tr.dist0_M = seminorm(M, x - *opts.xbar);
    }

    SolveCounters sc;
    Vector u, w;
    if (inst) {
        if (!inst->omega.contains(opts.x0)) throw std::domain_error("x0 outside Ω");
        if (opts.presolve || opts.exact) {
            u = solve_inner_exact(*inst, opts.x0);
            w = exact_adjoint(*inst, opts.x0, adjoint.variant);
        } else {
            u = Vector::Zero(inner.alg == InnerAlgorithm::PDPS && inst->pdps
                                 ? inst->pdps->K.cols() + inst->pdps->K.rows()
                                 : inst->dim_u());
            w = adjoint.variant == AdjointVariant::Reduced ? Vector::Zero(inst->dim_w())
                                                           : Vector::Zero(inst->dim_u() * inst->dim_x());
        }
    }

    auto F_eval = [&](const Vector& xx) {
        return inst ? objective_value(*inst, xx.head(nf)) : 0.0;
    };
    auto G_eval = [&](const Vector& xx) {
        if (!pd) return outer.G.value(xx);
        return outer.g.value(xx.head(nf)) + outer.h_star.value(xx.tail(ny));
    };
    auto Fprime_full = [&](const Vector& xx) {
        Vector g = Vector::Zero(xx.size());
        if (inst) g.head(nf) = exact_gradient(*inst, xx.head(nf));
        return g;
    };

    std::optional<ErrorLedger> ledger;

    for (long k = 0; k < opts.budget; ++k) {
        TraceRow row;
        row.k = k;
        row.x = x;
        const Vector z = x.head(nf);
        Vector est_f = Vector::Zero(nf);
        if (inst) {
            if (!inst->omega.contains(z)) {
                tr.status = RunStatus::LeftOmega;
                tr.events.push_back("iterate left Omega at k=" + std::to_string(k));
                break;
            }
            row.su = solve_inner_exact(*inst, z);
            row.sw = exact_adjoint(*inst, z, adjoint.variant);
            if (opts.exact) {
                const long lu0 = sc.lu_solves;
                u = solve_inner_exact(*inst, z, &sc);
                w = exact_adjoint(*inst, z, adjoint.variant, &sc);
                tr.counters.exact_inner_solves += 1;
                tr.counters.exact_adjoint_solves += 1;
                tr.counters.work += static_cast<double>(sc.lu_solves - lu0) * detail::lu_work(inst->dim_u());
                est_f = exact_gradient(*inst, z);
            } else {
                u = inner_steps(u, z, inner, *inst);
                w = adjoint_steps(w, u, z, adjoint, *inst);
                tr.counters.inner_steps += inner.steps;
                tr.counters.adjoint_steps += adjoint.steps;
                tr.counters.work += inner.steps * detail::sweep_work(u.size());
                tr.counters.work += adjoint.steps * detail::sweep_work(
                                                        inst->dim_u(), adjoint.variant == AdjointVariant::Reduced
                                                                           ? 1
                                                                           : inst->dim_x());
                Vector u_eval = u.head(inst->dim_u());
                est_f = differential_transform(w, u_eval, z, adjoint.variant, *inst);
            }
            row.u = u;
            row.w = w;
            if (opts.region_radius > 0.0 && (u.head(inst->dim_u()) - row.su).norm() > opts.region_radius)
                tr.events.push_back("inner iterate outside the u-region at k=" + std::to_string(k));
            if (opts.transform && !opts.exact) {
                auto rep = transform_error_bound(u.head(inst->dim_u()), w, z, *inst, *opts.transform);
                if (!rep.holds)
                    tr.events.push_back("differential transform bound violated at k=" + std::to_string(k));
            }
        }
        row.grad_exact = Fprime_full(x);
        row.grad_estimate = Vector::Zero(x.size());
        row.grad_estimate.head(nf) = est_f;

        Vector x_next(x.size());
        double err_mono_mismatch = 0.0;
        row.mismatch = Vector::Zero(x.size());
        if (!pd) {
            OuterStep s = fb_outer_step(x, est_f, outer.tau, outer.G);
            x_next = s.x_next;
        } else if (outer.alg == OuterAlgorithm::PDPS) {
            PdpsStep s = pdps_outer_step(z, x.tail(ny), est_f, outer.tau, outer.sigma, outer.K, outer.g, outer.h_star);
            x_next << s.z, s.y;
        } else {
            PdpsStep s = mismatched_pdps_step(z, x.tail(ny), outer.tau, outer.sigma, outer.K, *outer.K_adj_mismatched,
                                              outer.g, outer.h_star);
            x_next << s.z, s.y;
            err_mono_mismatch = s.err_mono;
            row.mismatch.head(nf) = (*outer.K_adj_mismatched - outer.K.transpose()) * x.tail(ny);
        }
        row.x_next = x_next;
        row.q_tilde = -(M.matrix() * (x_next - x));
        row.dG = row.q_tilde - row.grad_estimate - Xi.apply(x_next) - row.mismatch;

        const Vector dz = x_next.head(nf) - z;
        row.lambda_sq = seminorm_sq(Lambda, dz);
        if (opts.constants && inst && !opts.exact) {
            if (!ledger) {
                const double b1 = (u.head(inst->dim_u()) - row.su).norm();
                const double c1 = (w - row.sw).norm();
                ledger.emplace(*opts.constants, opts.p, b1, c1, opts.printed_elip);
                tr.theta = ledger->theta();
            }
            row.e_pk = ledger->e_pk(k, row.lambda_sq);
            row.e_lip = ledger->e_lip(k);
            ledger->push_step(row.lambda_sq, seminorm_sq(D, dz));
            row.err_desc = pd ? 0.0 : row.e_pk / (2.0 * opts.gamma_tilde);
            row.err_mono = row.e_pk / (2.0 * ledger_div * opts.gamma_tilde);
        }
        if (outer.alg == OuterAlgorithm::PDPSMismatch) row.err_mono = err_mono_mismatch;
        row.grad_error = dual_seminorm(D, est_f - row.grad_exact.head(nf));

        row.step_norm_M = seminorm(M, x_next - x);
        if (opts.xbar) row.dist_to_xbar_M = seminorm(M, x_next - *opts.xbar);
        if (inst && !inst->omega.contains(x_next.head(nf))) {
            row.gap = std::numeric_limits<double>::quiet_NaN();
            row.residual = std::numeric_limits<double>::quiet_NaN();
            tr.rows.push_back(std::move(row));
            x = x_next;
            tr.status = RunStatus::LeftOmega;
            tr.events.push_back("iterate left Omega at k=" + std::to_string(k + 1));
            break;
        }
        row.gap = F_eval(x_next) + G_eval(x_next) - F_eval(x) - G_eval(x) - Xi.apply(x_next).dot(x);
        const Vector Fp_next = Fprime_full(x_next);
        row.residual = (Fp_next - row.grad_estimate - M.matrix() * (x_next - x) - row.mismatch).norm();

        tr.rows.push_back(std::move(row));
        x = x_next;
        if (tr.rows.back().residual < opts.tolerance) {
            tr.status = RunStatus::Converged;
            break;
        }
    }
    if (tr.status != RunStatus::LeftOmega && inst && !inst->omega.contains(x.head(nf))) {
        tr.status = RunStatus::LeftOmega;
        tr.events.push_back("final iterate outside Omega");
    }
    tr.final_x = x;
    tr.counters.lu_solves = sc.lu_solves;
    tr.counters.newton_iterations = sc.newton_iterations;
    tr.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return tr;
}

/// Double-loop comparator: S_u and S_w solved exactly at every outer iteration.
inline IterateTrace run_exact_baseline(const BilevelInstance* inst, const AdjointSpec& adjoint, const OuterSpec& outer,
                                       RunOptions opts)
{
    opts.exact = true;
    opts.constants.reset();
    return run_single_loop(inst, InnerSpec{}, adjoint, outer, opts);
}

enum class Regime { None, SubdifferentialOnly, NonEscape, Linear };

inline const char* to_string(Regime r)
{
    switch (r) {
    case Regime::None: return "none";
    case Regime::SubdifferentialOnly: return "subdifferential-only";
    case Regime::NonEscape: return "non-escape";
    case Regime::Linear: return "linear";
    }
    return "?";
}

struct FbConditionReport {
    double weak_lhs = kNaN;
    bool weak_ok = false;
    double local_lhs = kNaN;
    bool local_ok = false;
    double gamma = kNaN;
    double p_max = 1.0;
    Regime regime = Regime::None;
};

namespace detail {
inline double theta_sq_over(double theta, double gamma_tilde)
{
    if (theta == 0.0) return 0.0;
    return gamma_tilde > 0.0 ? theta * theta / gamma_tilde : kInf;
}
} // namespace detail

/// Step-size conditions of inexact outer forward-backward with M = τ⁻¹I, Λ = LI.
inline FbConditionReport condition_check_inexact_fb(double tau, double L, double theta, double gamma_tilde,
                                                    double beta, double gamma_G, double gamma_F, double eta)
{
    if (!(tau > 0.0) || L < 0.0 || gamma_tilde < 0.0 || !(beta > 0.0) || eta < 0.0 || gamma_G < 0.0)
        throw std::invalid_argument("condition_check_inexact_fb: invalid parameters");
    FbConditionReport r;
    const double tg = detail::theta_sq_over(theta, gamma_tilde);
    r.weak_lhs = gamma_tilde + tau * (1.0 + tg) * L;
    r.weak_ok = eta > 0.0 && r.weak_lhs <= 2.0 * (1.0 - eta) && r.weak_lhs < 2.0;
    r.local_lhs = tau * ((1.0 + tg) * L + 2.0 * (std::abs(gamma_F) / beta - gamma_F));
    r.local_ok = r.local_lhs >= 0.0 && r.local_lhs <= 1.0 - eta;
    r.gamma = tau * (gamma_G + gamma_F - beta * std::abs(gamma_F)) - gamma_tilde;
    if (r.local_ok && r.gamma > 0.0) {
        r.regime = Regime::Linear;
        r.p_max = 1.0 + r.gamma;
    } else if (r.local_ok && r.gamma >= 0.0) {
        r.regime = Regime::NonEscape;
    } else if (r.weak_ok) {
        r.regime = Regime::SubdifferentialOnly;
    }
    return r;
}

struct FbCertificate {
    FbConditionReport report;
    double p = 1.0;
    double theta = 0.0;
};

/**
 * @brief Picks the largest certified p ∈ [1, κ) for inexact FB, recomputing θ(p) until 1 + γ ≥ p.
 *
 * With no tracking constants the gradient is exact (θ = 0).
 */
inline FbCertificate certify_fb(double tau, double L, const std::optional<TrackingConstants>& c, double gamma_tilde,
                                double beta, double gamma_G, double gamma_F, double eta)
{
    auto th = [&](double p) { return c ? theta(p, *c) : 0.0; };
    FbCertificate cert;
    cert.theta = th(1.0);
    cert.report = condition_check_inexact_fb(tau, L, cert.theta, gamma_tilde, beta, gamma_G, gamma_F, eta);
    if (cert.report.regime != Regime::Linear) return cert;
    const double kappa = c ? c->kappa() : kInf;
    double p = std::min(cert.report.p_max, 1.0 + 0.999999 * (kappa - 1.0));
    for (int it = 0; it < 60; ++it) {
        double t = th(p);
        auto rep = condition_check_inexact_fb(tau, L, t, gamma_tilde, beta, gamma_G, gamma_F, eta);
        if (rep.regime == Regime::Linear && p <= rep.p_max) {
            cert.p = p;
            cert.theta = t;
            cert.report = rep;
            return cert;
        }
        p = 1.0 + 0.5 * (p - 1.0);
    }
    cert.report.regime = Regime::NonEscape;
    cert.report.p_max = 1.0;
    return cert;
}

enum class PdpsMode { Mono, Smoothness };

struct PdpsConditionParams {
    double tau = 1.0;
    double sigma = 1.0;
    double lambda = 0.0;
    double L = 0.0;
    double theta = 0.0;
    double gamma_tilde = 0.0;
    double beta = 1.0;
    double zeta = 1.0;
    double gamma_g = 0.0;
    double gamma_h_star = 0.0;
    double gamma_f = 0.0;
    double p = 1.0;
    double eta = 0.0;
    PdpsMode mode = PdpsMode::Smoothness;
};

struct PdpsConditionReport {
    double gamma = kNaN;
    double lambda_breve = kNaN;
    bool gamma_ok = false;
    bool lambda_ok = false;
    bool certified = false;
    Regime regime = Regime::None;
};

inline PdpsConditionReport condition_check_pdps_inexact(const PdpsConditionParams& q)
{
    if (!(q.tau > 0.0) || !(q.sigma > 0.0) || !(q.beta > 0.0) || q.gamma_tilde < 0.0 || q.p < 1.0)
        throw std::invalid_argument("condition_check_pdps_inexact: invalid parameters");
    PdpsConditionReport r;
    const double tg = detail::theta_sq_over(q.theta, q.gamma_tilde);
    if (q.mode == PdpsMode::Mono) {
        if (!(q.zeta > 0.0)) throw std::invalid_argument("condition_check_pdps_inexact: zeta must be positive");
        const double gft = q.gamma_f - 0.5 * q.zeta * q.L;
        r.gamma = std::min((q.gamma_g + gft - q.beta * std::abs(gft)) * q.tau, q.gamma_h_star * q.sigma) / 2.0 -
                  q.gamma_tilde;
        r.gamma_ok = (q.p - 1.0) / 2.0 <= r.gamma;
        r.lambda_breve = q.L / q.zeta + 2.0 * (std::abs(gft) / q.beta - gft) + 2.0 * tg * q.L;
    } else {
        r.gamma = std::min((q.gamma_g + q.gamma_f - q.beta * std::abs(q.gamma_f)) * q.tau, q.gamma_h_star * q.sigma) /
                      2.0 -
                  q.gamma_tilde;
        r.gamma_ok = q.p - 1.0 <= r.gamma;
        r.lambda_breve = q.L + std::abs(q.gamma_f) / q.beta - q.gamma_f + tg * q.L;
    }
    r.lambda_ok = r.lambda_breve >= 0.0 && r.lambda_breve <= (1.0 - q.eta) * q.lambda + 1e-15;
    r.certified = r.gamma_ok && r.lambda_ok;
    if (r.certified) r.regime = q.p > 1.0 ? Regime::Linear : Regime::NonEscape;
    return r;
}

struct InitBallReport {
    double distance = kNaN;
    double radius = kNaN;
    bool ok = false;
};

/// x⁰ ∈ 𝕆_M(x̄, √(λ²δ_z² − 2r_p)) with λ²δ_z² > 2r_p.
inline InitBallReport init_ball_check(const Vector& x0, const Vector& xbar, const SymOperator& M, double lambda,
                                      double delta_z, double r_p)
{
    InitBallReport r;
    r.distance = seminorm(M, x0 - xbar);
    const double rad2 = lambda * lambda * delta_z * delta_z - 2.0 * r_p;
    r.radius = rad2 > 0.0 ? std::sqrt(rad2) : 0.0;
    r.ok = rad2 > 0.0 && r.distance < r.radius;
    return r;
}

/// Curvature bounds of F on Ω: L ≥ ‖F''‖ and γ_F ≤ λ_min(F'').
struct OuterCurvature {
    double L = kNaN;
    double gamma_F = kNaN;
    ConstantsMode mode = ConstantsMode::Empirical;
};

inline OuterCurvature estimate_outer_curvature(const BilevelInstance& inst, ConstantsMode mode, int samples = 1000,
                                               std::uint64_t seed = 0)
{
    OuterCurvature c;
    c.mode = mode;
    if (mode == ConstantsMode::Analytic) {
        if (!inst.analytic) throw std::invalid_argument(inst.name + ": no analytic constants");
        c.L = inst.analytic->F_lipschitz;
        c.gamma_F = inst.analytic->F_monotone;
        return c;
    }
    double lmax = 0.0, lmin = kInf;
    auto grad = [&](const Vector& x) { return exact_gradient(inst, x); };
    for (const auto& x : omega_samples(inst.omega, samples, seed)) {
        Matrix H = detail::fd_jacobian(grad, x, inst.omega, 1e-5);
        SymOperator Hs(H);
        lmax = std::max(lmax, Hs.spectral_norm());
        lmin = std::min(lmin, Hs.min_eigenvalue());
    }
    c.L = 1.05 * lmax;
    c.gamma_F = lmin - 0.05 * std::abs(lmin);
    return c;
}

/// Joins inner, adjoint and transform constants, then converts to λ = ‖·‖_Λ and d_{X*} = ‖·‖_{D⁻¹}.
inline TrackingConstants assemble_tracking_constants(const InnerConstants& in, const AdjointConstants& adj,
                                                     const TransformConstants& tc, const SymOperator& Lambda,
                                                     const SymOperator& D)
{
    TrackingConstants c;
    c.kappa_u = in.kappa_u;
    c.kappa_w = adj.kappa_w;
    c.pi_u = std::max(in.pi_u, 1e-8);
    c.pi_w = adj.pi_w;
    c.mu_u = adj.mu_u;
    c.alpha_u = tc.alpha_u;
    c.alpha_w = tc.alpha_w;
    c = c.rescaled(Lambda.min_eigenvalue(), D.min_eigenvalue());
    c.validate();
    return c;
}

} // namespace tracksplit
