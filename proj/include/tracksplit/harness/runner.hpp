#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tracksplit/harness/config.hpp"

namespace tracksplit::harness {

/// Exit-code contract of the CLI.
enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 2, kExitConfigError = 3, kExitLeftOmega = 4 };

struct Certificate {
    Regime regime = Regime::None;
    double p = 1.0;
    double theta = 0.0;
    double gamma = kNaN;
    bool certified = false;
};

struct RunSummary {
    RunStatus status = RunStatus::Budget;
    double final_residual = kNaN;
    double p_est = kNaN;
    Certificate certificate;
    RunCounters counters;
    double wall_seconds = 0.0;
    bool checks_pass = true;
    int exit_code = kExitOk;
};

struct RunResult {
    SolverConfig config;
    IterateTrace trace;
    std::vector<CheckReport> checks;
    RunSummary summary;
    Vector xbar;
    std::optional<TrackingConstants> constants;
    std::optional<InnerConstants> inner_constants;
    std::optional<AdjointConstants> adjoint_constants;
    OuterCurvature curvature;
};

inline const std::vector<std::string>& known_checks()
{
    static const std::vector<std::string> names = {
        "descent",        "quasi_monotone",   "quasi_fejer",     "gradient_error", "error_sum",
        "inner_tracking", "adjoint_tracking", "transform_bound", "subdiff_residual", "linear_rate",
        "mismatch_rp",    "ergodic"};
    return names;
}

namespace detail {

inline Vector default_x0(const SolverConfig& c, const std::optional<BilevelInstance>& inst)
{
    if (c.x0) return *c.x0;
    if (inst) return inst->omega.bounded() ? inst->omega.center() : Vector(Vector::Zero(inst->dim_x()));
    return Vector::Zero(c.outer.K.cols());
}

/// Trailing-window rate fit on ‖x^k − x̄‖²_M, stopping before distances reach the roundoff floor.
inline RateFit fit_rate(const IterateTrace& tr, const Vector& xbar)
{
    auto d = distance_series(tr, xbar);
    std::size_t end = d.size();
    for (std::size_t i = 0; i < d.size(); ++i)
        if (!(d[i] > 1e-22 * std::max(1.0, d[0]))) {
            end = i;
            break;
        }
    if (end < 3) {
        RateFit f;
        f.converged_exactly = end < d.size();
        f.status = f.converged_exactly ? "converged-exactly" : "too-short";
        return f;
    }
    d.resize(end);
    return linear_rate_fit(d, std::min<std::size_t>(200, end - 1));
}

inline CheckReport single_slack(const std::string& name, const std::string& citation, double slack, double magnitude)
{
    CheckReport r;
    r.name = name;
    r.citation = citation;
    r.add(slack, magnitude);
    return r;
}

} // namespace detail

/// Solution point for diagnostics: config value, closed form, or the last iterate of a 10× longer exact run.
inline Vector reference_point(const SolverConfig& c, const std::optional<BilevelInstance>& inst, const RunOptions& base)
{
    if (c.xbar) return *c.xbar;
    if (inst && inst->x_star && c.outer.alg == OuterAlgorithm::FB) return *inst->x_star;
    OuterSpec o = c.outer;
    if (o.alg == OuterAlgorithm::PDPSMismatch) o.alg = OuterAlgorithm::PDPS;
    RunOptions opts = base;
    opts.budget = 10 * c.budget;
    opts.tolerance = 1e-14;
    opts.xbar.reset();
    opts.transform.reset();
    IterateTrace tr = run_exact_baseline(inst ? &*inst : nullptr, c.adjoint, o, opts);
    return tr.final_x;
}

inline Certificate certify(const SolverConfig& c, const std::optional<BilevelInstance>& inst,
                           const std::optional<TrackingConstants>& tc, const OuterCurvature& cur)
{
    Certificate cert;
    const auto& o = c.outer;
    auto th = [&](double p) { return tc ? theta(p, *tc) : 0.0; };
    if (o.alg == OuterAlgorithm::FB) {
        if (c.p) {
            cert.p = *c.p;
            cert.theta = th(cert.p);
            auto rep = condition_check_inexact_fb(o.tau, cur.L, cert.theta, c.gamma_tilde, c.beta,
                                                  o.G.strong_convexity(), cur.gamma_F, c.eta);
            cert.regime = rep.regime;
            cert.gamma = rep.gamma;
            cert.certified = cert.p == 1.0 ? rep.regime != Regime::None : (rep.regime == Regime::Linear && cert.p <= rep.p_max);
        } else {
            auto fc = certify_fb(o.tau, cur.L, tc, c.gamma_tilde, c.beta, o.G.strong_convexity(), cur.gamma_F, c.eta);
            cert.regime = fc.report.regime;
            cert.p = fc.p;
            cert.theta = fc.theta;
            cert.gamma = fc.report.gamma;
            cert.certified = fc.report.regime != Regime::None;
        }
        return cert;
    }
    if (o.alg == OuterAlgorithm::PDPSMismatch) {
        const double g = std::min(o.g.strong_convexity() * o.tau / 4.0, o.h_star.strong_convexity() * o.sigma / 2.0);
        cert.gamma = g;
        cert.p = c.p ? *c.p : 1.0 + 2.0 * g;
        cert.certified = g > 0.0 && cert.p > 1.0 && cert.p <= 1.0 + 2.0 * g + 1e-15;
        cert.regime = cert.certified ? Regime::Linear : Regime::None;
        return cert;
    }
    PdpsConditionParams q;
    q.tau = o.tau;
    q.sigma = o.sigma;
    q.lambda = o.lambda;
    q.L = inst ? cur.L : 0.0;
    q.gamma_tilde = inst ? c.gamma_tilde : 0.0;
    q.beta = c.beta;
    q.zeta = c.zeta;
    q.gamma_g = o.g.strong_convexity();
    q.gamma_h_star = o.h_star.strong_convexity();
    q.gamma_f = inst ? cur.gamma_F : 0.0;
    q.eta = c.eta;
    auto eval = [&](double p) {
        q.p = p;
        q.theta = th(p);
        return condition_check_pdps_inexact(q);
    };
    double p = c.p ? *c.p : 1.0;
    auto rep = eval(p);
    if (!c.p && rep.certified && rep.gamma > 0.0) {
        double cand = 1.0 + rep.gamma;
        if (tc) cand = std::min(cand, 1.0 + 0.999999 * (tc->kappa() - 1.0));
        for (int it = 0; it < 60; ++it) {
            auto r2 = eval(cand);
            if (r2.certified) {
                p = cand;
                rep = r2;
                break;
            }
            cand = 1.0 + 0.5 * (cand - 1.0);
        }
    }
    cert.p = p;
    cert.theta = th(p);
    cert.gamma = rep.gamma;
    cert.certified = rep.certified;
    cert.regime = rep.regime;
    return cert;
}

/// Executes one configured experiment and evaluates its checks.
inline RunResult run_experiment(const SolverConfig& c)
{
    validate_steps(c);
    RunResult res;
    res.config = c;
    auto inst = build_instance(c);
    const bool pd = c.outer.alg != OuterAlgorithm::FB;
    const BilevelInstance* ip = inst ? &*inst : nullptr;

    RunOptions opts;
    opts.budget = c.budget;
    opts.tolerance = c.tolerance;
    opts.presolve = c.warm_start == "presolve";
    opts.x0 = detail::default_x0(c, inst);
    if (pd) opts.y0 = c.y0 ? *c.y0 : Vector(Vector::Zero(c.outer.K.rows()));
    opts.gamma_tilde = c.gamma_tilde;
    opts.printed_elip = c.printed_elip;
    opts.region_radius = c.region_radius;

    if (inst) {
        res.curvature = config_curvature(c, *inst);
        opts.L = res.curvature.L;
    }
    const Index nf = inst ? inst->dim_x() : c.outer.K.cols();
    const SymOperator D = primal_metric(c.outer, nf);
    const SymOperator Lambda = D.scaled(pd ? opts.L : opts.L * c.outer.tau);

    if (inst && !c.exact_baseline && c.constants_mode != "none") {
        const ConstantsMode mode = c.constants_mode == "analytic" ? ConstantsMode::Analytic : ConstantsMode::Empirical;
        try {
            res.inner_constants = estimate_inner_constants(*inst, c.inner, mode, c.samples, c.seed, c.kappa_cap);
            res.adjoint_constants =
                estimate_adjoint_constants(*inst, c.adjoint, mode, c.region_radius, c.samples, c.seed, c.kappa_cap);
            auto tcon = estimate_transform_constants(*inst, mode, c.adjoint.variant, c.region_radius, c.samples, c.seed);
            res.constants = assemble_tracking_constants(*res.inner_constants, *res.adjoint_constants, tcon, Lambda, D);
            opts.transform = tcon;
        } catch (const std::invalid_argument& e) {
            throw ConfigError("constants", e.what());
        }
        opts.constants = res.constants;
    }

    res.summary.certificate = certify(c, inst, res.constants, res.curvature);
    opts.p = res.summary.certificate.p;
    if (res.constants && !(opts.p < res.constants->kappa())) opts.p = 1.0;

    res.xbar = reference_point(c, inst, opts);
    opts.xbar = res.xbar;
    res.trace = c.exact_baseline ? run_exact_baseline(ip, c.adjoint, c.outer, opts)
                                 : run_single_loop(ip, c.inner, c.adjoint, c.outer, opts);
    const IterateTrace& tr = res.trace;

    std::vector<std::string> enabled = c.checks;
    const bool ledger = opts.constants.has_value() && !c.exact_baseline;
    const auto& cert = res.summary.certificate;
    const bool local = cert.regime == Regime::NonEscape || cert.regime == Regime::Linear;
    if (enabled.empty()) {
        if (!pd) enabled = {"descent"};
        if (!pd && cert.certified) enabled.push_back("quasi_monotone");
        if (ledger) {
            for (const char* n : {"gradient_error", "error_sum", "inner_tracking", "adjoint_tracking", "transform_bound"})
                enabled.push_back(n);
        }
        if (cert.certified && local) enabled.push_back("quasi_fejer");
        if (cert.certified && cert.regime == Regime::Linear && cert.p > 1.0 && !pd) enabled.push_back("linear_rate");
        if (c.outer.alg == OuterAlgorithm::PDPSMismatch) enabled.push_back("mismatch_rp");
        if (pd && !inst && c.outer.alg == OuterAlgorithm::PDPS && c.outer.h_star.bounded_domain(c.outer.K.rows()))
            enabled.push_back("ergodic");
    }
    std::set<std::string> seen;
    for (const auto& name : enabled) {
        if (std::find(known_checks().begin(), known_checks().end(), name) == known_checks().end())
            throw ConfigError("checks", "unknown check '" + name + "'");
        if (!seen.insert(name).second) continue;
        if (tr.empty()) {
            res.checks.push_back(detail::single_slack(name, "no iterations", -1.0, 0.0));
            continue;
        }
        auto need_ledger = [&] {
            if (!ledger) throw ConfigError("checks", "check '" + name + "' needs tracking constants");
        };
        if (name == "descent" || name == "quasi_monotone") {
            if (pd) throw ConfigError("checks", "check '" + name + "' applies to forward-backward runs");
            SymOperator Lb = SymOperator::identity(nf, res.curvature.L);
            if (ledger)
                Lb = SymOperator::identity(
                    nf, (1.0 + tracksplit::detail::theta_sq_over(tr.theta, c.gamma_tilde)) * res.curvature.L + c.gamma_tilde / c.outer.tau);
            auto dr = descent_check(tr, Lb, c.eta);
            res.checks.push_back(name == "descent" ? dr.descent : dr.quasi_monotone);
        } else if (name == "quasi_fejer") {
            std::vector<double> err;
            for (const auto& r : tr.rows) err.push_back(r.err_mono);
            res.checks.push_back(quasi_fejer_check(tr, res.xbar, tr.p, err, c.delta));
        } else if (name == "gradient_error") {
            need_ledger();
            CheckReport r;
            r.name = name;
            r.citation = "gradient error estimate from tracking";
            const double t2 = tr.theta * tr.theta;
            for (const auto& row : tr.rows) {
                const double lhs = row.grad_error * row.grad_error, a = t2 * row.lambda_sq;
                r.add(a + row.e_pk - lhs, tracksplit::detail::max_abs({lhs, a, row.e_pk}));
            }
            res.checks.push_back(r);
        } else if (name == "error_sum") {
            need_ledger();
            const auto& r0 = tr.rows.front();
            ErrorLedger L(*res.constants, tr.p, (r0.u.head(inst->dim_u()) - r0.su).norm(), (r0.w - r0.sw).norm());
            double sum = 0.0, pk = 1.0;
            for (const auto& row : tr.rows) {
                sum += pk * row.e_pk;
                pk *= tr.p;
            }
            const double bound = L.error_sum_bound();
            res.checks.push_back(detail::single_slack(name, "error sum bound", bound - sum, std::max(std::abs(bound), std::abs(sum))));
        } else if (name == "inner_tracking" || name == "adjoint_tracking") {
            need_ledger();
            if (tr.rows.size() < 2) continue;
            CheckReport r;
            r.name = name;
            r.citation = name == "inner_tracking" ? "inner tracking inequality" : "adjoint tracking inequality";
            const SymOperator I = SymOperator::identity(nf);
            auto s = name == "inner_tracking"
                         ? measure_inner_tracking(tr, res.inner_constants->kappa_u, res.inner_constants->pi_u, I)
                         : measure_adjoint_tracking(tr, res.adjoint_constants->kappa_w, res.adjoint_constants->mu_u,
                                                    res.adjoint_constants->pi_w, I);
            for (double v : s) r.add(v, 0.0);
            res.checks.push_back(r);
        } else if (name == "transform_bound") {
            need_ledger();
            long bad = 0;
            for (const auto& e : tr.events)
                if (e.find("transform") != std::string::npos) ++bad;
            auto r = detail::single_slack(name, "differential transform error bound", bad ? -1.0 : 0.0, 0.0);
            if (bad) r.note = std::to_string(bad) + " violations";
            res.checks.push_back(r);
        } else if (name == "subdiff_residual") {
            const double f = tr.rows.back().residual;
            res.checks.push_back(detail::single_slack(name, "subdifferential residual below tolerance",
                                                      c.tolerance - f, 0.0));
        } else if (name == "linear_rate") {
            auto fit = detail::fit_rate(tr, res.xbar);
            auto r = detail::single_slack(name, "linear convergence rate", fit.converged_exactly ? 0.0 : fit.p_est - 0.9 * cert.p,
                                          cert.p);
            r.note = fit.status;
            res.checks.push_back(r);
        } else if (name == "mismatch_rp") {
            if (c.outer.alg != OuterAlgorithm::PDPSMismatch) throw ConfigError("checks", "mismatch_rp needs a mismatch run");
            const Index ny = c.outer.K.rows();
            const double eps = mismatch_epsilon(c.outer.K, *c.outer.K_adj_mismatched, c.outer.g.strong_convexity(),
                                                c.outer.h_star.domain_diameter(ny));
            std::vector<double> err;
            for (const auto& row : tr.rows) err.push_back(row.err_mono);
            CheckReport r;
            r.name = name;
            r.citation = "r_p bound under adjoint mismatch";
            const double bound = eps / (tr.p - 1.0) + 1e-12;
            for (double s : r_p_partial_sums(err, tr.p)) r.add(bound - s, 0.0);
            r.note = "budget-bounded";
            res.checks.push_back(r);
        } else if (name == "ergodic") {
            if (inst || !pd) throw ConfigError("checks", "ergodic check supports primal-dual runs with f = 0");
            const auto& o = c.outer;
            const Index nz = o.K.cols();
            auto primal = [&](const Vector& z) { return o.g.value(z) + o.h_star.conjugate(o.K * z); };
            auto er = ergodic_values(tr, primal, res.xbar.head(nz), o.h_star, true);
            CheckReport r;
            r.name = name;
            r.citation = "ergodic primal value bound";
            for (const auto& pt : er.points) r.add(pt.rhs - pt.lhs, std::max(std::abs(pt.lhs), std::abs(pt.rhs)));
            res.checks.push_back(r);
        }
    }

    auto& s = res.summary;
    s.status = tr.status;
    s.final_residual = tr.empty() ? kNaN : tr.rows.back().residual;
    s.p_est = detail::fit_rate(tr, res.xbar).p_est;
    s.counters = tr.counters;
    s.wall_seconds = tr.wall_seconds;
    for (const auto& r : res.checks) s.checks_pass = s.checks_pass && r.pass;
    s.exit_code = tr.status == RunStatus::LeftOmega ? kExitLeftOmega : (s.checks_pass ? kExitOk : kExitCheckFailed);
    return res;
}

inline std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Trace CSV with fixed column order; floats at 17 significant digits.
inline std::string trace_csv(const IterateTrace& tr)
{
    std::ostringstream os;
    auto width = [&](auto member) -> Index { return tr.rows.empty() ? 0 : (tr.rows.front().*member).size(); };
    const Index nx = width(&TraceRow::x), nu = width(&TraceRow::u), nw = width(&TraceRow::w),
                ng = width(&TraceRow::grad_estimate);
    os << "k";
    for (Index i = 0; i < nx; ++i) os << ",x" << i;
    for (Index i = 0; i < nu; ++i) os << ",u" << i;
    for (Index i = 0; i < nw; ++i) os << ",w" << i;
    for (Index i = 0; i < ng; ++i) os << ",g" << i;
    os << ",grad_error,e_pk,e_lip,err_desc,err_mono,gap,step_norm_M,dist_to_xbar_M,residual\n";
    for (const auto& r : tr.rows) {
        os << r.k;
        for (const Vector* v : {&r.x, &r.u, &r.w, &r.grad_estimate})
            for (Index i = 0; i < v->size(); ++i) os << ',' << fmt17((*v)(i));
        for (double v : {r.grad_error, r.e_pk, r.e_lip, r.err_desc, r.err_mono, r.gap, r.step_norm_M, r.dist_to_xbar_M,
                         r.residual})
            os << ',' << fmt17(v);
        os << '\n';
    }
    return os.str();
}

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json checks_json(const std::vector<CheckReport>& checks)
{
    json arr = json::array();
    for (const auto& r : checks)
        arr.push_back({{"name", r.name},
                       {"citation", r.citation},
                       {"min_slack", number_or_null(r.min_slack)},
                       {"worst_index", r.worst_index},
                       {"tolerance", r.tolerance},
                       {"pass", r.pass},
                       {"seed", r.seed},
                       {"note", r.note}});
    return arr;
}

inline json summary_json(const RunResult& r)
{
    const auto& s = r.summary;
    json j = {{"name", r.config.name},
              {"method", r.trace.method},
              {"status", to_string(s.status)},
              {"final_residual", number_or_null(s.final_residual)},
              {"p_est", number_or_null(s.p_est)},
              {"regime", to_string(s.certificate.regime)},
              {"certified", s.certificate.certified},
              {"p_cert", s.certificate.p},
              {"theta", s.certificate.theta},
              {"iterations", r.trace.rows.size()},
              {"inner_steps", s.counters.inner_steps},
              {"adjoint_steps", s.counters.adjoint_steps},
              {"exact_inner_solves", s.counters.exact_inner_solves},
              {"exact_adjoint_solves", s.counters.exact_adjoint_solves},
              {"lu_solves", s.counters.lu_solves},
              {"newton_iterations", s.counters.newton_iterations},
              {"work", s.counters.work},
              {"wall_seconds", s.wall_seconds},
              {"checks_pass", s.checks_pass},
              {"exit_code", s.exit_code},
              {"events", r.trace.events}};
    if (r.constants) j["constants"] = r.constants->describe();
    std::vector<double> fx(r.trace.final_x.data(), r.trace.final_x.data() + r.trace.final_x.size());
    j["final_x"] = fx;
    return j;
}

inline void write_file(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

/// Writes trace.csv, checks.json and summary.json into `dir`.
inline void write_outputs(const RunResult& r, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    write_file(dir / "trace.csv", trace_csv(r.trace));
    write_file(dir / "checks.json", checks_json(r.checks).dump(2) + "\n");
    write_file(dir / "summary.json", summary_json(r).dump(2) + "\n");
}

struct Comparison {
    RunResult a;
    RunResult b;
    double limit_difference = kNaN;
    double speedup = kNaN;
    json document;
};

/// Runs two configurations on the same instance; speedup = work(b) / work(a).
inline Comparison compare(const SolverConfig& ca, const SolverConfig& cb)
{
    const json ia = ca.raw.value("instance", json::object()), ib = cb.raw.value("instance", json::object());
    if (ia != ib) throw ConfigError("instance", "compared configurations must use the same instance");
    Comparison cmp;
    cmp.a = run_experiment(ca);
    cmp.b = run_experiment(cb);
    cmp.limit_difference = (cmp.a.trace.final_x - cmp.b.trace.final_x).norm();
    const double wa = cmp.a.summary.counters.work, wb = cmp.b.summary.counters.work;
    cmp.speedup = wa > 0.0 ? wb / wa : (wb == wa ? 1.0 : kInf);
    auto side = [](const RunResult& r) {
        json j = summary_json(r);
        std::vector<double> curve;
        for (const auto& row : r.trace.rows) curve.push_back(row.dist_to_xbar_M);
        j["dist_to_xbar_M"] = curve;
        return j;
    };
    cmp.document = {{"a", side(cmp.a)},
                    {"b", side(cmp.b)},
                    {"limit_difference", cmp.limit_difference},
                    {"speedup", number_or_null(cmp.speedup)}};
    return cmp;
}

} // namespace tracksplit::harness
