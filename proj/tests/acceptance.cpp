// Property-based acceptance run. One PASS/FAIL line per criterion; nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "support.hpp"
#include "tracksplit/harness/presets.hpp"
#include "tracksplit/harness/runner.hpp"

using namespace tracksplit;
using namespace tracksplit::testing;
namespace th = tracksplit::harness;

namespace {

// Tolerances and limits.
constexpr double kRecursionSlack = -1e-10;
constexpr double kEqualityChainGap = 1e-12;
constexpr double kRecursionSeconds = 1.0;
constexpr double kThetaTol = 1e-9;
constexpr double kInnerTrackingSlack = -1e-11;
constexpr double kJacobiRhoRel = 0.05;
constexpr double kGradientErrorSlack = -1e-9;
constexpr long kGradientErrorSteps = 200;
constexpr double kConvergenceDist = 1e-6;
constexpr long kConvergenceBudget = 500;
constexpr double kSubdiffResidual = 1e-8;
constexpr double kRateRel = 0.10;
constexpr double kConvergenceSeconds = 2.0;
constexpr double kLemmaSlack = -1e-9;
constexpr int kLemmaSamples = 1000;
constexpr double kBeta = 0.1;
constexpr double kSaddleTol = 1e-10;
constexpr long kSaddleIterations = 100;
constexpr long kErgodicN = 1000;
constexpr double kMismatchNorm = 0.01;
constexpr double kRpSlack = 1e-12;
constexpr double kDescentSlack = -1e-9;
constexpr double kSuiteSeconds = 60.0;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            detail += (detail.empty() ? "" : "; ") + what;
        }
    }
};

std::string fmt(double v)
{
    char b[32];
    std::snprintf(b, sizeof b, "%.3g", v);
    return b;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

TrackingConstants random_constants(std::mt19937_64& rng)
{
    // κ drawn from (1, 4]
    std::uniform_real_distribution<double> k(0.0, 3.0), pos(0.05, 3.0), a(0.0, 2.0);
    TrackingConstants c;
    c.kappa_u = 4.0 - k(rng);
    c.kappa_w = 4.0 - k(rng);
    c.pi_u = pos(rng);
    c.pi_w = pos(rng);
    c.mu_u = pos(rng);
    c.alpha_u = a(rng);
    c.alpha_w = a(rng);
    return c;
}

Outcome criterion1()
{
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<long> kd(1, 30);
    double worst = kInf, chain_gap = 0.0;
    for (int t = 0; t < 100; ++t) {
        const auto c = random_constants(rng);
        const long K = kd(rng);
        double b = 2.0 * u(rng), cc = 2.0 * u(rng);
        const double b1 = b, c1 = cc;
        std::vector<double> d;
        for (long k = 1; k <= K; ++k) {
            d.push_back(u(rng));
            b = u(rng) * (b + c.pi_u * d.back()) / c.kappa_u;
            cc = u(rng) * (cc + c.mu_u * b + c.pi_w * d.back()) / c.kappa_w;
            worst = std::min(worst, recursion_bound(k, c.alpha_u, c.alpha_w, c, b1, c1, d) -
                                        (c.alpha_u * b + c.alpha_w * cc));
        }
        // equality chain with the same constants
        b = b1;
        cc = c1;
        for (long k = 1; k <= K; ++k) {
            b = (b + c.pi_u * d[k - 1]) / c.kappa_u;
            cc = (cc + c.mu_u * b + c.pi_w * d[k - 1]) / c.kappa_w;
            const double actual = c.alpha_u * b + c.alpha_w * cc;
            const double gap = recursion_bound(k, c.alpha_u, c.alpha_w, c, b1, c1, d) - actual;
            chain_gap = std::max(chain_gap, std::abs(gap) / std::max(1.0, actual));
        }
    }
    const double secs = seconds_since(t0);
    o.require(worst >= kRecursionSlack, "min slack " + fmt(worst));
    o.require(chain_gap <= kEqualityChainGap, "equality chain gap " + fmt(chain_gap));
    o.require(secs < kRecursionSeconds, "runtime " + fmt(secs) + " s");
    if (o.pass) o.detail = "min slack " + fmt(worst) + ", equality gap " + fmt(chain_gap) + ", " + fmt(secs) + " s";
    return o;
}

Outcome criterion2()
{
    Outcome o;
    TrackingConstants c;
    c.kappa_u = c.kappa_w = 2.0;
    c.pi_u = c.pi_w = c.mu_u = c.alpha_u = c.alpha_w = 1.0;
    const double t = theta(1.0, c);
    o.require(std::abs(t - 10.0) <= kThetaTol, "theta = " + fmt(t));
    std::mt19937_64 rng(102);
    std::uniform_real_distribution<double> u(0.0, 0.95);
    int bad = 0;
    for (int i = 0; i < 100; ++i) {
        auto ci = random_constants(rng);
        const double p = 1.0 + u(rng) * (ci.kappa() - 1.0);
        if (theta(p, ci) > theta_bound(p, ci) * (1.0 + 1e-12)) ++bad;
    }
    o.require(bad == 0, std::to_string(bad) + " tuples above the closed-form bound");
    if (o.pass) o.detail = "theta(1) = " + fmt(t) + ", 100/100 below bound";
    return o;
}

Outcome criterion3()
{
    Outcome o;
    Bq1Run run(200);
    const double kappa_u = 1.0 + run.inner.tau * 1.0, pi_u = run.inst.analytic->L_s;
    auto s = measure_inner_tracking(run.trace, kappa_u, pi_u, SymOperator::identity(1));
    const double worst = *std::min_element(s.begin(), s.end());
    o.require(worst >= kInnerTrackingSlack, "BQ1 tracking min slack " + fmt(worst));

    auto inst = make_parametric_poisson(16);
    const Vector x = vec2(0.3, 3.0);
    const Matrix A = inst.linear->A(x);
    const Vector sol = A.fullPivLu().solve(inst.linear->b(x));
    const Matrix B = Matrix::Identity(16, 16) - Matrix(A.diagonal().cwiseInverse().asDiagonal()) * A;
    const double rho = B.eigenvalues().cwiseAbs().maxCoeff();
    Vector u = Vector::Zero(16);
    double e = (u - sol).norm(), e_prev = e;
    for (int k = 0; k < 25; ++k) {
        e_prev = e;
        u = jacobi_step(u, x, *inst.linear);
        e = (u - sol).norm();
    }
    const double rel = std::abs(e / e_prev - rho) / rho;
    o.require(rel <= kJacobiRhoRel, "Jacobi contraction off by " + fmt(100 * rel) + "%");
    if (o.pass) o.detail = "BQ1 min slack " + fmt(worst) + ", Jacobi rate within " + fmt(100 * rel) + "% of rho";
    return o;
}

Outcome criterion4()
{
    Outcome o;
    Bq1Run run(kGradientErrorSteps + 1);
    ErrorLedger L(run.constants, 1.0, run.b1(), run.c1());
    double worst = kInf, esum = 0.0;
    for (const auto& row : run.trace.rows) {
        worst = std::min(worst, gradient_error_check(row.k, L, row.grad_estimate, row.grad_exact, run.D, row.x_next,
                                                     row.x, run.Lambda));
        const double lsq = seminorm_sq(run.Lambda, row.x_next - row.x);
        esum += L.e_pk(row.k, lsq);
        L.push_step(lsq, seminorm_sq(run.D, row.x_next - row.x));
    }
    o.require(worst >= kGradientErrorSlack, "BQ1 gradient error slack " + fmt(worst));
    o.require(esum <= L.error_sum_bound(), "BQ1 error sum " + fmt(esum) + " > bound " + fmt(L.error_sum_bound()));

    auto cfg = th::preset("poisson_single_loop");
    cfg.checks = {"gradient_error", "error_sum"};
    cfg.budget = kGradientErrorSteps + 1;
    auto res = th::run_experiment(cfg);
    for (const auto& c : res.checks) {
        const double floor = c.name == "gradient_error" ? kGradientErrorSlack : 0.0;
        o.require(c.pass && c.min_slack >= floor, "Poisson " + c.name + " min slack " + fmt(c.min_slack));
    }
    o.require(res.checks.size() == 2, "Poisson checks missing");
    if (o.pass) o.detail = "BQ1 min slack " + fmt(worst) + ", Poisson checks pass";
    return o;
}

Outcome criterion5()
{
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    auto cfg = th::preset("bq1_single_loop");
    cfg.budget = kConvergenceBudget;
    auto res = th::run_experiment(cfg);
    const double dist = std::abs(res.trace.final_x(0) - 2.0);
    o.require(res.summary.certificate.certified, "step sizes not certified");
    o.require(dist <= kConvergenceDist, "|x^N - 2| = " + fmt(dist));
    auto inst = make_quadratic_bilevel(1.0, scalar(1.0));
    const double sub = subdiff_residual(res.trace.rows.back(),
                                        [&](const Vector& x) { return exact_gradient(inst, x); }, res.trace.M);
    o.require(sub < kSubdiffResidual, "subdiff residual " + fmt(sub));

    auto rate = th::run_experiment(th::preset("bq1_rate"));
    const double p_cert = rate.summary.certificate.p, p_est = rate.summary.p_est;
    o.require(rate.summary.certificate.regime == Regime::Linear, "rate run not in the linear regime");
    o.require(std::abs(p_est - p_cert) <= kRateRel * p_cert, "p_est " + fmt(p_est) + " vs p " + fmt(p_cert));
    const double secs = seconds_since(t0);
    o.require(secs < kConvergenceSeconds, "runtime " + fmt(secs) + " s");
    if (o.pass)
        o.detail = "|x^N - 2| = " + fmt(dist) + ", residual " + fmt(sub) + ", p_est " + std::to_string(p_est) +
                   " vs p " + std::to_string(p_cert) + ", " + fmt(secs) + " s";
    return o;
}

std::vector<Triple> triples(Index n, double lo, double hi, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    auto draw = [&] {
        Vector v(n);
        for (Index i = 0; i < n; ++i) v(i) = u(rng);
        return v;
    };
    std::vector<Triple> out;
    for (int i = 0; i < kLemmaSamples; ++i) out.push_back({draw(), draw(), draw()});
    return out;
}

Outcome criterion6()
{
    Outcome o;
    struct Fixture {
        std::string name;
        ScalarFn F;
        VectorFn DF;
        SymOperator Lambda, Gamma;
        std::vector<Triple> samples;
    };
    const Matrix Q = (Matrix(2, 2) << 2.0, 0.5, 0.5, 1.0).finished();
    std::vector<Fixture> fx;
    fx.push_back({"quadratic", [Q](const Vector& x) { return 0.5 * x.dot(Q * x); },
                  [Q](const Vector& x) -> Vector { return Q * x; }, SymOperator(Q), SymOperator(Q),
                  triples(2, -3.0, 3.0, 201)});
    fx.push_back({"scalar-nonconvex", [](const Vector& x) { return x(0) * x(0) / 2.0 - std::pow(x(0), 4) / 12.0; },
                  [](const Vector& x) -> Vector { return scalar(x(0) - std::pow(x(0), 3) / 3.0); },
                  SymOperator::identity(1), SymOperator::identity(1, 0.75), triples(1, -0.5, 0.5, 202)});
    double worst = kInf;
    for (const auto& f : fx) {
        std::vector<std::pair<Vector, Vector>> pairs;
        for (const auto& t : f.samples) pairs.emplace_back(t.x, t.z);
        const CheckReport reps[] = {check_descent_lemma(f.F, f.DF, f.Lambda, pairs),
                                    check_three_point_descent(f.F, f.DF, f.Lambda, f.Gamma, kBeta, f.samples),
                                    check_three_point_mono(f.DF, f.Lambda, f.Gamma, kBeta, 1.0, f.samples)};
        for (const auto& r : reps) {
            worst = std::min(worst, r.min_slack);
            o.require(r.min_slack >= kLemmaSlack, f.name + " " + r.name + " min slack " + fmt(r.min_slack));
        }
        const SymOperator half_lambda = f.Lambda.scaled(0.5), double_gamma = f.Gamma.scaled(2.0);
        const CheckReport wrong[] = {check_descent_lemma(f.F, f.DF, half_lambda, pairs, 0, 0.0),
                                     check_three_point_descent(f.F, f.DF, f.Lambda, double_gamma, kBeta, f.samples, 0, 0.0),
                                     check_three_point_mono(f.DF, f.Lambda, double_gamma, kBeta, 1.0, f.samples, 0, 0.0)};
        for (const auto& r : wrong) o.require(r.min_slack < 0.0, f.name + " " + r.name + " falsification not detected");
    }
    if (o.pass) o.detail = "min slack " + fmt(worst) + " over 6 lemma runs, 6/6 falsifications detected";
    return o;
}

Outcome criterion7()
{
    Outcome o;
    const Matrix K = Matrix::Constant(1, 1, 1.0);
    OuterSpec spec;
    spec.alg = OuterAlgorithm::PDPS;
    spec.tau = spec.sigma = 1.0;
    spec.K = K;
    spec.g = ProxFunction::quadratic(1.0, scalar(1.0));
    spec.h_star = ProxFunction::quadratic_on_box(1.0, scalar(0.0), scalar(-2.0), scalar(2.0));
    RunOptions opts;
    opts.budget = kSaddleIterations;
    opts.tolerance = 1e-13;
    opts.x0 = scalar(0.0);
    opts.y0 = scalar(0.0);
    auto tr = run_single_loop(nullptr, InnerSpec{}, AdjointSpec{}, spec, opts);
    const double err = (tr.final_x - vec2(0.5, 0.5)).norm();
    o.require(err <= kSaddleTol && static_cast<long>(tr.rows.size()) <= kSaddleIterations,
              "saddle error " + fmt(err) + " after " + std::to_string(tr.rows.size()));
    const auto I = SymOperator::identity(1);
    o.require(pdps_step_check(spec.tau, spec.sigma, 0.0, I, I, K, Matrix::Identity(1, 1)), "pdps_step_check fails");
    o.require(preconditioner_bounds_check(tr.M, I, I, 0.0, 1.0, 1.0, spec.tau, spec.sigma),
              "preconditioner_bounds_check fails");

    opts.budget = kErgodicN;
    opts.tolerance = 0.0;
    opts.x0 = scalar(-1.0);
    opts.y0 = scalar(1.5);
    auto long_run = run_single_loop(nullptr, InnerSpec{}, AdjointSpec{}, spec, opts);
    auto primal = [&](const Vector& z) { return spec.g.value(z) + spec.h_star.conjugate(K * z); };
    auto erg = ergodic_values(long_run, primal, scalar(0.5), spec.h_star, true);
    o.require(erg.holds, "ergodic bound violated at N = " + std::to_string(erg.first_violation));
    double worst = -kInf;
    for (const auto& pt : erg.points) worst = std::max(worst, pt.N * pt.lhs - erg.sup_ball / 2.0);
    o.require(worst <= 1e-9, "N*gap exceeds the sup-ball constant by " + fmt(worst));
    o.require(static_cast<long>(erg.points.size()) == kErgodicN, "ergodic series too short");
    if (o.pass)
        o.detail = std::to_string(tr.rows.size()) + " iterations to (1/2, 1/2), ergodic bound holds for N <= " +
                   std::to_string(kErgodicN);
    return o;
}

Outcome criterion8()
{
    Outcome o;
    auto cfg = th::preset("pdps_mismatch_small");
    const double mis = spectral_norm(*cfg.outer.K_adj_mismatched - cfg.outer.K.transpose());
    o.require(std::abs(mis - kMismatchNorm) < 1e-12, "mismatch norm " + fmt(mis));
    o.require(cfg.outer.g.strong_convexity() == 1.0, "gamma_g != 1");
    o.require(cfg.outer.h_star.bounded_domain(cfg.outer.K.rows()), "dual domain unbounded");
    auto res = th::run_experiment(cfg);
    const double p = res.summary.certificate.p, gamma = res.summary.certificate.gamma;
    o.require(p > 1.0 && p <= 1.0 + 2.0 * gamma + 1e-15, "p = " + fmt(p) + " outside (1, 1+2gamma]");
    const double eps = mismatch_epsilon(cfg.outer.K, *cfg.outer.K_adj_mismatched, 1.0,
                                        cfg.outer.h_star.domain_diameter(cfg.outer.K.rows()));
    std::vector<double> err;
    for (const auto& row : res.trace.rows) err.push_back(row.err_mono);
    double worst = -kInf;
    for (double s : r_p_partial_sums(err, p)) worst = std::max(worst, s - eps / (p - 1.0));
    o.require(worst <= kRpSlack, "r_p exceeds eps/(p-1) by " + fmt(worst));
    bool fejer = false;
    for (const auto& c : res.checks)
        if (c.name == "quasi_fejer") {
            fejer = true;
            o.require(c.pass, "quasi_fejer min slack " + fmt(c.min_slack));
        }
    o.require(fejer, "quasi_fejer check did not run");
    if (o.pass) o.detail = "p = " + fmt(p) + ", max r_p - eps/(p-1) = " + fmt(worst);
    return o;
}

Outcome criterion9()
{
    Outcome o;
    int certified = 0;
    for (const char* name : {"bq1_single_loop", "bq1_rate", "bq1_baseline", "poisson_single_loop", "poisson_baseline"}) {
        auto cfg = th::preset(name);
        cfg.checks = {"quasi_monotone"};
        auto res = th::run_experiment(cfg);
        if (!res.summary.certificate.certified) continue;
        ++certified;
        const auto& c = res.checks.at(0);
        o.require(c.min_slack >= kDescentSlack, std::string(name) + " min slack " + fmt(c.min_slack));
    }
    o.require(certified >= 2, "fewer than two certified FB runs");
    if (o.pass) o.detail = std::to_string(certified) + " certified FB runs checked";
    return o;
}

Outcome criterion10(std::chrono::steady_clock::time_point suite_start)
{
    Outcome o;
    auto a = th::run_experiment(th::preset("poisson_single_loop"));
    auto b = th::run_experiment(th::preset("poisson_single_loop"));
    o.require(th::trace_csv(a.trace) == th::trace_csv(b.trace), "traces differ");
    const long n = static_cast<long>(a.trace.rows.size());
    o.require(a.summary.counters.inner_steps == n && a.summary.counters.adjoint_steps == n,
              "counters " + std::to_string(a.summary.counters.inner_steps) + "/" +
                  std::to_string(a.summary.counters.adjoint_steps) + " for " + std::to_string(n) + " iterations");
    o.require(a.summary.counters.lu_solves == 0, "single-loop run factorised a matrix");
    const double secs = seconds_since(suite_start);
    o.require(secs < kSuiteSeconds, "acceptance runtime " + fmt(secs) + " s");
    if (o.pass) o.detail = "identical traces, " + std::to_string(n) + " inner/adjoint steps, " + fmt(secs) + " s";
    return o;
}

} // namespace

int main()
{
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"recursion bound", criterion1},
        {"theta closed form", criterion2},
        {"inner tracking", criterion3},
        {"gradient error bound", criterion4},
        {"single-loop convergence", criterion5},
        {"operator-relative lemmas", criterion6},
        {"exact PDPS", criterion7},
        {"adjoint mismatch", criterion8},
        {"descent and quasi-monotonicity", criterion9},
        {"determinism and cost", [t0] { return criterion10(t0); }},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome r;
        try {
            r = criteria[i].second();
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        std::printf("%s %2zu %-32s %s\n", r.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), r.detail.c_str());
        failed += r.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
