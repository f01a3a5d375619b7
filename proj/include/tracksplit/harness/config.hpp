#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tracksplit/tracksplit.hpp"

namespace tracksplit::harness {

using json = nlohmann::json;

/// Malformed or inconsistent configuration; `field` names the offending key path.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, const std::string& msg)
        : std::runtime_error("config field '" + field + "': " + msg), field_(std::move(field))
    {
    }
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct InstanceConfig {
    std::string kind = "quadratic";
    double gamma = 1.0;
    Vector target;
    std::optional<Box> omega;
    long n = 16;
    std::optional<Vector> x_ref;
};

struct SolverConfig {
    std::string name = "unnamed";
    InstanceConfig instance;
    InnerSpec inner;
    AdjointSpec adjoint;
    OuterSpec outer;
    bool exact_baseline = false;
    double gamma_tilde = 0.5;
    double beta = 1.0;
    double zeta = 1.0;
    double eta = 0.1;
    std::optional<double> p;
    std::string constants_mode = "analytic";
    int samples = 1000;
    double kappa_cap = 3.0;
    double region_radius = 0.0;
    bool printed_elip = false;
    long budget = 500;
    double tolerance = 1e-8;
    std::uint64_t seed = 0;
    std::string warm_start = "zero";
    std::optional<Vector> x0;
    std::optional<Vector> y0;
    std::optional<Vector> xbar;
    std::optional<double> delta;
    std::vector<std::string> checks;
    std::string out_dir;
    json raw;
};

namespace detail {

inline const json* find(const json& j, const char* key) { return j.contains(key) ? &j.at(key) : nullptr; }

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& path)
{
    const json* v = find(j, key);
    if (!v) return fallback;
    try {
        return v->get<T>();
    } catch (const std::exception& e) {
        throw ConfigError(path + key, e.what());
    }
}

inline Vector to_vector(const json& j, const std::string& field)
{
    if (!j.is_array()) throw ConfigError(field, "expected an array of numbers");
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(field, "expected an array of numbers");
        v(static_cast<Index>(i)) = j[i].get<double>();
    }
    return v;
}

inline Matrix to_matrix(const json& j, const std::string& field)
{
    if (!j.is_array() || j.empty() || !j[0].is_array()) throw ConfigError(field, "expected a nonempty array of rows");
    const std::size_t cols = j[0].size();
    Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        Vector row = to_vector(j[r], field);
        if (static_cast<std::size_t>(row.size()) != cols) throw ConfigError(field, "ragged matrix rows");
        m.row(static_cast<Index>(r)) = row.transpose();
    }
    return m;
}

inline std::optional<Vector> opt_vector(const json& j, const char* key, const std::string& path)
{
    const json* v = find(j, key);
    if (!v || v->is_null()) return std::nullopt;
    return to_vector(*v, path + key);
}

inline Box to_box(const json& j, const std::string& field)
{
    if (!j.is_object() || !j.contains("lo") || !j.contains("hi")) throw ConfigError(field, "expected {lo, hi}");
    try {
        return Box(to_vector(j.at("lo"), field + ".lo"), to_vector(j.at("hi"), field + ".hi"));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(field, e.what());
    }
}

inline ProxFunction to_prox(const json& j, const std::string& field)
{
    if (!j.is_object()) throw ConfigError(field, "expected an object with 'kind'");
    const std::string kind = get_or<std::string>(j, "kind", "zero", field + ".");
    try {
        if (kind == "zero") return ProxFunction::zero();
        if (kind == "quadratic")
            return ProxFunction::quadratic(get_or<double>(j, "weight", 1.0, field + "."),
                                           opt_vector(j, "center", field + ".").value_or(Vector()));
        if (kind == "quadratic_on_box")
            return ProxFunction::quadratic_on_box(get_or<double>(j, "weight", 1.0, field + "."),
                                                  opt_vector(j, "center", field + ".").value_or(Vector()),
                                                  to_vector(j.at("lo"), field + ".lo"),
                                                  to_vector(j.at("hi"), field + ".hi"));
        if (kind == "soft_threshold") return ProxFunction::soft_threshold(get_or<double>(j, "weight", 1.0, field + "."));
        if (kind == "box")
            return ProxFunction::box(to_vector(j.at("lo"), field + ".lo"), to_vector(j.at("hi"), field + ".hi"));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(field, e.what());
    }
    throw ConfigError(field + ".kind", "unknown prox kind '" + kind + "'");
}

template <typename E>
E parse_enum(const std::string& s, std::initializer_list<std::pair<const char*, E>> table, const std::string& field)
{
    for (const auto& [name, value] : table)
        if (s == name) return value;
    throw ConfigError(field, "unknown value '" + s + "'");
}

} // namespace detail

/// Parses a configuration object; every missing key takes the documented default.
inline SolverConfig parse_config(const json& j)
{
    using namespace detail;
    if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
    SolverConfig c;
    c.raw = j;
    c.name = get_or<std::string>(j, "name", c.name, "");

    if (const json* ij = find(j, "instance")) {
        auto& ic = c.instance;
        ic.kind = get_or<std::string>(*ij, "kind", ic.kind, "instance.");
        ic.gamma = get_or<double>(*ij, "gamma", ic.gamma, "instance.");
        ic.target = opt_vector(*ij, "target", "instance.").value_or(Vector::Ones(1));
        if (const json* o = find(*ij, "omega")) ic.omega = to_box(*o, "instance.omega");
        ic.n = get_or<long>(*ij, "n", ic.n, "instance.");
        ic.x_ref = opt_vector(*ij, "x_ref", "instance.");
        if (ic.kind != "quadratic" && ic.kind != "saddle" && ic.kind != "poisson" && ic.kind != "none")
            throw ConfigError("instance.kind", "unknown instance kind '" + ic.kind + "'");
    } else {
        c.instance.target = Vector::Ones(1);
    }

    if (const json* in = find(j, "inner")) {
        c.inner.alg = parse_enum<InnerAlgorithm>(get_or<std::string>(*in, "alg", "fb", "inner."),
                                                 {{"fb", InnerAlgorithm::FB},
                                                  {"pdps", InnerAlgorithm::PDPS},
                                                  {"jacobi", InnerAlgorithm::Jacobi},
                                                  {"gauss_seidel", InnerAlgorithm::GaussSeidel}},
                                                 "inner.alg");
        c.inner.tau = get_or<double>(*in, "tau", c.inner.tau, "inner.");
        c.inner.sigma = get_or<double>(*in, "sigma", c.inner.sigma, "inner.");
        c.inner.steps = get_or<int>(*in, "steps", c.inner.steps, "inner.");
    }
    if (const json* ad = find(j, "adjoint")) {
        c.adjoint.variant = parse_enum<AdjointVariant>(get_or<std::string>(*ad, "variant", "reduced", "adjoint."),
                                                       {{"reduced", AdjointVariant::Reduced},
                                                        {"basic", AdjointVariant::Basic}},
                                                       "adjoint.variant");
        c.adjoint.scheme = parse_enum<SplittingScheme>(get_or<std::string>(*ad, "scheme", "jacobi", "adjoint."),
                                                       {{"jacobi", SplittingScheme::Jacobi},
                                                        {"gauss_seidel", SplittingScheme::GaussSeidel}},
                                                       "adjoint.scheme");
        c.adjoint.steps = get_or<int>(*ad, "steps", c.adjoint.steps, "adjoint.");
    }
    if (const json* o = find(j, "outer")) {
        c.outer.alg = parse_enum<OuterAlgorithm>(get_or<std::string>(*o, "alg", "fb", "outer."),
                                                 {{"fb", OuterAlgorithm::FB},
                                                  {"pdps", OuterAlgorithm::PDPS},
                                                  {"pdps_mismatch", OuterAlgorithm::PDPSMismatch}},
                                                 "outer.alg");
        c.outer.tau = get_or<double>(*o, "tau", c.outer.tau, "outer.");
        c.outer.sigma = get_or<double>(*o, "sigma", c.outer.sigma, "outer.");
        c.outer.lambda = get_or<double>(*o, "lambda", c.outer.lambda, "outer.");
        if (const json* g = find(*o, "G")) c.outer.G = to_prox(*g, "outer.G");
        if (const json* g = find(*o, "g")) c.outer.g = to_prox(*g, "outer.g");
        if (const json* h = find(*o, "h_star")) c.outer.h_star = to_prox(*h, "outer.h_star");
        if (const json* k = find(*o, "K")) c.outer.K = to_matrix(*k, "outer.K");
        if (const json* k = find(*o, "K_adj")) c.outer.K_adj_mismatched = to_matrix(*k, "outer.K_adj");
        c.exact_baseline = get_or<bool>(*o, "exact", false, "outer.");
    }
    if (const json* pj = find(j, "params")) {
        c.gamma_tilde = get_or<double>(*pj, "gamma_tilde", c.gamma_tilde, "params.");
        c.beta = get_or<double>(*pj, "beta", c.beta, "params.");
        c.zeta = get_or<double>(*pj, "zeta", c.zeta, "params.");
        c.eta = get_or<double>(*pj, "eta", c.eta, "params.");
        if (const json* p = find(*pj, "p"); p && !p->is_null()) {
            if (!p->is_number()) throw ConfigError("params.p", "expected a number or null");
            c.p = p->get<double>();
        }
        if (const json* d = find(*pj, "delta"); d && !d->is_null()) c.delta = d->get<double>();
        c.printed_elip = get_or<bool>(*pj, "printed_elip", false, "params.");
    }
    if (const json* cj = find(j, "constants")) {
        c.constants_mode = get_or<std::string>(*cj, "mode", c.constants_mode, "constants.");
        if (c.constants_mode != "analytic" && c.constants_mode != "empirical" && c.constants_mode != "none")
            throw ConfigError("constants.mode", "expected analytic, empirical or none");
        c.samples = get_or<int>(*cj, "samples", c.samples, "constants.");
        c.kappa_cap = get_or<double>(*cj, "kappa_cap", c.kappa_cap, "constants.");
        c.region_radius = get_or<double>(*cj, "region_radius", c.region_radius, "constants.");
    }
    if (const json* r = find(j, "run")) {
        c.budget = get_or<long>(*r, "budget", c.budget, "run.");
        c.tolerance = get_or<double>(*r, "tolerance", c.tolerance, "run.");
        c.seed = get_or<std::uint64_t>(*r, "seed", c.seed, "run.");
        c.warm_start = get_or<std::string>(*r, "warm_start", c.warm_start, "run.");
        if (c.warm_start != "zero" && c.warm_start != "presolve")
            throw ConfigError("run.warm_start", "expected zero or presolve");
        c.x0 = opt_vector(*r, "x0", "run.");
        c.y0 = opt_vector(*r, "y0", "run.");
        c.xbar = opt_vector(*r, "xbar", "run.");
    }
    if (const json* ch = find(j, "checks")) {
        try {
            c.checks = ch->get<std::vector<std::string>>();
        } catch (const std::exception& e) {
            throw ConfigError("checks", e.what());
        }
    }
    if (const json* o = find(j, "output")) c.out_dir = get_or<std::string>(*o, "dir", "", "output.");

    if (c.budget < 1) throw ConfigError("run.budget", "must be >= 1");
    if (!(c.tolerance > 0.0)) throw ConfigError("run.tolerance", "must be positive");
    if (c.inner.steps < 1) throw ConfigError("inner.steps", "must be >= 1");
    if (c.adjoint.steps < 1) throw ConfigError("adjoint.steps", "must be >= 1");
    if (!(c.outer.tau > 0.0)) throw ConfigError("outer.tau", "must be positive");
    if (c.gamma_tilde < 0.0) throw ConfigError("params.gamma_tilde", "must be nonnegative");
    if (!(c.beta > 0.0)) throw ConfigError("params.beta", "must be positive");
    if (c.eta < 0.0 || c.eta >= 1.0) throw ConfigError("params.eta", "must lie in [0, 1)");
    return c;
}

inline SolverConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("<file>", "cannot read '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const std::exception& e) {
        throw ConfigError("<file>", std::string("parse error: ") + e.what());
    }
    return parse_config(j);
}

/// Bilevel instance named by the config; empty for kind "none".
inline std::optional<BilevelInstance> build_instance(const SolverConfig& c)
{
    const auto& ic = c.instance;
    try {
        if (ic.kind == "quadratic") return make_quadratic_bilevel(ic.gamma, ic.target, ic.omega);
        if (ic.kind == "saddle") return make_saddle_bilevel(ic.target, ic.omega);
        if (ic.kind == "poisson") return make_parametric_poisson(ic.n, ic.omega, ic.x_ref);
    } catch (const std::exception& e) {
        throw ConfigError("instance", e.what());
    }
    return std::nullopt;
}

/// Outer curvature used by the step checks; empirical when the instance has no closed form.
inline OuterCurvature config_curvature(const SolverConfig& c, const BilevelInstance& inst)
{
    const int samples = std::min(c.samples, 200);
    return estimate_outer_curvature(inst, inst.analytic ? ConstantsMode::Analytic : ConstantsMode::Empirical, samples,
                                    c.seed);
}

/// Load-time re-validation of every step-length condition.
inline void validate_steps(const SolverConfig& c)
{
    auto inst = build_instance(c);
    const bool pd = c.outer.alg != OuterAlgorithm::FB;
    if (!inst && !pd) throw ConfigError("instance.kind", "forward-backward outer method needs an instance");
    if (inst && c.outer.alg == OuterAlgorithm::PDPSMismatch)
        throw ConfigError("instance.kind", "adjoint mismatch runs use f = 0 (kind 'none')");
    if (pd) {
        if (c.outer.K.size() == 0) throw ConfigError("outer.K", "required for primal-dual outer methods");
        if (inst && c.outer.K.cols() != inst->dim_x()) throw ConfigError("outer.K", "column count must equal dim x");
        try {
            validate_outer(c.outer, c.outer.K.cols());
        } catch (const std::exception& e) {
            throw ConfigError("outer.tau", e.what());
        }
    }
    if (inst) {
        const OuterCurvature cur = config_curvature(c, *inst);
        if (!pd && !(c.outer.tau * cur.L < 2.0))
            throw ConfigError("outer.tau", "step check tau*L < 2 fails (tau*L = " + std::to_string(c.outer.tau * cur.L) + ")");
        if (!c.exact_baseline) {
            try {
                if (c.inner.alg == InnerAlgorithm::FB) {
                    if (!inst->fb) throw std::invalid_argument("instance has no forward-backward inner structure");
                    if (!(c.inner.tau > 0.0) || c.inner.tau * inst->fb->lipschitz_f > 1.0 + 1e-12)
                        throw StepSizeError("inner FB needs 0 < tau*L_f <= 1");
                } else if (c.inner.alg == InnerAlgorithm::PDPS) {
                    if (!inst->pdps) throw std::invalid_argument("instance has no primal-dual inner structure");
                    check_inner_pdps_steps(c.inner.tau, c.inner.sigma, inst->pdps->K);
                } else if (!inst->linear) {
                    throw std::invalid_argument("splitting inner solvers need a linear inner system");
                }
            } catch (const std::exception& e) {
                throw ConfigError("inner", e.what());
            }
        }
        const Index n = inst->dim_x();
        if (c.x0 && c.x0->size() != n) throw ConfigError("run.x0", "dimension mismatch");
    } else if (c.x0 && c.x0->size() != c.outer.K.cols()) {
        throw ConfigError("run.x0", "dimension mismatch");
    }
    if (pd && c.y0 && c.y0->size() != c.outer.K.rows()) throw ConfigError("run.y0", "dimension mismatch");
}

} // namespace tracksplit::harness
