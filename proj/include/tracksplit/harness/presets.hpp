#pragma once

#include <map>
#include <string>

#include "tracksplit/harness/config.hpp"

namespace tracksplit::harness {

/// Shipped configurations, keyed by name.
inline const std::map<std::string, std::string>& preset_sources()
{
    static const std::map<std::string, std::string> presets = {
        {"bq1_single_loop", R"({
  "name": "bq1_single_loop",
  "instance": {"kind": "quadratic", "gamma": 1.0, "target": [1.0]},
  "inner": {"alg": "fb", "tau": 0.5, "steps": 1},
  "adjoint": {"variant": "reduced", "scheme": "jacobi", "steps": 1},
  "outer": {"alg": "fb", "tau": 0.25, "G": {"kind": "zero"}},
  "params": {"gamma_tilde": 0.84, "beta": 1.0, "eta": 0.1},
  "constants": {"mode": "analytic"},
  "run": {"budget": 500, "tolerance": 1e-8, "seed": 0, "x0": [0.0]},
  "checks": ["descent", "quasi_monotone", "gradient_error", "error_sum", "inner_tracking",
             "adjoint_tracking", "transform_bound", "subdiff_residual"]
})"},
        {"bq1_rate", R"({
  "name": "bq1_rate",
  "instance": {"kind": "quadratic", "gamma": 1.0, "target": [1.0]},
  "inner": {"alg": "fb", "tau": 0.5, "steps": 1},
  "adjoint": {"variant": "reduced", "scheme": "jacobi", "steps": 1},
  "outer": {"alg": "fb", "tau": 0.0049, "G": {"kind": "zero"}},
  "params": {"gamma_tilde": 0.00030625, "beta": 0.5, "eta": 0.1},
  "constants": {"mode": "analytic"},
  "run": {"budget": 2000, "tolerance": 1e-12, "seed": 0, "x0": [0.0]}
})"},
        {"bq1_baseline", R"({
  "name": "bq1_baseline",
  "instance": {"kind": "quadratic", "gamma": 1.0, "target": [1.0]},
  "adjoint": {"variant": "reduced"},
  "outer": {"alg": "fb", "tau": 0.25, "exact": true, "G": {"kind": "zero"}},
  "params": {"gamma_tilde": 0.84, "beta": 1.0, "eta": 0.1},
  "run": {"budget": 500, "tolerance": 1e-8, "x0": [0.0]}
})"},
        {"bq1_bad_tau", R"({
  "name": "bq1_bad_tau",
  "instance": {"kind": "quadratic", "gamma": 1.0, "target": [1.0]},
  "inner": {"alg": "fb", "tau": 0.5, "steps": 1},
  "outer": {"alg": "fb", "tau": 9.0},
  "run": {"budget": 50, "x0": [0.0]}
})"},
        {"poisson_single_loop", R"({
  "name": "poisson_single_loop",
  "instance": {"kind": "poisson", "n": 16, "x_ref": [0.3, 3.0]},
  "inner": {"alg": "jacobi", "steps": 1},
  "adjoint": {"variant": "reduced", "scheme": "jacobi", "steps": 1},
  "outer": {"alg": "fb", "tau": 0.3},
  "params": {"gamma_tilde": 0.5, "beta": 1.0, "eta": 0.1},
  "constants": {"mode": "empirical", "samples": 200},
  "run": {"budget": 1000, "tolerance": 1e-10, "seed": 0, "warm_start": "zero", "x0": [0.7, 2.5]}
})"},
        {"poisson_baseline", R"({
  "name": "poisson_baseline",
  "instance": {"kind": "poisson", "n": 16, "x_ref": [0.3, 3.0]},
  "adjoint": {"variant": "reduced"},
  "outer": {"alg": "fb", "tau": 0.3, "exact": true},
  "params": {"gamma_tilde": 0.5, "beta": 1.0, "eta": 0.1},
  "run": {"budget": 1000, "tolerance": 1e-10, "x0": [0.7, 2.5]}
})"},
        {"pdps_exact_saddle", R"({
  "name": "pdps_exact_saddle",
  "instance": {"kind": "none"},
  "outer": {"alg": "pdps", "tau": 1.0, "sigma": 1.0, "lambda": 0.0, "K": [[1.0]],
            "g": {"kind": "quadratic", "weight": 1.0, "center": [1.0]},
            "h_star": {"kind": "quadratic_on_box", "weight": 1.0, "center": [0.0], "lo": [-2.0], "hi": [2.0]}},
  "params": {"eta": 0.0},
  "run": {"budget": 1000, "tolerance": 1e-13, "x0": [0.0], "y0": [0.0], "xbar": [0.5, 0.5]}
})"},
        {"pdps_mismatch_small", R"({
  "name": "pdps_mismatch_small",
  "instance": {"kind": "none"},
  "outer": {"alg": "pdps_mismatch", "tau": 0.5, "sigma": 0.5, "lambda": 0.0,
            "K": [[1.0, 0.5], [0.0, 1.0]],
            "K_adj": [[1.01, 0.0], [0.5, 1.0]],
            "g": {"kind": "quadratic", "weight": 1.0, "center": [1.0, -1.0]},
            "h_star": {"kind": "quadratic_on_box", "weight": 1.0, "center": [0.0, 0.0], "lo": [-2.0, -2.0], "hi": [2.0, 2.0]}},
  "params": {"eta": 0.0},
  "run": {"budget": 300, "tolerance": 1e-13, "x0": [0.0, 0.0], "y0": [0.0, 0.0]}
})"},
    };
    return presets;
}

inline SolverConfig preset(const std::string& name)
{
    const auto& p = preset_sources();
    auto it = p.find(name);
    if (it == p.end()) throw ConfigError("--preset", "unknown preset '" + name + "'");
    return parse_config(json::parse(it->second));
}

} // namespace tracksplit::harness
