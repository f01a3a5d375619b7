#pragma once

#include <string>
#include <vector>

#include "tracksplit/core.hpp"
#include "tracksplit/operator_core.hpp"

namespace tracksplit {

/**
 * @brief One outer iteration k.
 *
 * `x` is x^k; `u`, `w` are the inner and adjoint iterates produced during step k (u^{k+1}, w^{k+1});
 * `su`, `sw` the exact S_u(x^k), S_w(x^k). Ledger quantities are evaluated at x^{k+1}.
 * For the basic adjoint, `w` and `sw` hold p^{k+1} and S_u'(x^k) flattened column-major.
 */
struct TraceRow {
    long k = 0;
    Vector x;
    Vector u;
    Vector w;
    Vector su;
    Vector sw;
    Vector grad_estimate;
    Vector grad_exact;
    Vector x_next;
    Vector q_tilde;
    Vector dG;
    Vector mismatch;
    double grad_error = 0.0;
    double e_pk = 0.0;
    double e_lip = 0.0;
    double err_desc = 0.0;
    double err_mono = 0.0;
    double gap = 0.0;
    double step_norm_M = 0.0;
    double dist_to_xbar_M = kNaN;
    double residual = 0.0;
    double lambda_sq = 0.0;
};

struct RunCounters {
    long inner_steps = 0;
    long adjoint_steps = 0;
    long exact_inner_solves = 0;
    long exact_adjoint_solves = 0;
    long lu_solves = 0;
    long newton_iterations = 0;
    /// Deterministic flop model: 2n² per splitting step, (2/3)n³ + 2n² per LU solve.
    double work = 0.0;
};

enum class RunStatus { Converged, Budget, LeftOmega };

inline const char* to_string(RunStatus s)
{
    switch (s) {
    case RunStatus::Converged: return "converged";
    case RunStatus::Budget: return "budget";
    case RunStatus::LeftOmega: return "left-Omega";
    }
    return "?";
}

struct IterateTrace {
    std::string method;
    std::vector<TraceRow> rows;
    RunStatus status = RunStatus::Budget;
    Vector x0;
    Vector final_x;
    double dist0_M = kNaN;
    SymOperator M;
    SkewOperator Xi;
    RunCounters counters;
    std::vector<std::string> events;
    double p = 1.0;
    /// θ(p) of the run's error ledger; 0 without one.
    double theta = 0.0;
    double wall_seconds = 0.0;

    bool empty() const { return rows.empty(); }
};

} // namespace tracksplit
