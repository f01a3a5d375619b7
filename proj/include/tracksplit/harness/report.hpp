#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "tracksplit/harness/runner.hpp"

namespace tracksplit::harness {

namespace detail {
inline json read_json(const std::filesystem::path& p)
{
    std::ifstream in(p);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    return json::parse(in);
}
} // namespace detail

/// Text summary of a run directory (or of the trace.csv inside it).
inline std::string report(const std::filesystem::path& trace_path)
{
    namespace fs = std::filesystem;
    fs::path dir = fs::is_directory(trace_path) ? trace_path : trace_path.parent_path();
    fs::path csv = fs::is_directory(trace_path) ? dir / "trace.csv" : trace_path;
    std::ifstream in(csv);
    if (!in) throw std::runtime_error("cannot read trace " + csv.string());
    std::string line;
    long rows = -1;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    if (rows <= 0) throw std::runtime_error("empty trace: " + csv.string());

    json summary = detail::read_json(dir / "summary.json");
    json checks = detail::read_json(dir / "checks.json");
    std::ostringstream os;
    os << "run " << summary.value("name", "?") << " (" << summary.value("method", "?") << ")\n";
    os << "  status        " << summary.value("status", "?") << " after " << rows << " iterations\n";
    auto num = [](const json& v) {
        if (v.is_null()) return std::string("n/a");
        char b[32];
        std::snprintf(b, sizeof b, "%.6g", v.get<double>());
        return std::string(b);
    };
    os << "  residual      " << num(summary.value("final_residual", json())) << "\n";
    os << "  regime        " << summary.value("regime", "?") << (summary.value("certified", false) ? " (certified)" : "")
       << ", p_cert " << num(summary.value("p_cert", json())) << ", p_est " << num(summary.value("p_est", json()))
       << "\n";
    os << "  inner/adjoint " << summary.value("inner_steps", 0) << " / " << summary.value("adjoint_steps", 0)
       << " steps, " << summary.value("lu_solves", 0) << " LU solves\n";
    os << "  checks\n";
    for (const auto& c : checks) {
        char b[200];
        std::snprintf(b, sizeof b, "    %-4s %-18s min slack %-12s %s\n", c.value("pass", false) ? "PASS" : "FAIL",
                      c.value("name", "?").c_str(), num(c.value("min_slack", json())).c_str(),
                      c.value("citation", "").c_str());
        os << b;
    }
    return os.str();
}

} // namespace tracksplit::harness
