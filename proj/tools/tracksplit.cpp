#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tracksplit/harness/presets.hpp"
#include "tracksplit/harness/report.hpp"
#include "tracksplit/harness/runner.hpp"

namespace th = tracksplit::harness;

namespace {

th::SolverConfig resolve(const std::string& config, const std::string& preset)
{
    if (!config.empty() && !preset.empty()) throw th::ConfigError("--config", "give either --config or --preset");
    if (!preset.empty()) return th::preset(preset);
    if (config.empty()) throw th::ConfigError("--config", "a config file or preset is required");
    return th::load_config(config);
}

std::filesystem::path out_dir(const std::string& flag, const th::SolverConfig& c)
{
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("TRACKSPLIT_OUT"); env && *env) return std::filesystem::path(env) / c.name;
    if (!c.out_dir.empty()) return c.out_dir;
    return std::filesystem::path("tracksplit_out") / c.name;
}

std::vector<std::string> split_checks(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

void apply_overrides(th::SolverConfig& c, const CLI::App& sub, std::uint64_t seed, long budget, const std::string& checks)
{
    if (sub.count("--seed")) c.seed = seed;
    if (sub.count("--budget")) {
        if (budget < 1) throw th::ConfigError("--budget", "must be >= 1");
        c.budget = budget;
    }
    if (const auto* opt = sub.get_option_no_throw("--check"); opt && opt->count()) c.checks = split_checks(checks);
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Single-loop bilevel splitting experiments"};
    app.require_subcommand(1);

    std::string config, preset, out, checks, config_b, preset_b;
    std::uint64_t seed = 0;
    long budget = 0;

    auto* run = app.add_subcommand("run", "run one configured experiment");
    run->add_option("--config", config, "JSON configuration file");
    run->add_option("--preset", preset, "shipped preset name");
    run->add_option("--out", out, "output directory");
    run->add_option("--seed", seed, "seed override");
    run->add_option("--budget", budget, "iteration budget override");
    run->add_option("--check", checks, "comma-separated subset of checks");

    auto* cmp = app.add_subcommand("compare", "compare two configurations on one instance");
    cmp->add_option("--config", config, "first configuration");
    cmp->add_option("--preset", preset, "first configuration as preset");
    cmp->add_option("--config-b", config_b, "second configuration");
    cmp->add_option("--preset-b", preset_b, "second configuration as preset");
    cmp->add_option("--out", out, "output directory");
    cmp->add_option("--seed", seed, "seed override");
    cmp->add_option("--budget", budget, "iteration budget override");

    std::string trace;
    auto* rep = app.add_subcommand("report", "summarize a run directory");
    rep->add_option("trace", trace, "run directory or trace.csv")->required();

    app.add_subcommand("list-presets", "list shipped presets");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("list-presets")) {
            for (const auto& [name, src] : th::preset_sources()) std::cout << name << "\n";
            return th::kExitOk;
        }
        if (app.got_subcommand("report")) {
            std::cout << th::report(trace);
            return th::kExitOk;
        }
        if (app.got_subcommand("run")) {
            auto c = resolve(config, preset);
            apply_overrides(c, *run, seed, budget, checks);
            auto res = th::run_experiment(c);
            auto dir = out_dir(out, c);
            th::write_outputs(res, dir);
            std::cout << th::report(dir);
            return res.summary.exit_code;
        }
        auto a = resolve(config, preset);
        auto b = resolve(config_b, preset_b);
        apply_overrides(a, *cmp, seed, budget, "");
        apply_overrides(b, *cmp, seed, budget, "");
        auto result = th::compare(a, b);
        std::filesystem::path dir = !out.empty() ? std::filesystem::path(out)
                                    : std::getenv("TRACKSPLIT_OUT") ? std::filesystem::path(std::getenv("TRACKSPLIT_OUT"))
                                                                     : std::filesystem::path("tracksplit_out");
        std::filesystem::create_directories(dir);
        const auto file = dir / ("compare_" + a.name + "_vs_" + b.name + ".json");
        th::write_file(file, result.document.dump(2) + "\n");
        std::cout << "limit difference " << result.limit_difference << ", speedup " << result.speedup << "\n"
                  << "wrote " << file.string() << "\n";
        return th::kExitOk;
    } catch (const th::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return th::kExitConfigError;
    } catch (const tracksplit::StepSizeError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return th::kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
