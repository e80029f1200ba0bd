// freshquery: sweep runner, CSV checker and policy printer.

#include "freshquery/errors.hpp"
#include "freshquery/experiments.hpp"

#include "CLI11.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace freshq;

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

// FRESHQUERY_LOG = trace|debug|info|warn|error|off (default warn).
void setup_logging() {
    auto logger = spdlog::stderr_color_mt("freshquery");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::warn);
    if (const char* env = std::getenv("FRESHQUERY_LOG")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to off; only accept it when asked for.
        if (level != spdlog::level::off || std::string_view(env) == "off") {
            spdlog::set_level(level);
        } else {
            spdlog::warn("ignoring unknown FRESHQUERY_LOG level '{}'", env);
        }
    }
}

int cmd_run(const std::string& target, bool no_sim, std::optional<std::uint64_t> seed,
            std::size_t workers, const std::string& out_path) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(target);
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return kExitConfig;
    }
    RunOptions opts;
    opts.workers = workers;
    opts.seed = seed;
    opts.simulate = !no_sim;
    opts.progress = [&](double value, std::size_t done, std::size_t total) {
        spdlog::info("{}: {}={} done ({}/{})", cfg.name, cfg.sweep_parameter, format9(value), done, total);
    };
    spdlog::info("{}: {} sweep points, {} policies, simulation {}", cfg.name, cfg.sweep_values.size(),
                 cfg.policies.size(), opts.simulate && cfg.sim ? "on" : "off");

    std::vector<ResultRow> rows;
    try {
        rows = run_experiment(cfg, opts);
    } catch (const ExperimentError& e) {
        spdlog::error("{}", e.what());
        return kExitNumeric;
    }
    for (const ResultRow& r : rows) {
        spdlog::debug("{} {} mbf={} {}", format9(r.sweep_value), r.policy, format9(r.mbf_analytic),
                      r.policy_summary);
    }
    const std::string path = out_path.empty() ? cfg.output : out_path;
    const std::string csv = to_csv(rows);
    if (path == "-") {
        std::cout << csv;
    } else {
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            spdlog::error("cannot write {}", path);
            return kExitConfig;
        }
        out << csv;
        spdlog::info("wrote {} rows to {}", rows.size(), path);
    }
    return kExitOk;
}

int cmd_compare(const std::string& csv_path) {
    std::ifstream in(csv_path, std::ios::binary);
    if (!in) {
        spdlog::error("cannot read {}", csv_path);
        return kExitConfig;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        const ComparisonReport rep = compare_policies(parse_csv(ss.str()));
        std::cout << rep.to_text();
        return rep.violations.empty() ? kExitOk : kExitViolation;
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return kExitConfig;
    }
}

int cmd_policy(const std::string& target, double d1, const std::string& policy) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(target);
        const SweepPoint sp = instantiate(cfg, d1);
        const FreshnessModel model(sp.generator, cfg.estimator, sp.forward, sp.backward);
        OptimizerOptions oo;
        oo.w_max = cfg.w_max;
        const PolicyResult r = synthesize(model, policy, oo);
        std::cout << "policy " << policy << " (" << to_string(r.policy.form()) << ") at "
                  << cfg.sweep_parameter << "=" << format9(d1) << "\n";
        for (const auto& row : r.policy.table_rows()) std::cout << row << "\n";
        std::cout << "mbf " << format9(r.mbf) << "\n";
        return kExitOk;
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return e.code() == ErrorCode::ConfigParse || e.code() == ErrorCode::InvalidArgument ? kExitConfig
                                                                                           : kExitNumeric;
    }
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Query-waiting policies and freshness of a remotely monitored Markov chain"};
    app.require_subcommand(1);

    std::string target;
    bool no_sim = false;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 1;
    std::string out_path;
    auto* run = app.add_subcommand("run", "Run a preset or JSON config and write the CSV dataset");
    run->add_option("target", target, "Preset name (exp1, exp2, exp3) or config path")->required();
    run->add_flag("--no-sim", no_sim, "Skip Monte Carlo simulation");
    run->add_option("--seed", seed, "Base seed for the simulations");
    run->add_option("--workers", workers, "Sweep points run in parallel")->check(CLI::PositiveNumber);
    run->add_option("--out", out_path, "Output CSV path ('-' for stdout)");

    std::string csv_path;
    auto* compare = app.add_subcommand("compare", "Rank policies in a CSV and check the containment chain");
    compare->add_option("csv", csv_path, "CSV written by 'run'")->required();

    double d1 = 0.0;
    std::string policy;
    auto* pol = app.add_subcommand("policy", "Print the synthesized wait table for one sweep value");
    pol->add_option("target", target, "Preset name or config path")->required();
    pol->add_option("--d1", d1, "Sweep value")->required();
    pol->add_option("--policy", policy, "zw, cw, state_ind, delay_ind, greedy or opt_wait")
        ->required()
        ->check(CLI::IsMember(kPolicyNames));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (*run) return cmd_run(target, no_sim, seed, workers, out_path);
    if (*compare) return cmd_compare(csv_path);
    return cmd_policy(target, d1, policy);
}
