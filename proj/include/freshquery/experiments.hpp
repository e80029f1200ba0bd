#pragma once

#include "freshquery/policy_opt.hpp"
#include "freshquery/simulator.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace freshq {

inline const std::vector<std::string> kPolicyNames = {"zw",        "cw",     "state_ind",
                                                      "delay_ind", "greedy", "opt_wait"};

/// Parsed experiment description. Chain and delay blocks are kept as JSON text
/// because the sweep parameter may appear inside them as a string placeholder.
struct ExperimentConfig {
    std::string name;
    std::string generator_json;
    EstimatorKind estimator = EstimatorKind::Martingale;
    std::string forward_json;
    std::string backward_json;
    double w_max = 1.5;
    std::string sweep_parameter = "d1";
    std::vector<double> sweep_values;
    std::vector<std::string> policies = kPolicyNames;
    std::optional<SimConfig> sim = SimConfig{};
    std::string output;
};

/// d1 grid used by the presets: 16 log-spaced points over [0.05, 3].
std::vector<double> default_sweep();
std::vector<std::string> preset_names();
/// Throws ConfigParse for unknown names.
ExperimentConfig preset(std::string_view name);
ExperimentConfig parse_config(std::string_view json_text);
/// A preset name, or a path to a JSON config file.
ExperimentConfig load_config(const std::string& preset_or_path);

/// The chain and delays of one sweep point.
struct SweepPoint {
    double value = 0.0;
    GeneratorMatrix generator;
    DelayDistribution forward;
    DelayDistribution backward;
};
SweepPoint instantiate(const ExperimentConfig& cfg, double value);

PolicyResult synthesize(const FreshnessModel& model, std::string_view policy,
                        const OptimizerOptions& opts);

struct ResultRow {
    double sweep_value = 0.0;
    std::string policy;
    double mbf_analytic = 0.0;
    std::optional<double> mbf_sim;
    std::optional<double> sim_stderr;
    std::string policy_summary;
};

struct RunOptions {
    std::size_t workers = 1;
    std::optional<std::uint64_t> seed;
    bool simulate = true;
    /// Called once per finished sweep point, from the worker that ran it.
    std::function<void(double value, std::size_t done, std::size_t total)> progress;
};

/// Seed of one (sweep index, policy index) simulation, derived from the base seed.
std::uint64_t derived_seed(std::uint64_t base, std::size_t sweep_index, std::size_t policy_index);

/// Rows in sweep order, policies in config order. Numerical failures are rethrown
/// as ExperimentError naming the sweep point.
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

class ExperimentError : public std::runtime_error {
public:
    ExperimentError(double value, const std::string& what)
        : std::runtime_error(what), value_(value) {}
    double sweep_value() const noexcept { return value_; }

private:
    double value_;
};

inline constexpr std::string_view kCsvHeader =
    "sweep_value,policy,mbf_analytic,mbf_sim,sim_stderr,policy_summary";

/// %.9g formatting used for every number written to CSV.
std::string format9(double v);
std::string to_csv(const std::vector<ResultRow>& rows);
/// Throws MissingColumn when a required column is absent.
std::vector<ResultRow> parse_csv(std::string_view text);

struct Violation {
    double sweep_value = 0.0;
    std::string better;
    std::string worse;
    double gap = 0.0;
};

struct ComparisonReport {
    /// Per sweep value, policies ordered by analytic MBF (descending).
    std::vector<std::pair<double, std::vector<std::pair<std::string, double>>>> rankings;
    std::vector<Violation> violations;

    std::string to_text() const;
};

/// Checks opt_wait >= every other policy and state_ind >= cw >= zw at each sweep value.
ComparisonReport compare_policies(const std::vector<ResultRow>& rows, double tolerance = 1e-6);

}  // namespace freshq
