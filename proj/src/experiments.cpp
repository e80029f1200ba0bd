#include "freshquery/experiments.hpp"

#include "freshquery/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace freshq {

using nlohmann::json;

namespace {

json parse_json(std::string_view text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigParse, what + ": " + e.what());
    }
}

// Replaces every string equal to `name` by `value`.
json substitute(const json& j, const std::string& name, double value) {
    if (j.is_string() && j.get<std::string>() == name) return value;
    if (j.is_array()) {
        json out = json::array();
        for (const auto& e : j) out.push_back(substitute(e, name, value));
        return out;
    }
    if (j.is_object()) {
        json out = json::object();
        for (const auto& [k, v] : j.items()) out[k] = substitute(v, name, value);
        return out;
    }
    return j;
}

double number(const json& j, const std::string& where) {
    if (!j.is_number()) throw Error(ErrorCode::ConfigParse, where + " must be a number");
    return j.get<double>();
}

DelayDistribution delay_from_json(const json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("kind")) {
        throw Error(ErrorCode::ConfigParse, where + " needs a \"kind\"");
    }
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "deterministic") return DelayDistribution::deterministic(number(j.value("value", json()), where + ".value"));
    if (kind == "exponential") return DelayDistribution::exponential(number(j.value("rate", json()), where + ".rate"));
    if (kind == "atoms") {
        if (!j.contains("atoms") || !j["atoms"].is_array()) {
            throw Error(ErrorCode::ConfigParse, where + ".atoms must be a list of [value, prob]");
        }
        std::vector<Atom> atoms;
        for (const auto& a : j["atoms"]) {
            if (!a.is_array() || a.size() != 2) {
                throw Error(ErrorCode::ConfigParse, where + ".atoms entries are [value, prob]");
            }
            atoms.push_back({number(a[0], where + " atom value"), number(a[1], where + " atom prob")});
        }
        return DelayDistribution::discrete(std::move(atoms));
    }
    throw Error(ErrorCode::ConfigParse, where + ": unknown kind \"" + kind + "\"");
}

GeneratorMatrix generator_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw Error(ErrorCode::ConfigParse, "generator must be a list of rows");
    const auto n = static_cast<Eigen::Index>(j.size());
    Matrix q(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
            throw Error(ErrorCode::NonSquare, "generator row " + std::to_string(r + 1) + " has the wrong length");
        }
        for (Eigen::Index c = 0; c < n; ++c) q(r, c) = number(row[static_cast<std::size_t>(c)], "generator entry");
    }
    return GeneratorMatrix::validate(q);
}

std::string binary_generator(double alpha, double beta) {
    json g = json::array({json::array({-alpha, alpha}), json::array({beta, -beta})});
    return g.dump();
}

const std::string kTwoAtomBackward = R"({"kind":"atoms","atoms":[[0,0.5],["d1",0.5]]})";
const std::string kZeroForward = R"({"kind":"deterministic","value":0})";

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

std::vector<double> default_sweep() {
    std::vector<double> v;
    const double lo = 0.05;
    const double hi = 3.0;
    for (int k = 0; k < 16; ++k) v.push_back(lo * std::pow(hi / lo, k / 15.0));
    v.back() = hi;
    return v;
}

std::vector<std::string> preset_names() { return {"exp1", "exp2", "exp3"}; }

ExperimentConfig preset(std::string_view name) {
    ExperimentConfig cfg;
    cfg.name = std::string(name);
    cfg.forward_json = kZeroForward;
    cfg.backward_json = kTwoAtomBackward;
    cfg.sweep_values = default_sweep();
    cfg.output = cfg.name + ".csv";
    if (name == "exp1") {
        cfg.generator_json = binary_generator(1.0, 0.1);
    } else if (name == "exp2") {
        cfg.generator_json = binary_generator(0.6, 0.4);
    } else if (name == "exp3") {
        cfg.generator_json = binary_generator(1.0, 0.1);
        cfg.forward_json = R"({"kind":"atoms","atoms":[[0.3,0.3],[0.5,0.3],[1,0.4]]})";
    } else {
        throw Error(ErrorCode::ConfigParse, "unknown preset \"" + std::string(name) + "\"");
    }
    return cfg;
}

ExperimentConfig parse_config(std::string_view json_text) {
    const json j = parse_json(json_text, "config");
    if (!j.is_object()) throw Error(ErrorCode::ConfigParse, "config must be a JSON object");
    ExperimentConfig cfg;
    try {
        cfg.name = j.value("name", std::string("experiment"));
        if (!j.contains("generator")) throw Error(ErrorCode::ConfigParse, "missing \"generator\"");
        cfg.generator_json = j["generator"].dump();
        cfg.estimator = parse_estimator(j.value("estimator", std::string("martingale")));
        cfg.forward_json = j.contains("forward_delay") ? j["forward_delay"].dump() : kZeroForward;
        if (!j.contains("backward_delay")) throw Error(ErrorCode::ConfigParse, "missing \"backward_delay\"");
        cfg.backward_json = j["backward_delay"].dump();
        cfg.w_max = j.value("w_max", 1.5);
        if (!(cfg.w_max > 0.0)) throw Error(ErrorCode::ConfigParse, "w_max must be positive");

        cfg.sweep_values = default_sweep();
        if (j.contains("sweep")) {
            const json& s = j["sweep"];
            cfg.sweep_parameter = s.value("parameter", std::string("d1"));
            if (s.contains("values")) {
                cfg.sweep_values = s["values"].get<std::vector<double>>();
            } else if (s.contains("logspace")) {
                const auto ls = s["logspace"].get<std::vector<double>>();
                if (ls.size() != 3 || !(ls[0] > 0.0) || !(ls[1] >= ls[0]) || ls[2] < 1) {
                    throw Error(ErrorCode::ConfigParse, "sweep.logspace is [lo, hi, count]");
                }
                const auto count = static_cast<int>(ls[2]);
                cfg.sweep_values.clear();
                for (int k = 0; k < count; ++k) {
                    cfg.sweep_values.push_back(
                        count == 1 ? ls[0] : ls[0] * std::pow(ls[1] / ls[0], k / double(count - 1)));
                }
            }
        }
        if (cfg.sweep_values.empty()) throw Error(ErrorCode::ConfigParse, "empty sweep");

        if (j.contains("policies")) {
            cfg.policies = j["policies"].get<std::vector<std::string>>();
            for (const auto& p : cfg.policies) {
                if (std::find(kPolicyNames.begin(), kPolicyNames.end(), p) == kPolicyNames.end()) {
                    throw Error(ErrorCode::ConfigParse, "unknown policy \"" + p + "\"");
                }
            }
        }
        if (j.contains("sim")) {
            const json& s = j["sim"];
            if (s.is_boolean() && !s.get<bool>()) {
                cfg.sim.reset();
            } else if (s.is_object()) {
                SimConfig sc;
                sc.cycles = s.value("cycles", sc.cycles);
                sc.seed = s.value("seed", sc.seed);
                sc.burn_in = s.value("burn_in", sc.burn_in);
                sc.batches = s.value("batches", sc.batches);
                if (sc.cycles <= sc.burn_in || sc.batches == 0 || sc.cycles < sc.batches) {
                    throw Error(ErrorCode::ConfigParse, "sim needs cycles > burn_in and cycles >= batches > 0");
                }
                cfg.sim = sc;
            } else {
                throw Error(ErrorCode::ConfigParse, "sim must be an object or false");
            }
        }
        cfg.output = j.value("output", cfg.name + ".csv");
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigParse, e.what());
    }
    // Catch malformed chains and delays now rather than mid-sweep.
    try {
        for (double v : cfg.sweep_values) instantiate(cfg, v);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ConfigParse) throw;
        throw Error(ErrorCode::ConfigParse, std::string("invalid model: ") + e.what());
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& preset_or_path) {
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), preset_or_path) != names.end()) return preset(preset_or_path);
    std::ifstream in(preset_or_path);
    if (!in) throw Error(ErrorCode::ConfigParse, "no preset or readable file named \"" + preset_or_path + "\"");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

SweepPoint instantiate(const ExperimentConfig& cfg, double value) {
    auto block = [&](const std::string& text, const std::string& what) {
        return substitute(parse_json(text, what), cfg.sweep_parameter, value);
    };
    try {
        return SweepPoint{value, generator_from_json(block(cfg.generator_json, "generator")),
                          delay_from_json(block(cfg.forward_json, "forward_delay"), "forward_delay"),
                          delay_from_json(block(cfg.backward_json, "backward_delay"), "backward_delay")};
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ConfigParse, e.what());
    }
}

PolicyResult synthesize(const FreshnessModel& model, std::string_view policy,
                        const OptimizerOptions& opts) {
    if (policy == "zw") return zero_wait_policy(model);
    if (policy == "cw") return constant_wait_policy(model, opts);
    if (policy == "state_ind") return state_independent_policy(model, opts);
    if (policy == "delay_ind") return delay_independent_policy(model, opts);
    if (policy == "greedy") return greedy_policy(model, opts);
    if (policy == "opt_wait") return optimal_policy(model, opts);
    throw Error(ErrorCode::InvalidArgument, "unknown policy \"" + std::string(policy) + "\"");
}

std::uint64_t derived_seed(std::uint64_t base, std::size_t sweep_index, std::size_t policy_index) {
    return splitmix64(splitmix64(base) ^ (static_cast<std::uint64_t>(sweep_index) << 16 |
                                          static_cast<std::uint64_t>(policy_index)));
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
    const std::size_t points = cfg.sweep_values.size();
    std::vector<std::vector<ResultRow>> per_point(points);
    std::vector<std::exception_ptr> failures(points);
    OptimizerOptions oo;
    oo.w_max = cfg.w_max;
    const bool sim = opts.simulate && cfg.sim.has_value();
    const std::uint64_t base_seed = opts.seed.value_or(cfg.sim ? cfg.sim->seed : 1);

    auto run_point = [&](std::size_t idx) {
        const double value = cfg.sweep_values[idx];
        const SweepPoint sp = instantiate(cfg, value);
        const FreshnessModel model(sp.generator, cfg.estimator, sp.forward, sp.backward);
        for (std::size_t p = 0; p < cfg.policies.size(); ++p) {
            const PolicyResult r = synthesize(model, cfg.policies[p], oo);
            ResultRow row{value, cfg.policies[p], r.mbf, std::nullopt, std::nullopt, r.policy.summary()};
            if (sim) {
                SimConfig sc = *cfg.sim;
                sc.seed = derived_seed(base_seed, idx, p);
                const SimResult s = simulate(model, r.policy, sc);
                row.mbf_sim = s.mbf_hat;
                row.sim_stderr = s.stderr_mbf;
            }
            per_point[idx].push_back(std::move(row));
        }
    };

    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> done{0};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (std::size_t idx = next++; idx < points; idx = next++) {
            try {
                run_point(idx);
            } catch (...) {
                failures[idx] = std::current_exception();
            }
            const std::size_t finished = ++done;
            if (opts.progress) {
                std::lock_guard lock(progress_mutex);
                opts.progress(cfg.sweep_values[idx], finished, points);
            }
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(opts.workers, 1, points);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    for (std::size_t idx = 0; idx < points; ++idx) {
        if (!failures[idx]) continue;
        const double value = cfg.sweep_values[idx];
        try {
            std::rethrow_exception(failures[idx]);
        } catch (const std::exception& e) {
            throw ExperimentError(value, cfg.sweep_parameter + "=" + format9(value) + ": " + e.what());
        }
    }
    std::vector<ResultRow> rows;
    for (auto& pr : per_point) {
        for (auto& r : pr) rows.push_back(std::move(r));
    }
    return rows;
}

std::string format9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string to_csv(const std::vector<ResultRow>& rows) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const ResultRow& r : rows) {
        out += format9(r.sweep_value) + ',' + r.policy + ',' + format9(r.mbf_analytic) + ',';
        out += (r.mbf_sim ? format9(*r.mbf_sim) : std::string()) + ',';
        out += (r.sim_stderr ? format9(*r.sim_stderr) : std::string()) + ',';
        out += r.policy_summary + '\n';
    }
    return out;
}

std::vector<ResultRow> parse_csv(std::string_view text) {
    std::vector<std::string> lines;
    for (auto& l : split(text, '\n')) {
        if (!l.empty() && l.back() == '\r') l.pop_back();
        if (!l.empty()) lines.push_back(std::move(l));
    }
    if (lines.empty()) throw Error(ErrorCode::MissingColumn, "empty CSV");
    const auto header = split(lines.front(), ',');
    auto column = [&](const std::string& name, bool required) -> std::ptrdiff_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            if (required) throw Error(ErrorCode::MissingColumn, "CSV has no column \"" + name + "\"");
            return -1;
        }
        return it - header.begin();
    };
    const auto c_sweep = column("sweep_value", true);
    const auto c_policy = column("policy", true);
    const auto c_mbf = column("mbf_analytic", true);
    const auto c_sim = column("mbf_sim", false);
    const auto c_err = column("sim_stderr", false);
    const auto c_summary = column("policy_summary", false);

    auto to_double = [](const std::string& s) -> double {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw Error(ErrorCode::ConfigParse, "not a number in CSV: \"" + s + "\"");
        }
    };
    std::vector<ResultRow> rows;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto f = split(lines[li], ',');
        if (f.size() != header.size()) {
            throw Error(ErrorCode::ConfigParse, "CSV line " + std::to_string(li + 1) + " has " +
                                                    std::to_string(f.size()) + " fields");
        }
        ResultRow r;
        r.sweep_value = to_double(f[c_sweep]);
        r.policy = f[c_policy];
        r.mbf_analytic = to_double(f[c_mbf]);
        if (c_sim >= 0 && !f[c_sim].empty()) r.mbf_sim = to_double(f[c_sim]);
        if (c_err >= 0 && !f[c_err].empty()) r.sim_stderr = to_double(f[c_err]);
        if (c_summary >= 0) r.policy_summary = f[c_summary];
        rows.push_back(std::move(r));
    }
    return rows;
}

ComparisonReport compare_policies(const std::vector<ResultRow>& rows, double tolerance) {
    std::vector<double> order;
    std::map<double, std::vector<std::pair<std::string, double>>> groups;
    for (const ResultRow& r : rows) {
        if (!groups.count(r.sweep_value)) order.push_back(r.sweep_value);
        groups[r.sweep_value].emplace_back(r.policy, r.mbf_analytic);
    }
    std::size_t distinct = 0;
    {
        std::vector<std::string> names;
        for (const ResultRow& r : rows) names.push_back(r.policy);
        std::sort(names.begin(), names.end());
        distinct = static_cast<std::size_t>(std::unique(names.begin(), names.end()) - names.begin());
    }
    if (distinct < 2) throw Error(ErrorCode::InvalidArgument, "need at least two policies to compare");

    ComparisonReport rep;
    for (double v : order) {
        auto ranked = groups[v];
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        auto find = [&](const std::string& name) -> const double* {
            for (const auto& [n, m] : groups[v]) {
                if (n == name) return &m;
            }
            return nullptr;
        };
        auto check = [&](const std::string& better, const std::string& worse) {
            const double* b = find(better);
            const double* w = find(worse);
            if (b && w && *b < *w - tolerance) rep.violations.push_back({v, better, worse, *w - *b});
        };
        for (const auto& name : kPolicyNames) {
            if (name != "opt_wait") check("opt_wait", name);
        }
        check("state_ind", "cw");
        check("cw", "zw");
        check("state_ind", "zw");
        rep.rankings.emplace_back(v, std::move(ranked));
    }
    return rep;
}

std::string ComparisonReport::to_text() const {
    std::string out;
    for (const auto& [v, ranked] : rankings) {
        out += format9(v) + ":";
        for (std::size_t k = 0; k < ranked.size(); ++k) {
            out += (k == 0 ? " " : " > ") + ranked[k].first + "=" + format9(ranked[k].second);
        }
        out += '\n';
    }
    for (const Violation& x : violations) {
        out += "VIOLATION at " + format9(x.sweep_value) + ": " + x.better + " below " + x.worse +
               " by " + format9(x.gap) + '\n';
    }
    out += violations.empty() ? "no violations\n"
                              : std::to_string(violations.size()) + " violation(s)\n";
    return out;
}

}  // namespace freshq
