#include "freshquery/errors.hpp"
#include "freshquery/experiments.hpp"
#include "freshquery/policy_opt.hpp"
#include "freshquery/simulator.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace freshq;

namespace {

py::dict report_dict(const FreshnessReport& r) {
    py::dict d;
    d["mbf"] = r.mbf;
    d["numerator"] = r.numerator;
    d["denominator"] = r.denominator;
    d["phi"] = r.phi;
    d["per_state_g"] = r.per_state_g;
    d["per_state_wait"] = r.per_state_wait;
    return d;
}

py::list rows_to_list(const std::vector<ResultRow>& rows) {
    py::list out;
    for (const ResultRow& r : rows) {
        py::dict d;
        d["sweep_value"] = r.sweep_value;
        d["policy"] = r.policy;
        d["mbf_analytic"] = r.mbf_analytic;
        d["mbf_sim"] = r.mbf_sim ? py::cast(*r.mbf_sim) : py::none();
        d["sim_stderr"] = r.sim_stderr ? py::cast(*r.sim_stderr) : py::none();
        d["policy_summary"] = r.policy_summary;
        out.append(d);
    }
    return out;
}

ExperimentConfig config_from(const std::string& preset_path_or_json) {
    const auto first = preset_path_or_json.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && preset_path_or_json[first] == '{') return parse_config(preset_path_or_json);
    return load_config(preset_path_or_json);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Freshness of a remotely monitored Markov chain under query-waiting policies";

    static py::exception<Error> error(m, "FreshQueryError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(error, e.what());
        } catch (const ExperimentError& e) {
            py::set_error(error, e.what());
        }
    });

    py::class_<GeneratorMatrix>(m, "Generator")
        .def(py::init([](const Matrix& q) { return GeneratorMatrix::validate(q); }), py::arg("rates"))
        .def_static("binary", &GeneratorMatrix::binary, py::arg("alpha"), py::arg("beta"))
        .def_property_readonly("rates", &GeneratorMatrix::rates)
        .def_property_readonly("size", &GeneratorMatrix::size)
        .def("stationary", [](const GeneratorMatrix& g) { return stationary_distribution(g).pi; })
        .def("transition", [](const GeneratorMatrix& g, double t) { return transition_probabilities(g, t).probs; },
             py::arg("t"));

    py::class_<DelayDistribution>(m, "Delay")
        .def_static("deterministic", &DelayDistribution::deterministic, py::arg("value"))
        .def_static("exponential", &DelayDistribution::exponential, py::arg("rate"))
        .def_static(
            "atoms",
            [](const std::vector<std::pair<double, double>>& atoms) {
                std::vector<Atom> a;
                for (const auto& [v, p] : atoms) a.push_back({v, p});
                return DelayDistribution::discrete(std::move(a));
            },
            py::arg("atoms"))
        .def_property_readonly("mean", &DelayDistribution::mean)
        .def("cdf", &DelayDistribution::cdf, py::arg("x"))
        .def("__repr__", &DelayDistribution::describe);

    py::class_<WaitingPolicy>(m, "Policy")
        .def_static("zero_wait", &WaitingPolicy::zero_wait)
        .def_static("constant", &WaitingPolicy::constant, py::arg("wait"), py::arg("w_max") = 1.5)
        .def_static("delay_independent", &WaitingPolicy::delay_independent, py::arg("waits"),
                    py::arg("w_max") = 1.5)
        .def_static(
            "state_independent",
            [](const std::vector<std::pair<double, double>>& table, double w_max) {
                std::vector<DelayWaitFn::Entry> e;
                for (const auto& [d, w] : table) e.push_back({d, w});
                return WaitingPolicy::state_independent(DelayWaitFn::table(std::move(e)), w_max);
            },
            py::arg("table"), py::arg("w_max") = 1.5)
        .def("wait", &WaitingPolicy::wait, py::arg("state"), py::arg("delay"))
        .def_property_readonly("w_max", &WaitingPolicy::w_max)
        .def_property_readonly("form", [](const WaitingPolicy& w) { return std::string(to_string(w.form())); })
        .def("table_rows", &WaitingPolicy::table_rows)
        .def("__repr__", &WaitingPolicy::summary);

    py::class_<FreshnessModel>(m, "Model")
        .def(py::init([](GeneratorMatrix g, const std::string& estimator, DelayDistribution forward,
                         DelayDistribution backward) {
                 return FreshnessModel(std::move(g), parse_estimator(estimator), std::move(forward),
                                       std::move(backward));
             }),
             py::arg("generator"), py::arg("estimator") = "martingale", py::arg("forward"), py::arg("backward"))
        .def_property_readonly("pi", &FreshnessModel::pi)
        .def_property_readonly("mean_z", &FreshnessModel::mean_z)
        .def("match_probability", [](const FreshnessModel& fm, std::size_t i, double t) { return fm.match().value(i, t); },
             py::arg("state"), py::arg("t"));

    m.def("mbf", [](const FreshnessModel& fm, const WaitingPolicy& w) { return report_dict(mbf_analytic(fm, w)); },
          py::arg("model"), py::arg("policy"), "Analytic mean binary freshness and its parts.");
    m.def("sampled_chain", [](const FreshnessModel& fm, const WaitingPolicy& w) {
        const SampledChain sc = sampled_chain(fm, w);
        return py::make_tuple(sc.p_tilde, sc.phi);
    }, py::arg("model"), py::arg("policy"));

    m.def(
        "synthesize",
        [](const FreshnessModel& fm, const std::string& name, double w_max) {
            OptimizerOptions oo;
            oo.w_max = w_max;
            const PolicyResult r = synthesize(fm, name, oo);
            return py::make_tuple(r.policy, r.mbf);
        },
        py::arg("model"), py::arg("policy"), py::arg("w_max") = 1.5,
        "Builds one of zw, cw, state_ind, delay_ind, greedy, opt_wait; returns (policy, mbf).");

    m.def(
        "simulate",
        [](const FreshnessModel& fm, const WaitingPolicy& w, std::uint64_t cycles, std::uint64_t seed) {
            SimConfig cfg;
            cfg.cycles = cycles;
            cfg.seed = seed;
            cfg.burn_in = std::min<std::uint64_t>(cfg.burn_in, cycles / 10);
            const SimResult r = simulate(fm, w, cfg);
            py::dict d;
            d["mbf"] = r.mbf_hat;
            d["stderr"] = r.stderr_mbf;
            d["phi"] = r.phi_hat;
            d["mean_cycle"] = r.mean_cycle;
            return d;
        },
        py::arg("model"), py::arg("policy"), py::arg("cycles") = 1000000, py::arg("seed") = 1);

    m.attr("POLICIES") = kPolicyNames;
    m.def("preset_names", &preset_names);
    m.def(
        "run",
        [](const std::string& target, bool simulate, std::optional<std::uint64_t> seed, std::size_t workers) {
            const ExperimentConfig cfg = config_from(target);
            RunOptions o;
            o.simulate = simulate;
            o.seed = seed;
            o.workers = workers;
            std::vector<ResultRow> rows;
            {
                py::gil_scoped_release release;
                rows = run_experiment(cfg, o);
            }
            return rows_to_list(rows);
        },
        py::arg("target"), py::arg("simulate") = false, py::arg("seed") = py::none(), py::arg("workers") = 1,
        "Runs a preset name, config path or inline JSON config; returns one dict per CSV row.");
    m.def(
        "run_csv",
        [](const std::string& target, bool simulate, std::optional<std::uint64_t> seed) {
            RunOptions o;
            o.simulate = simulate;
            o.seed = seed;
            return to_csv(run_experiment(config_from(target), o));
        },
        py::arg("target"), py::arg("simulate") = false, py::arg("seed") = py::none());
}
