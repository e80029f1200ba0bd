#include "freshquery/policy_opt.hpp"

#include "freshquery/errors.hpp"
#include "freshquery/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace freshq {

namespace {

std::vector<double> wait_grid(const OptimizerOptions& opts) {
    const std::size_t n = std::max<std::size_t>(opts.action_grid, 2);
    std::vector<double> grid(n);
    for (std::size_t k = 0; k < n; ++k) {
        grid[k] = k + 1 == n ? opts.w_max
                             : opts.w_max * static_cast<double>(k) / static_cast<double>(n - 1);
    }
    return grid;
}

// Grid search over [0, w_max] followed by golden-section refinement inside the
// neighbouring grid cells. Strict improvements only, so ties stay at the smaller wait.
template <class F>
double grid_then_polish(F&& objective, const OptimizerOptions& opts) {
    const auto grid = wait_grid(opts);
    std::size_t best = 0;
    double best_value = objective(grid[0]);
    for (std::size_t k = 1; k < grid.size(); ++k) {
        const double v = objective(grid[k]);
        if (v > best_value + 1e-15 * (1.0 + std::abs(best_value))) {
            best = k;
            best_value = v;
        }
    }
    const double lo = grid[best == 0 ? 0 : best - 1];
    const double hi = grid[std::min(best + 1, grid.size() - 1)];
    const double polished = numerics::golden_section_max(objective, lo, hi, opts.polish_tolerance);
    if (objective(polished) > best_value + 1e-15 * (1.0 + std::abs(best_value))) return polished;
    return grid[best];
}

// Bisection on theta using the sign of J*(theta). `inner` returns the maximizing
// candidate together with J*(theta).
template <class Candidate, class Inner>
std::pair<Candidate, DinkelbachState> bisect_theta(Inner&& inner, double tolerance,
                                                   std::vector<DinkelbachState>* trace) {
    double lo = 0.0;
    double hi = 1.0;
    while (hi - lo > tolerance) {
        const double mid = 0.5 * (lo + hi);
        auto [candidate, j] = inner(mid);
        if (trace) trace->push_back({mid, lo, hi, j});
        if (j >= 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    auto [candidate, j] = inner(lo);
    return {std::move(candidate), DinkelbachState{lo, lo, hi, j}};
}

struct InnerSolution {
    DelayWaitFn fn;
    double j_star = 0.0;
};

// Maximizes the linearized objective over W(d) for one profile (aggregate for the
// state-independent policy, one state for the greedy policy).
InnerSolution maximize_linearized(const FreshnessModel& model, const ProfileInfo& info,
                                  double theta, const OptimizerOptions& opts) {
    const DelayDistribution& backward = model.backward();
    auto atom_value = [&](double d, double w) {
        return linearized_atom_value(model, info.profile, d, w, theta);
    };
    if (!backward.is_atomic()) {
        if (!info.monotone || !model.combined().is_absolutely_continuous()) {
            throw Error(ErrorCode::UnsupportedConfiguration,
                        "continuous backward delay needs a monotone match profile; "
                        "discretize the delay first");
        }
        const ThresholdPolicy th = threshold_gamma(model, info.profile, theta, opts.w_max,
                                                   backward.support_max(), opts.gamma_tolerance);
        DelayWaitFn fn = DelayWaitFn::threshold(th.gamma, opts.w_max);
        const auto kinks = fn.kinks();
        const double j =
            model.expect_backward([&](double d) { return atom_value(d, fn(d)); }, kinks);
        return {std::move(fn), j};
    }
    std::vector<DelayWaitFn::Entry> entries;
    double j = 0.0;
    for (const Atom& a : backward.atoms()) {
        const double w = optimal_wait_for_theta(model, info, a.value, theta, opts);
        entries.push_back({a.value, w});
        j += a.prob * atom_value(a.value, w);
    }
    return {DelayWaitFn::table(std::move(entries)), j};
}

std::optional<FreshnessModel> discretized_model(const FreshnessModel& model,
                                                const OptimizerOptions& opts,
                                                bool& too_coarse) {
    too_coarse = false;
    if (model.backward().is_atomic()) return std::nullopt;
    DelayDistribution dt = discretize_delay(model.backward(), opts.delay_atoms);
    too_coarse = std::abs(dt.mean() - model.backward().mean()) > 1e-6;
    return FreshnessModel(model.generator(), model.estimator(), model.forward(), std::move(dt),
                          model.options());
}

}  // namespace

double ThresholdPolicy::wait(double d) const {
    if (is_infinite()) return w_max;
    return std::min(w_max, std::max(0.0, gamma - d));
}

bool ThresholdPolicy::is_infinite() const { return std::isinf(gamma); }

ProfileInfo analyze_profile(const FreshnessModel& model, MatchProfile profile,
                            const OptimizerOptions& opts) {
    ProfileInfo info{std::move(profile)};
    info.monotone = is_monotone_decreasing(info.profile, model.match().horizon(), opts.monotone_grid);
    info.limit = info.profile.limit();
    return info;
}

double linearized_atom_value(const FreshnessModel& model, const MatchProfile& profile, double d,
                             double wait, double theta) {
    return profile.weights().dot(model.fresh_time(d, wait)) - theta * (wait + model.mean_z());
}

double linearized_value_state_ind(const FreshnessModel& model, double theta,
                                  const DelayWaitFn& candidate) {
    const MatchProfile profile = MatchProfile::aggregate(model.match());
    const auto kinks = candidate.kinks();
    return model.expect_backward(
        [&](double d) { return linearized_atom_value(model, profile, d, candidate(d), theta); },
        kinks);
}

double threshold_l(const FreshnessModel& model, const MatchProfile& profile, double gamma) {
    return model.density_weighted_match(profile.weights(), gamma);
}

ThresholdPolicy threshold_gamma(const FreshnessModel& model, const MatchProfile& profile,
                                double theta, double w_max, double d_max, double tolerance) {
    if (!model.combined().is_absolutely_continuous()) {
        throw Error(ErrorCode::DensityUnavailable, "combined delay has atoms");
    }
    auto l = [&](double gamma) { return threshold_l(model, profile, gamma); };
    if (l(0.0) <= theta) return {0.0, w_max};
    double hi = 0.0;
    if (std::isinf(d_max)) {
        if (profile.limit() >= theta) return {kInfinity, w_max};
        hi = std::max(1.0, w_max);
        while (l(hi) >= theta) {
            hi *= 2.0;
            if (hi > 1e7) return {kInfinity, w_max};
        }
    } else {
        hi = d_max + w_max;
        if (l(hi) >= theta) return {kInfinity, w_max};
    }
    double lo = 0.0;
    while (hi - lo > tolerance) {
        const double mid = 0.5 * (lo + hi);
        if (l(mid) >= theta) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return {lo, w_max};
}

double optimal_wait_for_theta(const FreshnessModel& model, const ProfileInfo& info, double d,
                              double theta, const OptimizerOptions& opts) {
    if (info.monotone) {
        if (model.combined().is_absolutely_continuous()) {
            return threshold_gamma(model, info.profile, theta, opts.w_max,
                                   model.backward().support_max(), opts.gamma_tolerance)
                .wait(d);
        }
        if (info.limit >= theta) return opts.w_max;
        if (info.profile.value(d) <= theta) return 0.0;
    }
    return grid_then_polish(
        [&](double w) { return linearized_atom_value(model, info.profile, d, w, theta); }, opts);
}

StateIndependentResult state_independent_policy(const FreshnessModel& model,
                                                const OptimizerOptions& opts) {
    const ProfileInfo info = analyze_profile(model, MatchProfile::aggregate(model.match()), opts);
    StateIndependentResult out;
    auto inner = [&](double theta) {
        InnerSolution s = maximize_linearized(model, info, theta, opts);
        return std::pair<DelayWaitFn, double>{std::move(s.fn), s.j_star};
    };
    auto [fn, state] = bisect_theta<DelayWaitFn>(inner, opts.theta_tolerance, &out.trace);
    out.theta = state.theta;
    out.j_star = state.j_star;
    out.policy = WaitingPolicy::state_independent(std::move(fn), opts.w_max);
    out.report = mbf_analytic(model, out.policy);
    out.mbf = out.report.mbf;
    return out;
}

GreedyResult greedy_policy(const FreshnessModel& model, const OptimizerOptions& opts) {
    GreedyResult out;
    std::vector<DelayWaitFn> per_state;
    for (std::size_t i = 0; i < model.states(); ++i) {
        const ProfileInfo info = analyze_profile(model, MatchProfile::state(model.match(), i), opts);
        auto inner = [&](double theta) {
            InnerSolution s = maximize_linearized(model, info, theta, opts);
            return std::pair<DelayWaitFn, double>{std::move(s.fn), s.j_star};
        };
        auto [fn, state] = bisect_theta<DelayWaitFn>(inner, opts.theta_tolerance, nullptr);
        out.theta_per_state.push_back(state.theta);
        out.j_star_per_state.push_back(state.j_star);
        per_state.push_back(std::move(fn));
    }
    out.policy = WaitingPolicy::full(std::move(per_state), opts.w_max);
    out.report = mbf_analytic(model, out.policy);
    out.mbf = out.report.mbf;
    out.lower_bound = kInfinity;
    for (Eigen::Index i = 0; i < out.report.per_state_g.size(); ++i) {
        const double ratio = out.report.per_state_g(i) /
                             (model.mean_z() + out.report.per_state_wait(i));
        out.lower_bound = std::min(out.lower_bound, ratio);
    }
    return out;
}

SmdpPolicyResult delay_independent_policy(const FreshnessModel& model,
                                          const OptimizerOptions& opts) {
    const auto n = static_cast<Eigen::Index>(model.states());
    const auto kinks = std::vector<double>{};
    // Transition rows and rewards of every state for one wait.
    auto outcomes = [&](double w) {
        const Matrix rows = model.match().transition(w) * model.combined_transform();
        const Vector rewards = model.expect_backward(
            [&](double d) -> Vector { return model.fresh_time(d, w); }, n, kinks);
        return std::pair<Matrix, Vector>{rows, rewards};
    };
    auto make_action = [&](const std::pair<Matrix, Vector>& o, Eigen::Index s, double w) {
        return SmdpAction{w, o.first.row(s).transpose(), o.second(s), w + model.mean_z()};
    };

    SmdpModel smdp;
    smdp.actions.resize(static_cast<std::size_t>(n));
    for (double w : wait_grid(opts)) {
        const auto o = outcomes(w);
        for (Eigen::Index s = 0; s < n; ++s) {
            smdp.actions[static_cast<std::size_t>(s)].push_back(make_action(o, s, w));
        }
    }
    smdp.evaluate = [&](std::size_t s, double w) {
        return make_action(outcomes(w), static_cast<Eigen::Index>(s), w);
    };

    SmdpPolicyResult out;
    out.solution = policy_iteration(smdp, opts.smdp);
    out.gain = out.solution.gain;
    out.policy = WaitingPolicy::delay_independent(out.solution.policy, opts.w_max);
    out.report = mbf_analytic(model, out.policy);
    out.mbf = out.report.mbf;
    out.delay_support = model.backward();
    return out;
}

SmdpPolicyResult optimal_policy(const FreshnessModel& model, const OptimizerOptions& opts) {
    bool too_coarse = false;
    const std::optional<FreshnessModel> discrete = discretized_model(model, opts, too_coarse);
    const FreshnessModel& m = discrete ? *discrete : model;
    const auto atoms = m.backward().atoms();
    const auto n_states = static_cast<Eigen::Index>(m.states());
    const auto n_atoms = static_cast<Eigen::Index>(atoms.size());
    const Eigen::Index total = n_states * n_atoms;

    Vector atom_probs(n_atoms);
    for (Eigen::Index k = 0; k < n_atoms; ++k) atom_probs(k) = atoms[static_cast<std::size_t>(k)].prob;

    // Outcomes of waiting w after a reply of age d_k, for every observed state.
    auto outcomes = [&](Eigen::Index k, double w) {
        const double d = atoms[static_cast<std::size_t>(k)].value;
        const Matrix rows = m.match().transition(d + w) * m.forward_transform();
        return std::pair<Matrix, Vector>{rows, m.fresh_time(d, w)};
    };
    auto make_action = [&](const std::pair<Matrix, Vector>& o, Eigen::Index i, double w) {
        Vector next(total);
        for (Eigen::Index j = 0; j < n_states; ++j) {
            next.segment(j * n_atoms, n_atoms) = o.first(i, j) * atom_probs;
        }
        return SmdpAction{w, std::move(next), o.second(i), w + m.mean_z()};
    };

    SmdpModel smdp;
    smdp.actions.resize(static_cast<std::size_t>(total));
    for (double w : wait_grid(opts)) {
        for (Eigen::Index k = 0; k < n_atoms; ++k) {
            const auto o = outcomes(k, w);
            for (Eigen::Index i = 0; i < n_states; ++i) {
                smdp.actions[static_cast<std::size_t>(i * n_atoms + k)].push_back(
                    make_action(o, i, w));
            }
        }
    }
    smdp.evaluate = [&](std::size_t s, double w) {
        const auto i = static_cast<Eigen::Index>(s) / n_atoms;
        const auto k = static_cast<Eigen::Index>(s) % n_atoms;
        return make_action(outcomes(k, w), i, w);
    };

    SmdpPolicyResult out;
    out.solution = policy_iteration(smdp, opts.smdp);
    out.gain = out.solution.gain;
    std::vector<DelayWaitFn> per_state;
    for (Eigen::Index i = 0; i < n_states; ++i) {
        std::vector<DelayWaitFn::Entry> entries;
        for (Eigen::Index k = 0; k < n_atoms; ++k) {
            entries.push_back({atoms[static_cast<std::size_t>(k)].value,
                               out.solution.policy[static_cast<std::size_t>(i * n_atoms + k)]});
        }
        per_state.push_back(DelayWaitFn::table(std::move(entries)));
    }
    out.policy = WaitingPolicy::full(std::move(per_state), opts.w_max);
    out.report = mbf_analytic(m, out.policy);
    out.mbf = out.report.mbf;
    out.delay_support = m.backward();
    out.grid_too_coarse = too_coarse;
    return out;
}

PolicyResult constant_wait_policy(const FreshnessModel& model, const OptimizerOptions& opts) {
    auto value = [&](double w) {
        return mbf_analytic(model, WaitingPolicy::constant(w, opts.w_max)).mbf;
    };
    const double w = grid_then_polish(value, opts);
    PolicyResult out;
    out.policy = WaitingPolicy::constant(w, opts.w_max);
    out.report = mbf_analytic(model, out.policy);
    out.mbf = out.report.mbf;
    return out;
}

PolicyResult zero_wait_policy(const FreshnessModel& model) {
    PolicyResult out;
    out.policy = WaitingPolicy::zero_wait();
    out.report = zero_wait_mbf(model);
    out.mbf = out.report.mbf;
    return out;
}

DelayDistribution discretize_delay(const DelayDistribution& d, std::size_t atoms) {
    if (d.is_atomic()) return d;
    if (atoms == 0) throw Error(ErrorCode::InvalidArgument, "need at least one atom");
    const double r = d.rate();
    const double k_total = static_cast<double>(atoms);
    std::vector<Atom> out;
    for (std::size_t k = 0; k < atoms; ++k) {
        const double a = -std::log1p(-static_cast<double>(k) / k_total) / r;
        double mean = 0.0;
        if (k + 1 == atoms) {
            mean = a + 1.0 / r;
        } else {
            const double b = -std::log1p(-static_cast<double>(k + 1) / k_total) / r;
            const double ea = std::exp(-r * a);
            const double eb = std::exp(-r * b);
            mean = ((a + 1.0 / r) * ea - (b + 1.0 / r) * eb) / (ea - eb);
        }
        out.push_back({mean, 1.0 / k_total});
    }
    return DelayDistribution::discrete(std::move(out));
}

}  // namespace freshq
