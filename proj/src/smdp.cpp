#include "freshquery/smdp.hpp"

#include "freshquery/errors.hpp"
#include "freshquery/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace freshq {

namespace {

void validate_action(const SmdpAction& a, std::size_t n, std::size_t state) {
    if (a.transition.size() != static_cast<Eigen::Index>(n) || a.transition.minCoeff() < -1e-12 ||
        std::abs(a.transition.sum() - 1.0) > 1e-10) {
        throw Error(ErrorCode::NonStochasticRow,
                    "transition row of state " + std::to_string(state) + " is not stochastic (sum " +
                        std::to_string(a.transition.sum() - 1.0) + ", min " + std::to_string(a.transition.minCoeff()) + ", size " +
                        std::to_string(a.transition.size()) + ")");
    }
    if (!(a.sojourn > 0.0)) {
        throw Error(ErrorCode::NonPositiveSojourn,
                    "sojourn of state " + std::to_string(state) + " is not positive");
    }
}

double test_value(const SmdpAction& a, const PolicyValue& v) {
    return a.reward - v.gain * a.sojourn + a.transition.dot(v.bias);
}

bool beats(double challenger, double incumbent, double tol) {
    return challenger > incumbent + tol * (1.0 + std::abs(incumbent));
}

}  // namespace

PolicyValue evaluate_policy(const std::vector<const SmdpAction*>& policy, std::size_t anchor) {
    const auto n = static_cast<Eigen::Index>(policy.size());
    if (anchor >= policy.size()) throw Error(ErrorCode::InvalidArgument, "anchor out of range");
    const auto pin = static_cast<Eigen::Index>(anchor);
    auto col = [&](Eigen::Index j) { return j < pin ? j : j - 1; };
    Matrix a = Matrix::Zero(n, n);
    Vector b(n);
    for (Eigen::Index s = 0; s < n; ++s) {
        const SmdpAction& act = *policy[static_cast<std::size_t>(s)];
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == pin) continue;
            a(s, col(j)) = (s == j ? 1.0 : 0.0) - act.transition(j);
        }
        a(s, n - 1) = act.sojourn;
        b(s) = act.reward;
    }
    Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible()) {
        throw Error(ErrorCode::SingularSystem, "policy evaluation system is singular");
    }
    const Vector x = lu.solve(b);
    PolicyValue v;
    v.gain = x(n - 1);
    v.bias = Vector::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        if (j != pin) v.bias(j) = x(col(j));
    }
    return v;
}

SmdpSolution policy_iteration(const SmdpModel& model, const SmdpOptions& opts) {
    const std::size_t n = model.actions.size();
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "SMDP has no states");
    auto candidates = model.actions;
    for (std::size_t s = 0; s < n; ++s) {
        if (candidates[s].empty()) {
            throw Error(ErrorCode::InvalidArgument, "state " + std::to_string(s) + " has no actions");
        }
        for (const SmdpAction& a : candidates[s]) validate_action(a, n, s);
        std::stable_sort(candidates[s].begin(), candidates[s].end(),
                         [](const SmdpAction& x, const SmdpAction& y) { return x.label < y.label; });
    }

    SmdpSolution sol;
    std::vector<std::size_t> current(n, 0);
    auto current_actions = [&] {
        std::vector<const SmdpAction*> out(n);
        for (std::size_t s = 0; s < n; ++s) out[s] = &candidates[s][current[s]];
        return out;
    };

    PolicyValue value;
    const double tol = opts.improvement_tolerance;
    for (std::size_t round = 0;; ++round) {
        bool stable = false;
        while (!stable) {
            if (sol.iterations >= opts.max_iterations) {
                throw Error(ErrorCode::NoConvergence, "policy iteration hit its iteration cap");
            }
            ++sol.iterations;
            value = evaluate_policy(current_actions(), opts.anchor);
            sol.gain_trace.push_back(value.gain);
            stable = true;
            for (std::size_t s = 0; s < n; ++s) {
                const auto& acts = candidates[s];
                std::vector<double> v(acts.size());
                double best = -std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < acts.size(); ++k) {
                    v[k] = test_value(acts[k], value);
                    best = std::max(best, v[k]);
                }
                if (!beats(best, v[current[s]], tol)) continue;
                std::size_t pick = current[s];
                double pick_label = std::numeric_limits<double>::infinity();
                for (std::size_t k = 0; k < acts.size(); ++k) {
                    if (v[k] >= best - tol * (1.0 + std::abs(best)) && acts[k].label < pick_label) {
                        pick = k;
                        pick_label = acts[k].label;
                    }
                }
                current[s] = pick;
                stable = false;
            }
        }
        if (!opts.polish || !model.evaluate || round >= opts.max_polish_rounds) break;

        bool added = false;
        for (std::size_t s = 0; s < n; ++s) {
            const double a = candidates[s][current[s]].label;
            const auto& grid = model.actions[s];
            double lo = a;
            double hi = a;
            for (const SmdpAction& g : grid) {
                if (g.label < a - 1e-12) lo = g.label;
                if (g.label > a + 1e-12) {
                    hi = g.label;
                    break;
                }
            }
            if (!(hi > lo)) continue;
            auto objective = [&](double label) {
                return test_value(model.evaluate(s, label), value);
            };
            const double best_label = numerics::golden_section_max(objective, lo, hi,
                                                                   opts.polish_tolerance);
            SmdpAction act = model.evaluate(s, best_label);
            validate_action(act, n, s);
            if (beats(test_value(act, value), test_value(candidates[s][current[s]], value), tol)) {
                candidates[s].push_back(std::move(act));
                current[s] = candidates[s].size() - 1;
                added = true;
            }
        }
        if (!added) break;
    }

    sol.gain = value.gain;
    sol.bias = value.bias;
    Matrix p_pi(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t s = 0; s < n; ++s) {
        sol.chosen.push_back(candidates[s][current[s]]);
        sol.policy.push_back(sol.chosen.back().label);
        p_pi.row(static_cast<Eigen::Index>(s)) = sol.chosen.back().transition.transpose();
    }
    sol.unichain = is_irreducible(p_pi);
    return sol;
}

}  // namespace freshq
