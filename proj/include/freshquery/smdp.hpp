#pragma once

#include "freshquery/ctmc.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace freshq {

/// Outcome of taking an action (a wait time, `label`) in one SMDP state.
struct SmdpAction {
    double label = 0.0;
    Vector transition;
    double reward = 0.0;
    double sojourn = 0.0;
};

/// Finite-state average-reward SMDP. Each state has a grid of admissible actions,
/// sorted by label. When `evaluate` is set, the solver may also try off-grid
/// labels inside [grid_lo, grid_hi] of a state (local polish).
struct SmdpModel {
    std::vector<std::vector<SmdpAction>> actions;
    std::function<SmdpAction(std::size_t state, double label)> evaluate;
};

struct SmdpOptions {
    std::size_t max_iterations = 1000;
    /// Relative margin an action must beat the incumbent by to replace it.
    double improvement_tolerance = 1e-12;
    /// Refine the grid optimum of each state by golden-section search.
    bool polish = false;
    double polish_tolerance = 1e-7;
    std::size_t max_polish_rounds = 50;
    /// State whose bias is pinned to zero.
    std::size_t anchor = 0;
};

struct SmdpSolution {
    /// Chosen label per state.
    std::vector<double> policy;
    std::vector<SmdpAction> chosen;
    double gain = 0.0;
    Vector bias;
    /// Gain after every evaluation step.
    std::vector<double> gain_trace;
    std::size_t iterations = 0;
    /// Whether P_pi of the returned policy is irreducible (debug check).
    bool unichain = true;
};

struct PolicyValue {
    double gain = 0.0;
    Vector bias;
};

/// Solves R - gain * H + P * bias = bias with bias(anchor) = 0.
PolicyValue evaluate_policy(const std::vector<const SmdpAction*>& policy, std::size_t anchor = 0);

/// Policy iteration started from the smallest label in every state. Ties in the
/// improvement step go to the smaller label.
SmdpSolution policy_iteration(const SmdpModel& model, const SmdpOptions& opts = {});

}  // namespace freshq
