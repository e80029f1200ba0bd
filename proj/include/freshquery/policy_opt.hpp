#pragma once

#include "freshquery/freshness.hpp"
#include "freshquery/smdp.hpp"

#include <vector>

namespace freshq {

struct OptimizerOptions {
    double w_max = 1.5;
    /// Points of the uniform wait grid over [0, w_max].
    std::size_t action_grid = 151;
    /// Width at which golden-section polishing of a wait stops.
    double polish_tolerance = 1e-6;
    /// Bracket width at which the bisection on theta stops.
    double theta_tolerance = 1e-8;
    /// Bisection tolerance on the threshold gamma.
    double gamma_tolerance = 1e-10;
    /// Grid used to decide whether a match-probability profile is monotone.
    std::size_t monotone_grid = 2000;
    /// Atoms used to discretize a continuous backward delay for the full SMDP.
    std::size_t delay_atoms = 32;
    SmdpOptions smdp{.polish = true, .polish_tolerance = 1e-7};
};

/// One step of the bisection on the linearization parameter.
struct DinkelbachState {
    double theta = 0.0;
    double lo = 0.0;
    double hi = 1.0;
    double j_star = 0.0;
};

struct ThresholdPolicy {
    /// +inf encodes "wait w_max for every delay".
    double gamma = 0.0;
    double w_max = 0.0;

    double wait(double d) const;
    bool is_infinite() const;
};

/// A match-probability profile with the facts the inner maximization dispatches on.
struct ProfileInfo {
    MatchProfile profile;
    bool monotone = false;
    double limit = 0.0;
};
ProfileInfo analyze_profile(const FreshnessModel& model, MatchProfile profile,
                            const OptimizerOptions& opts = {});

struct PolicyResult {
    WaitingPolicy policy;
    double mbf = 0.0;
    FreshnessReport report;
};

struct StateIndependentResult : PolicyResult {
    double theta = 0.0;
    /// J*(theta) at the returned theta.
    double j_star = 0.0;
    std::vector<DinkelbachState> trace;
};

struct GreedyResult : PolicyResult {
    double lower_bound = 0.0;
    std::vector<double> theta_per_state;
    std::vector<double> j_star_per_state;
};

struct SmdpPolicyResult : PolicyResult {
    SmdpSolution solution;
    double gain = 0.0;
    /// Backward delay the SMDP was solved on (D itself when atomic).
    DelayDistribution delay_support = DelayDistribution::deterministic(0.0);
    /// The discretized delay moved the mean by more than 1e-6.
    bool grid_too_coarse = false;
};

/// Objective of the inner problem for one delay atom:
/// integral over t >= 0 of (p_w(t + d) - theta) (1 - F^Z(t - wait)).
double linearized_atom_value(const FreshnessModel& model, const MatchProfile& profile, double d,
                             double wait, double theta);

/// J(theta) of a state-independent candidate W(d), with phi = pi.
double linearized_value_state_ind(const FreshnessModel& model, double theta,
                                  const DelayWaitFn& candidate);

/// l(gamma) = integral over t >= 0 of p(t + gamma) f^Z(t).
double threshold_l(const FreshnessModel& model, const MatchProfile& profile, double gamma);

/// Gamma = sup{gamma > 0 : l(gamma) >= theta}, with the zero and infinite edge cases.
/// Throws DensityUnavailable when Z has atoms.
ThresholdPolicy threshold_gamma(const FreshnessModel& model, const MatchProfile& profile,
                                double theta, double w_max, double d_max,
                                double tolerance = 1e-10);

/// argmax over w in [0, w_max] of linearized_atom_value, ties to the smallest w.
double optimal_wait_for_theta(const FreshnessModel& model, const ProfileInfo& info, double d,
                              double theta, const OptimizerOptions& opts = {});

StateIndependentResult state_independent_policy(const FreshnessModel& model,
                                                const OptimizerOptions& opts = {});
SmdpPolicyResult delay_independent_policy(const FreshnessModel& model,
                                          const OptimizerOptions& opts = {});
GreedyResult greedy_policy(const FreshnessModel& model, const OptimizerOptions& opts = {});
SmdpPolicyResult optimal_policy(const FreshnessModel& model, const OptimizerOptions& opts = {});
PolicyResult constant_wait_policy(const FreshnessModel& model, const OptimizerOptions& opts = {});
PolicyResult zero_wait_policy(const FreshnessModel& model);

/// Quantile discretization of a delay into `atoms` equal-mass atoms placed at the
/// conditional means, so the mean is preserved. Atomic delays are returned as is.
DelayDistribution discretize_delay(const DelayDistribution& d, std::size_t atoms);

}  // namespace freshq
