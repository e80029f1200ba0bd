#pragma once

#include "freshquery/ctmc.hpp"
#include "freshquery/delay.hpp"
#include "freshquery/estimator.hpp"
#include "freshquery/policy.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace freshq {

struct FreshnessOptions {
    /// Absolute tolerance of each adaptive Simpson integral.
    double quadrature_tolerance = 1e-11;
    /// Probability / integrated-survival mass dropped when truncating infinite ranges.
    double tail_mass = 1e-13;
    MatchOptions match;
};

struct SampledChain {
    Matrix p_tilde;
    Vector phi;
};

struct FreshnessReport {
    double mbf = 0.0;
    double numerator = 0.0;
    double denominator = 0.0;
    Vector phi;
    /// E[g^W(i)] per state.
    Vector per_state_g;
    /// E[W(i, D)] per state.
    Vector per_state_wait;

    /// Flat record {mbf, numerator, denominator, phi_k, g_k}.
    std::map<std::string, double> record() const;
    static std::string csv_header(std::size_t states);
    std::string csv_row() const;
};

/// The monitored chain together with its estimator and delay channel. Holds the
/// cached match-probability table and the matrix transforms the evaluators share.
class FreshnessModel {
public:
    FreshnessModel(GeneratorMatrix g, EstimatorKind kind, DelayDistribution forward,
                   DelayDistribution backward, const FreshnessOptions& opts = {});

    const MatchProbabilityFn& match() const noexcept { return match_; }
    const GeneratorMatrix& generator() const noexcept { return match_.generator(); }
    EstimatorKind estimator() const noexcept { return match_.kind(); }
    std::size_t states() const noexcept { return match_.states(); }
    const Vector& pi() const noexcept { return match_.pi(); }
    const DelayDistribution& forward() const noexcept { return forward_; }
    const DelayDistribution& backward() const noexcept { return backward_; }
    const CombinedDelay& combined() const noexcept { return combined_; }
    double mean_z() const noexcept { return mean_z_; }
    const FreshnessOptions& options() const noexcept { return opts_; }

    /// E[exp(QY)].
    const Matrix& forward_transform() const noexcept { return forward_transform_; }
    /// E[exp(QZ)].
    const Matrix& combined_transform() const noexcept { return combined_transform_; }

    /// E[ integral over [a, a + Z] of m_i ] for every state i.
    Vector window_fresh_time(double a) const;
    /// Fresh time of one cycle after a reply of age d, with wait w:
    /// integral over t >= 0 of m_i(t + d) (1 - F^Z(t - w)), for every state i.
    Vector fresh_time(double d, double w) const;

    /// E[ f(D) ] over the backward delay. Atomic delays are summed exactly;
    /// the exponential case is integrated with kinks split out.
    double expect_backward(const std::function<double(double)>& f,
                           std::span<const double> kinks = {}) const;
    Vector expect_backward(const std::function<Vector(double)>& f, Eigen::Index size,
                           std::span<const double> kinks = {}) const;

    /// l(gamma) = E[p_w(gamma + Z)] for the profile with state weights `weights`.
    double density_weighted_match(const Vector& weights, double gamma) const;

private:
    /// integral over x >= 0 of x^power exp(-rate x) m_i(b + x), exact per estimate piece.
    double exp_moment(std::size_t i, double b, double rate, int power) const;
    const Matrix& resolvent_at(double rate) const;
    /// integral over x >= 0 of S_c(x) m_i(b + x) (or f_c(x) m_i(b + x) with `density`).
    double continuous_window(std::size_t i, double b, const DelayComponent& c, bool density) const;

    MatchProbabilityFn match_;
    DelayDistribution forward_;
    DelayDistribution backward_;
    CombinedDelay combined_;
    FreshnessOptions opts_;
    double mean_z_ = 0.0;
    Matrix forward_transform_;
    Matrix combined_transform_;
    // Per continuous component: integral of exp(Qx) S_c(x) and E[exp(Q X_c)].
    std::vector<Matrix> survival_transforms_;
    std::vector<Matrix> density_transforms_;
    // (rate, (rate I - Q)^-1) for every rate among the continuous components.
    std::vector<std::pair<double, Matrix>> resolvents_;
};

/// P-tilde and its stationary vector phi.
SampledChain sampled_chain(const FreshnessModel& model, const WaitingPolicy& w);
/// E[g^W(i)].
double expected_g(const FreshnessModel& model, std::size_t i, const WaitingPolicy& w);
/// E[W(i, D)].
double expected_wait(const FreshnessModel& model, std::size_t i, const WaitingPolicy& w);

FreshnessReport mbf_analytic(const FreshnessModel& model, const WaitingPolicy& w);
/// Zero-wait MBF with phi = pi.
FreshnessReport zero_wait_mbf(const FreshnessModel& model);

// Convenience overloads that build a throwaway model.
SampledChain sampled_chain(const GeneratorMatrix& g, const DelayDistribution& y,
                           const DelayDistribution& d, const WaitingPolicy& w);
FreshnessReport mbf_analytic(const GeneratorMatrix& g, EstimatorKind kind,
                             const DelayDistribution& y, const DelayDistribution& d,
                             const WaitingPolicy& w);
FreshnessReport zero_wait_mbf(const GeneratorMatrix& g, EstimatorKind kind,
                              const DelayDistribution& y, const DelayDistribution& d);

}  // namespace freshq
