#pragma once

#include "freshquery/ctmc.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace freshq {

enum class EstimatorKind { Martingale, MAP };

EstimatorKind parse_estimator(std::string_view name);
std::string_view to_string(EstimatorKind kind) noexcept;

/// Probabilities within this of the row maximum count as tied; ties go to the
/// smallest state index.
inline constexpr double kArgmaxTieTolerance = 1e-13;

/// Index of the largest entry of `row`, ties to the smallest index.
std::size_t argmax_tied(const Vector& row);

/// Remote estimate given the last reply reported `last_state`, `age` time units ago.
std::size_t estimate_at(EstimatorKind kind, const GeneratorMatrix& g, std::size_t last_state,
                        double age);

/// P_{i, estimate(i, t)}(t), evaluated directly by uniformization.
double match_probability(EstimatorKind kind, const GeneratorMatrix& g, std::size_t i, double t);

/// p(t) = sum_i pi_i P_{i, estimate(i, t)}(t).
double aggregate_p(EstimatorKind kind, const GeneratorMatrix& g,
                   const StationaryDistribution& pi, double t);

struct MatchOptions {
    /// Grid step as a multiple of the characteristic time 1 / Lambda.
    double step_scale = 1e-3;
    std::size_t max_grid_points = std::size_t{1} << 16;
    /// Total-variation level defining the ergodic horizon at which p(inf) is read.
    double limit_tv = 1e-10;
    /// Total-variation level beyond which P(t) is replaced by its limit.
    double table_tv = 1e-13;
};

/// Match probabilities m_i(t) = P_{i, estimate(i,t)}(t), their time integrals and
/// limits. Evaluations go through a cached grid of exact P(t_k) and its integral,
/// topped up by a short uniformization step, so every value is exact to the
/// series tolerance rather than interpolated.
class MatchProbabilityFn {
public:
    /// Age at which the MAP estimate for a given last state switches to `state`.
    struct Piece {
        double start = 0.0;
        std::size_t state = 0;
    };

    MatchProbabilityFn(GeneratorMatrix g, EstimatorKind kind, const MatchOptions& opts = {});

    const GeneratorMatrix& generator() const noexcept { return g_; }
    EstimatorKind kind() const noexcept { return kind_; }
    std::size_t states() const noexcept { return g_.size(); }
    const Vector& pi() const noexcept { return pi_; }
    /// Ergodic horizon T* used for p(inf).
    double horizon() const noexcept { return horizon_; }
    double table_horizon() const noexcept { return table_end_; }

    Matrix transition(double t) const;
    /// Integral of P(s) over [0, t].
    Matrix integral(double t) const;

    std::size_t estimate(std::size_t i, double age) const;
    std::span<const Piece> pieces(std::size_t i) const { return pieces_[i]; }
    /// Ages > 0 at which the estimate for last state i changes.
    std::vector<double> switch_ages(std::size_t i) const;

    double value(std::size_t i, double t) const;
    double cumulative(std::size_t i, double t) const;
    double limit(std::size_t i) const { return limits_[i]; }

    double aggregate(double t) const;
    double aggregate_cumulative(double t) const;
    double aggregate_limit() const;

private:
    struct GridPoint {
        Matrix probs;
        Matrix integral;
    };

    std::size_t grid_index(double t) const;
    void build_pieces();
    std::size_t piece_index(std::size_t i, double age) const;

    GeneratorMatrix g_;
    EstimatorKind kind_;
    Vector pi_;
    Matrix limit_matrix_;
    double horizon_ = 0.0;
    double table_end_ = 0.0;
    double step_ = 0.0;
    std::vector<GridPoint> grid_;
    std::vector<std::vector<Piece>> pieces_;
    // Cumulative integral of m_i up to the start of each piece.
    std::vector<std::vector<double>> piece_offsets_;
    std::vector<double> limits_;
};

/// A weighted combination of match probabilities, sum_i w_i m_i(t): the aggregate
/// p(t) uses w = pi, the per-state function of the greedy optimizer uses w = e_i.
class MatchProfile {
public:
    MatchProfile(const MatchProbabilityFn& fn, Vector weights);
    static MatchProfile aggregate(const MatchProbabilityFn& fn);
    static MatchProfile state(const MatchProbabilityFn& fn, std::size_t i);

    const MatchProbabilityFn& fn() const noexcept { return *fn_; }
    const Vector& weights() const noexcept { return weights_; }

    double value(double t) const;
    double cumulative(double t) const;
    double limit() const;
    /// Union of the switching ages of states with non-zero weight.
    std::vector<double> kinks() const;

private:
    const MatchProbabilityFn* fn_;
    Vector weights_;
};

/// True iff f is non-increasing on a uniform grid of `grid` + 1 points over
/// [0, horizon], within slack 1e-10.
bool is_monotone_decreasing(const std::function<double(double)>& f, double horizon,
                            std::size_t grid);
bool is_monotone_decreasing(const MatchProfile& p, double horizon, std::size_t grid);

}  // namespace freshq
