#include "freshquery/estimator.hpp"

#include "freshquery/errors.hpp"

#include <algorithm>
#include <cmath>

namespace freshq {

EstimatorKind parse_estimator(std::string_view name) {
    if (name == "martingale") return EstimatorKind::Martingale;
    if (name == "map" || name == "MAP") return EstimatorKind::MAP;
    throw Error(ErrorCode::InvalidArgument, "unknown estimator '" + std::string(name) + "'");
}

std::string_view to_string(EstimatorKind kind) noexcept {
    return kind == EstimatorKind::Martingale ? "martingale" : "map";
}

std::size_t argmax_tied(const Vector& row) {
    const double best = row.maxCoeff();
    for (Eigen::Index j = 0; j < row.size(); ++j) {
        if (row(j) >= best - kArgmaxTieTolerance) return static_cast<std::size_t>(j);
    }
    return 0;
}

std::size_t estimate_at(EstimatorKind kind, const GeneratorMatrix& g, std::size_t last_state,
                        double age) {
    if (last_state >= g.size()) throw Error(ErrorCode::InvalidArgument, "state out of range");
    if (kind == EstimatorKind::Martingale) return last_state;
    const Matrix p = transition_probabilities(g, age).probs;
    return argmax_tied(p.row(static_cast<Eigen::Index>(last_state)).transpose());
}

double match_probability(EstimatorKind kind, const GeneratorMatrix& g, std::size_t i, double t) {
    const Matrix p = transition_probabilities(g, t).probs;
    const auto row = static_cast<Eigen::Index>(i);
    const std::size_t j = kind == EstimatorKind::Martingale
                              ? i
                              : argmax_tied(p.row(row).transpose());
    return p(row, static_cast<Eigen::Index>(j));
}

double aggregate_p(EstimatorKind kind, const GeneratorMatrix& g,
                   const StationaryDistribution& pi, double t) {
    const Matrix p = transition_probabilities(g, t).probs;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const std::size_t j = kind == EstimatorKind::Martingale
                                  ? static_cast<std::size_t>(i)
                                  : argmax_tied(p.row(i).transpose());
        acc += pi.pi(i) * p(i, static_cast<Eigen::Index>(j));
    }
    return acc;
}

MatchProbabilityFn::MatchProbabilityFn(GeneratorMatrix g, EstimatorKind kind,
                                       const MatchOptions& opts)
    : g_(std::move(g)), kind_(kind) {
    pi_ = stationary_distribution(g_).pi;
    const auto n = static_cast<Eigen::Index>(g_.size());
    limit_matrix_ = Vector::Ones(n) * pi_.transpose();
    horizon_ = mixing_horizon(g_, pi_, opts.limit_tv);
    try {
        table_end_ = mixing_horizon(g_, pi_, opts.table_tv);
    } catch (const Error&) {
        table_end_ = 2.0 * horizon_;
    }
    table_end_ = std::max(table_end_, horizon_);

    const double lambda = g_.uniformization_rate();
    step_ = std::max(opts.step_scale / lambda,
                     table_end_ / static_cast<double>(opts.max_grid_points));
    const auto points = static_cast<std::size_t>(std::ceil(table_end_ / step_)) + 1;
    // The grid is built by repeated multiplication, so the unit step is summed far
    // past the usual tail to keep the accumulated mass loss below 1e-12.
    CtmcOptions fine;
    fine.series_tail = 1e-17;
    const TransitionPair unit = transition_and_integral(g_, step_, fine);
    grid_.reserve(points);
    grid_.push_back({Matrix::Identity(n, n), Matrix::Zero(n, n)});
    for (std::size_t k = 1; k < points; ++k) {
        const GridPoint& prev = grid_.back();
        GridPoint next{prev.probs * unit.probs, prev.integral + prev.probs * unit.integral};
        grid_.push_back(std::move(next));
    }
    table_end_ = static_cast<double>(points - 1) * step_;

    build_pieces();
    limits_.resize(g_.size());
    for (std::size_t i = 0; i < g_.size(); ++i) limits_[i] = value(i, horizon_);
}

std::size_t MatchProbabilityFn::grid_index(double t) const {
    const auto k = static_cast<std::size_t>(t / step_);
    return std::min(k, grid_.size() - 1);
}

Matrix MatchProbabilityFn::transition(double t) const {
    if (t >= table_end_) return limit_matrix_;
    const std::size_t k = grid_index(t);
    const double delta = t - static_cast<double>(k) * step_;
    if (delta <= 0.0) return grid_[k].probs;
    return grid_[k].probs * transition_probabilities(g_, delta).probs;
}

Matrix MatchProbabilityFn::integral(double t) const {
    if (t >= table_end_) {
        return grid_.back().integral + (t - table_end_) * limit_matrix_;
    }
    const std::size_t k = grid_index(t);
    const double delta = t - static_cast<double>(k) * step_;
    if (delta <= 0.0) return grid_[k].integral;
    return grid_[k].integral + grid_[k].probs * integrated_transition(g_, delta);
}

void MatchProbabilityFn::build_pieces() {
    const std::size_t n = g_.size();
    pieces_.assign(n, {});
    piece_offsets_.assign(n, {});
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        auto& pieces = pieces_[i];
        pieces.push_back({0.0, i});
        if (kind_ == EstimatorKind::MAP) {
            auto est = [&](double t) { return argmax_tied(transition(t).row(row).transpose()); };
            std::size_t current = i;
            for (std::size_t k = 1; k < grid_.size(); ++k) {
                const std::size_t next = argmax_tied(grid_[k].probs.row(row).transpose());
                if (next == current) continue;
                double lo = static_cast<double>(k - 1) * step_;
                double hi = static_cast<double>(k) * step_;
                for (int it = 0; it < 60 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
                    const double mid = 0.5 * (lo + hi);
                    if (est(mid) == current) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                pieces.push_back({hi, next});
                current = next;
            }
            const std::size_t tail = argmax_tied(pi_);
            if (tail != current) pieces.push_back({table_end_, tail});
        }
        auto& offsets = piece_offsets_[i];
        offsets.push_back(0.0);
        for (std::size_t p = 1; p < pieces.size(); ++p) {
            const auto j = static_cast<Eigen::Index>(pieces[p - 1].state);
            const double span = integral(pieces[p].start)(row, j) -
                                integral(pieces[p - 1].start)(row, j);
            offsets.push_back(offsets.back() + span);
        }
    }
}

std::size_t MatchProbabilityFn::piece_index(std::size_t i, double age) const {
    const auto& pieces = pieces_[i];
    auto it = std::upper_bound(pieces.begin(), pieces.end(), age,
                               [](double a, const Piece& p) { return a < p.start; });
    return static_cast<std::size_t>(it - pieces.begin()) - 1;
}

std::size_t MatchProbabilityFn::estimate(std::size_t i, double age) const {
    return pieces_[i][piece_index(i, age)].state;
}

std::vector<double> MatchProbabilityFn::switch_ages(std::size_t i) const {
    std::vector<double> out;
    for (std::size_t p = 1; p < pieces_[i].size(); ++p) out.push_back(pieces_[i][p].start);
    return out;
}

double MatchProbabilityFn::value(std::size_t i, double t) const {
    const Matrix p = transition(t);
    return p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(estimate(i, t)));
}

double MatchProbabilityFn::cumulative(std::size_t i, double t) const {
    if (t <= 0.0) return 0.0;
    const std::size_t p = piece_index(i, t);
    const Piece& piece = pieces_[i][p];
    const auto row = static_cast<Eigen::Index>(i);
    const auto col = static_cast<Eigen::Index>(piece.state);
    const double start_integral = p == 0 ? 0.0 : integral(piece.start)(row, col);
    return piece_offsets_[i][p] + integral(t)(row, col) - start_integral;
}

double MatchProbabilityFn::aggregate(double t) const {
    const Matrix p = transition(t);
    double acc = 0.0;
    for (std::size_t i = 0; i < states(); ++i) {
        acc += pi_(static_cast<Eigen::Index>(i)) *
               p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(estimate(i, t)));
    }
    return acc;
}

double MatchProbabilityFn::aggregate_cumulative(double t) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < states(); ++i) {
        acc += pi_(static_cast<Eigen::Index>(i)) * cumulative(i, t);
    }
    return acc;
}

double MatchProbabilityFn::aggregate_limit() const { return aggregate(horizon_); }

MatchProfile::MatchProfile(const MatchProbabilityFn& fn, Vector weights)
    : fn_(&fn), weights_(std::move(weights)) {
    if (weights_.size() != static_cast<Eigen::Index>(fn.states())) {
        throw Error(ErrorCode::InvalidArgument, "profile weights have the wrong length");
    }
}

MatchProfile MatchProfile::aggregate(const MatchProbabilityFn& fn) {
    return MatchProfile(fn, fn.pi());
}

MatchProfile MatchProfile::state(const MatchProbabilityFn& fn, std::size_t i) {
    Vector w = Vector::Zero(static_cast<Eigen::Index>(fn.states()));
    w(static_cast<Eigen::Index>(i)) = 1.0;
    return MatchProfile(fn, std::move(w));
}

double MatchProfile::value(double t) const {
    const Matrix p = fn_->transition(t);
    double acc = 0.0;
    for (std::size_t i = 0; i < fn_->states(); ++i) {
        const double w = weights_(static_cast<Eigen::Index>(i));
        if (w == 0.0) continue;
        acc += w * p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(fn_->estimate(i, t)));
    }
    return acc;
}

double MatchProfile::cumulative(double t) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < fn_->states(); ++i) {
        const double w = weights_(static_cast<Eigen::Index>(i));
        if (w != 0.0) acc += w * fn_->cumulative(i, t);
    }
    return acc;
}

double MatchProfile::limit() const { return value(fn_->horizon()); }

std::vector<double> MatchProfile::kinks() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < fn_->states(); ++i) {
        if (weights_(static_cast<Eigen::Index>(i)) == 0.0) continue;
        const auto ages = fn_->switch_ages(i);
        out.insert(out.end(), ages.begin(), ages.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool is_monotone_decreasing(const std::function<double(double)>& f, double horizon,
                            std::size_t grid) {
    if (!(horizon > 0.0) || grid < 100) {
        throw Error(ErrorCode::InvalidArgument, "monotonicity check needs horizon > 0, grid >= 100");
    }
    double prev = f(0.0);
    for (std::size_t k = 1; k <= grid; ++k) {
        const double cur = f(horizon * static_cast<double>(k) / static_cast<double>(grid));
        if (cur > prev + 1e-10) return false;
        prev = cur;
    }
    return true;
}

bool is_monotone_decreasing(const MatchProfile& p, double horizon, std::size_t grid) {
    return is_monotone_decreasing([&](double t) { return p.value(t); }, horizon, grid);
}

}  // namespace freshq
