#pragma once

#include "freshquery/freshness.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace freshq {

struct SimConfig {
    std::uint64_t cycles = 1000000;
    std::uint64_t seed = 1;
    /// Cycles run before statistics are collected.
    std::uint64_t burn_in = 1000;
    std::uint64_t batches = 100;
};

struct SimResult {
    double mbf_hat = 0.0;
    /// Batch-means standard error of mbf_hat.
    double stderr_mbf = 0.0;
    /// Empirical frequencies of the reply states.
    Vector phi_hat;
    double mean_cycle = 0.0;
    /// Counts of consecutive reply-state pairs (i, j).
    Matrix transition_counts;
    std::uint64_t seed = 0;
    std::uint64_t cycles = 0;

    static std::string csv_header(std::size_t states);
    std::string csv_row() const;
};

/// Piece of the estimate trajectory: from `start` (relative to the span start)
/// onward the monitor shows `state`.
struct EstimatePiece {
    double start = 0.0;
    std::size_t state = 0;
};

struct PathOutcome {
    double fresh_time = 0.0;
    std::size_t end_state = 0;
};

/// Runs one CTMC path from `start_state` for `span` time units and returns the time
/// it agrees with the piecewise-constant estimate, plus the state at the end.
/// `estimate` must be sorted and start at 0.
PathOutcome jump_path_fresh_time(const GeneratorMatrix& g, std::size_t start_state,
                                 std::span<const EstimatePiece> estimate, double span,
                                 std::mt19937_64& rng);

/// Replays query/reply cycles on an exact jump path of the chain.
SimResult simulate(const FreshnessModel& model, const WaitingPolicy& w, const SimConfig& cfg);

}  // namespace freshq
