#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "freshquery/estimator.hpp"
#include "oracles.hpp"

using namespace freshq;

namespace {

Matrix cycle3() {
    Matrix q(3, 3);
    q << -1, 1, 0, 0, -1, 1, 1, 0, -1;
    return q;
}

}  // namespace

TEST_CASE("estimates") {
    const auto g = GeneratorMatrix::binary(1, 0.1);
    CHECK(estimate_at(EstimatorKind::Martingale, g, 1, 7.0) == 1);
    // P_12(5) = 10/11 (1 - e^{-5.5}) exceeds P_11(5).
    CHECK(oracle::binary_p(1, 0.1, 5)(0, 1) > oracle::binary_p(1, 0.1, 5)(0, 0));
    CHECK(estimate_at(EstimatorKind::MAP, g, 0, 5.0) == 1);
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 5; ++rep) {
        const auto gr = GeneratorMatrix::validate(oracle::random_generator(rng, 4));
        for (std::size_t i = 0; i < 4; ++i) CHECK(estimate_at(EstimatorKind::MAP, gr, i, 0.0) == i);
    }
    CHECK(parse_estimator("map") == EstimatorKind::MAP);
    CHECK(parse_estimator("martingale") == EstimatorKind::Martingale);
    CHECK(argmax_tied(Vector::Constant(3, 1.0 / 3)) == 0);
}

TEST_CASE("match probabilities and their aggregate") {
    const auto sym = GeneratorMatrix::binary(1, 1);
    CHECK(std::abs(match_probability(EstimatorKind::Martingale, sym, 0, 0.5) - (0.5 + 0.5 * std::exp(-1.0))) < 1e-10);
    const auto pi_sym = stationary_distribution(sym);
    CHECK(std::abs(aggregate_p(EstimatorKind::Martingale, sym, pi_sym, 1.0) - (0.5 + 0.5 * std::exp(-2.0))) < 1e-10);
    CHECK(std::abs(aggregate_p(EstimatorKind::Martingale, sym, pi_sym, 1.0) - 0.567668) < 1e-6);

    const auto g = GeneratorMatrix::binary(1, 0.1);
    const MatchProbabilityFn fn(g, EstimatorKind::Martingale);
    CHECK(std::abs(fn.limit(1) - 10.0 / 11) < 1e-10);
    CHECK(std::abs(fn.aggregate_limit() - 101.0 / 121) < 1e-10);
    CHECK(std::abs(fn.aggregate_limit() - 0.834711) < 1e-6);
    // Numeric evaluation at t = 100 agrees with the limit.
    CHECK(std::abs(aggregate_p(EstimatorKind::Martingale, g, stationary_distribution(g), 100.0) - fn.aggregate_limit()) < 1e-10);
    CHECK(std::abs(fn.aggregate(fn.horizon()) - fn.aggregate(fn.horizon() + 1.0)) < 1e-10);

    std::mt19937_64 rng(9);
    for (int rep = 0; rep < 10; ++rep) {
        const auto gr = GeneratorMatrix::validate(oracle::random_generator(rng, 2 + rep % 4, 0.7));
        for (auto kind : {EstimatorKind::Martingale, EstimatorKind::MAP}) {
            CHECK(std::abs(aggregate_p(kind, gr, stationary_distribution(gr), 0.0) - 1.0) < 1e-15);
            const MatchProbabilityFn f(gr, kind);
            CHECK(std::abs(f.aggregate(0.0) - 1.0) < 1e-15);
        }
    }
}

TEST_CASE("cached evaluation equals direct uniformization") {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> time(0.0, 30.0);
    for (int rep = 0; rep < 8; ++rep) {
        const auto g = GeneratorMatrix::validate(oracle::random_generator(rng, 2 + rep % 4, 0.6));
        for (auto kind : {EstimatorKind::Martingale, EstimatorKind::MAP}) {
            const MatchProbabilityFn fn(g, kind);
            for (int k = 0; k < 40; ++k) {
                const double t = k < 5 ? fn.table_horizon() * (1.0 + k) : time(rng);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    // At switch ages two entries tie, so compare probabilities, not indices.
                    CHECK(std::abs(fn.value(i, t) - match_probability(kind, g, i, t)) < 1e-10);
                }
                CHECK(oracle::max_abs_diff(fn.transition(t), transition_probabilities(g, t).probs) < 1e-10);
            }
        }
    }
}

TEST_CASE("cumulative match probability equals the integral of the values") {
    Matrix q(3, 3);
    q << -1.0, 0.7, 0.3, 0.2, -0.5, 0.3, 0.6, 0.9, -1.5;
    const auto g = GeneratorMatrix::validate(q);
    for (auto kind : {EstimatorKind::Martingale, EstimatorKind::MAP}) {
        const MatchProbabilityFn fn(g, kind);
        for (std::size_t i = 0; i < 3; ++i) {
            // Split at switch ages so Simpson integrates smooth pieces.
            std::vector<double> cuts{0.0};
            for (double s : fn.switch_ages(i)) {
                if (s < 7.0) cuts.push_back(s);
            }
            cuts.push_back(7.0);
            double ref = 0.0;
            for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
                const double lo = cuts[k];
                const double hi = cuts[k + 1];
                const std::size_t state = fn.estimate(i, 0.5 * (lo + hi));
                ref += oracle::simpson([&](double t) { return transition_probabilities(g, t).probs(i, state); }, lo, hi, 4000);
            }
            CHECK(std::abs(fn.cumulative(i, 7.0) - ref) < 1e-9);
        }
    }
}

TEST_CASE("MAP switch age of a binary chain") {
    const auto g = GeneratorMatrix::binary(1, 0.1);
    const MatchProbabilityFn fn(g, EstimatorKind::MAP);
    // P_11(t) = 1/11 + 10/11 e^{-1.1 t} crosses 1/2 at t = -ln(0.45) / 1.1.
    const auto ages = fn.switch_ages(0);
    REQUIRE(ages.size() == 1);
    CHECK(std::abs(ages[0] + std::log(0.45) / 1.1) < 1e-10);
    CHECK(fn.switch_ages(1).empty());
    CHECK(fn.estimate(0, ages[0] + 1e-6) == 1);
    CHECK(fn.estimate(0, ages[0] - 1e-6) == 0);
}

TEST_CASE("MAP dominates martingale") {
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 6; ++rep) {
        const auto g = GeneratorMatrix::validate(oracle::random_generator(rng, 3 + rep % 3, 0.5));
        const MatchProbabilityFn mart(g, EstimatorKind::Martingale);
        const MatchProbabilityFn map(g, EstimatorKind::MAP);
        for (double t = 0.0; t < 20.0; t += 0.173) {
            for (std::size_t i = 0; i < g.size(); ++i) CHECK(map.value(i, t) >= mart.value(i, t) - 1e-12);
        }
    }
}

TEST_CASE("monotonicity check") {
    const MatchProbabilityFn bin(GeneratorMatrix::binary(1, 0.1), EstimatorKind::Martingale);
    CHECK(is_monotone_decreasing(MatchProfile::aggregate(bin), bin.horizon(), 2000));
    CHECK(is_monotone_decreasing([](double) { return 0.3; }, 10.0, 100));
    CHECK_FALSE(is_monotone_decreasing([](double t) { return std::cos(t); }, 10.0, 100));

    // Complex eigenvalues make P_ii(t) of the unidirectional cycle oscillate.
    const MatchProbabilityFn cyc(GeneratorMatrix::validate(cycle3()), EstimatorKind::Martingale);
    CHECK_FALSE(is_monotone_decreasing(MatchProfile::aggregate(cyc), cyc.horizon(), 2000));
    bool dense_increase = false;
    for (double t = 0.0; t < 10.0; t += 0.001) {
        dense_increase |= cyc.aggregate(t + 0.001) > cyc.aggregate(t) + 1e-10;
    }
    CHECK(dense_increase);
}

TEST_CASE("martingale match probability decreases on reversible chains") {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 6; ++rep) {
        const int n = 2 + rep % 4;
        Vector pi = Vector::NullaryExpr(n, [&](Eigen::Index) { return std::uniform_real_distribution<double>(0.1, 1.0)(rng); });
        pi /= pi.sum();
        const auto g = GeneratorMatrix::validate(oracle::reversible_generator(rng, pi));
        const MatchProbabilityFn fn(g, EstimatorKind::Martingale);
        for (std::size_t i = 0; i < g.size(); ++i) {
            CHECK(is_monotone_decreasing(MatchProfile::state(fn, i), fn.horizon(), 2000));
            for (double t = 0.0; t < 15.0; t += 0.05) CHECK(fn.value(i, t + 0.05) <= fn.value(i, t) + 1e-10);
        }
        CHECK(is_monotone_decreasing(MatchProfile::aggregate(fn), fn.horizon(), 2000));
    }
}
