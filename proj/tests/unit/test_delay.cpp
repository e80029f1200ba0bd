#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "freshquery/delay.hpp"
#include "freshquery/errors.hpp"
#include "oracles.hpp"

#include <algorithm>

using namespace freshq;

namespace {

DelayDistribution two_atoms(double d1) { return DelayDistribution::discrete({{0, 0.5}, {d1, 0.5}}); }

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidArgument;
}

// Kolmogorov-Smirnov distance between a sample and a cdf.
double ks_distance(std::vector<double> xs, const std::function<double(double)>& cdf) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        // Compare against the empirical cdf just after the last copy of a tied value.
        if (k + 1 < xs.size() && xs[k + 1] == xs[k]) continue;
        const double f = cdf(xs[k]);
        d = std::max(d, std::abs((k + 1) / n - f));
        // The empirical cdf just below a run of ties equals the value before the run.
        std::size_t first = k;
        while (first > 0 && xs[first - 1] == xs[k]) --first;
        d = std::max(d, std::abs(first / n - (f - (cdf(xs[k]) - cdf(std::nextafter(xs[k], -1.0))))));
    }
    return d;
}

}  // namespace

TEST_CASE("cdf of the basic families") {
    CHECK(two_atoms(2).cdf(1.0) == 0.5);
    CHECK(std::abs(DelayDistribution::exponential(1).cdf(1.0) - (1 - std::exp(-1.0))) < 1e-15);
    CHECK(std::abs(DelayDistribution::exponential(1).cdf(1.0) - 0.632121) < 1e-6);
    for (const auto& d : {two_atoms(2), DelayDistribution::exponential(3), DelayDistribution::deterministic(1.5)}) {
        CHECK(d.cdf(-0.1) == 0.0);
    }
    // Right-continuity at an atom.
    CHECK(two_atoms(2).cdf(2.0) == 1.0);
    CHECK(two_atoms(2).cdf(0.0) == 0.5);
}

TEST_CASE("invalid delay distributions") {
    CHECK(code_of([] { DelayDistribution::discrete({{0, 0.5}, {1, 0.4}}); }) == ErrorCode::InvalidDistribution);
    CHECK(code_of([] { DelayDistribution::discrete({{-1, 0.5}, {1, 0.5}}); }) == ErrorCode::InvalidDistribution);
    CHECK(code_of([] { DelayDistribution::discrete({{0, 0}, {1, 1}}); }) == ErrorCode::InvalidDistribution);
    CHECK(code_of([] { DelayDistribution::exponential(0); }) == ErrorCode::InvalidDistribution);
    CHECK(code_of([] { DelayDistribution::deterministic(-2); }) == ErrorCode::InvalidDistribution);
    // Near-equal atoms merge.
    const auto merged = DelayDistribution::discrete({{1, 0.25}, {1 + 1e-13, 0.25}, {0, 0.5}});
    CHECK(merged.atoms().size() == 2);
    CHECK(merged.atoms()[1].prob == doctest::Approx(0.5));
}

TEST_CASE("convolution of atoms") {
    const auto y = DelayDistribution::discrete({{0.3, 0.3}, {0.5, 0.3}, {1, 0.4}});
    const auto d = two_atoms(2);
    const CombinedDelay z = convolve(y, d);
    // Direct enumeration of the Cartesian sum.
    std::vector<Atom> expected;
    for (const Atom& a : y.atoms()) {
        for (const Atom& b : d.atoms()) expected.push_back({a.value + b.value, a.prob * b.prob});
    }
    std::sort(expected.begin(), expected.end(), [](auto& a, auto& b) { return a.value < b.value; });
    REQUIRE(z.components().size() == 6);
    const double values[] = {0.3, 0.5, 1, 2.3, 2.5, 3};
    const double probs[] = {0.15, 0.15, 0.2, 0.15, 0.15, 0.2};
    for (std::size_t k = 0; k < 6; ++k) {
        CHECK(z.components()[k].is_point());
        CHECK(std::abs(z.components()[k].shift - expected[k].value) < 1e-15);
        CHECK(std::abs(z.components()[k].weight - expected[k].prob) < 1e-15);
        CHECK(std::abs(z.components()[k].shift - values[k]) < 1e-15);
        CHECK(std::abs(z.components()[k].weight - probs[k]) < 1e-15);
    }
    CHECK(z.is_atomic());
    CHECK(std::abs(z.mean() - (y.mean() + d.mean())) < 1e-12);

    const CombinedDelay same = convolve(DelayDistribution::deterministic(0), two_atoms(0.7));
    REQUIRE(same.components().size() == 2);
    CHECK(same.components()[1].shift == 0.7);

    const CombinedDelay sum = convolve(DelayDistribution::deterministic(0.4), DelayDistribution::deterministic(1.1));
    REQUIRE(sum.components().size() == 1);
    CHECK(std::abs(sum.components()[0].shift - 1.5) < 1e-15);
    CHECK(sum.cdf(1.5) == 1.0);
    CHECK(sum.cdf(1.4999) == 0.0);
}

TEST_CASE("convolutions with exponential parts match closed forms") {
    const double r1 = 2.0;
    const double r2 = 0.5;
    const CombinedDelay hypo = convolve(DelayDistribution::exponential(r1), DelayDistribution::exponential(r2));
    const CombinedDelay erlang = convolve(DelayDistribution::exponential(r2), DelayDistribution::exponential(r2));
    const CombinedDelay shifted = convolve(two_atoms(1.5), DelayDistribution::exponential(r1));
    CHECK(hypo.is_absolutely_continuous());
    CHECK(shifted.is_absolutely_continuous());
    CHECK_FALSE(shifted.is_atomic());
    for (double z : {0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 12.0}) {
        const double hypo_ref = 1.0 - (r2 * std::exp(-r1 * z) - r1 * std::exp(-r2 * z)) / (r2 - r1);
        const double erlang_ref = 1.0 - std::exp(-r2 * z) * (1.0 + r2 * z);
        const double shifted_ref = 0.5 * (1.0 - std::exp(-r1 * z)) + (z > 1.5 ? 0.5 * (1.0 - std::exp(-r1 * (z - 1.5))) : 0.0);
        CHECK(std::abs(hypo.cdf(z) - hypo_ref) < 1e-14);
        CHECK(std::abs(erlang.cdf(z) - erlang_ref) < 1e-14);
        CHECK(std::abs(shifted.cdf(z) - shifted_ref) < 1e-14);
        const double hd = r1 * r2 / (r2 - r1) * (std::exp(-r1 * z) - std::exp(-r2 * z));
        CHECK(std::abs(hypo.density(z) - hd) < 1e-13);
        CHECK(std::abs(erlang.density(z) - r2 * r2 * z * std::exp(-r2 * z)) < 1e-13);
    }
    CHECK_THROWS_AS(convolve(two_atoms(1), DelayDistribution::deterministic(0)).density(0.5), Error);
    // A third exponential stage has no closed form here.
    CHECK(code_of([&] { convolve(hypo, CombinedDelay::from(DelayDistribution::exponential(1))); }) ==
          ErrorCode::UnsupportedPair);
}

TEST_CASE("mean equals the integrated survival") {
    const std::vector<CombinedDelay> cases = {
        convolve(DelayDistribution::exponential(2), DelayDistribution::exponential(0.5)),
        convolve(DelayDistribution::exponential(0.8), DelayDistribution::exponential(0.8)),
        convolve(DelayDistribution::discrete({{0.3, 0.3}, {0.5, 0.3}, {1, 0.4}}), DelayDistribution::exponential(1.3)),
        convolve(DelayDistribution::discrete({{0.3, 0.3}, {0.5, 0.3}, {1, 0.4}}), two_atoms(2)),
    };
    for (const CombinedDelay& z : cases) {
        // Split at the atoms so Simpson never straddles a jump.
        std::vector<double> cuts = z.kinks();
        cuts.push_back(0.0);
        cuts.push_back(80.0);
        std::sort(cuts.begin(), cuts.end());
        double integral = 0.0;
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            if (cuts[k + 1] > cuts[k]) {
                const double right = cuts[k + 1];
                // Left limit at the right end, where an atom would add a jump.
                integral += oracle::simpson(
                    [&](double x) { return z.survival(x < right ? x : std::nextafter(right, 0.0)); },
                    cuts[k], right, 20000);
            }
        }
        CHECK(std::abs(integral - z.mean()) < 1e-6);
    }
}

TEST_CASE("convolution commutes") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-0.5, 8.0);
    const std::vector<DelayDistribution> ds = {two_atoms(1.2), DelayDistribution::exponential(0.7),
                                               DelayDistribution::exponential(2.5), DelayDistribution::deterministic(0.4),
                                               DelayDistribution::discrete({{0.3, 0.3}, {0.5, 0.3}, {1, 0.4}})};
    for (const auto& a : ds) {
        for (const auto& b : ds) {
            const CombinedDelay ab = convolve(a, b);
            const CombinedDelay ba = convolve(b, a);
            double worst = 0.0;
            for (int k = 0; k < 1000; ++k) {
                const double x = u(rng);
                worst = std::max(worst, std::abs(ab.cdf(x) - ba.cdf(x)));
            }
            CHECK(worst < 1e-14);
            CHECK(std::abs(ab.mean() - (a.mean() + b.mean())) < 1e-10);
        }
    }
}

TEST_CASE("sampling") {
    std::mt19937_64 rng(2024);
    const auto det = DelayDistribution::deterministic(1.5);
    for (int k = 0; k < 100; ++k) CHECK(det.sample(rng) == 1.5);

    const int n = 1000000;
    const auto atoms = two_atoms(2);
    std::vector<double> xs(n);
    int zeros = 0;
    for (auto& x : xs) {
        x = atoms.sample(rng);
        zeros += x == 0.0;
    }
    CHECK(std::abs(zeros / double(n) - 0.5) < 0.0015);
    CHECK(ks_distance(xs, [&](double x) { return atoms.cdf(x); }) < 0.005);

    const auto ex = DelayDistribution::exponential(2);
    double sum = 0.0;
    for (auto& x : xs) {
        x = ex.sample(rng);
        sum += x;
    }
    CHECK(std::abs(sum / n - 0.5) < 0.0015);
    CHECK(ks_distance(xs, [&](double x) { return ex.cdf(x); }) < 0.005);

    const auto three = DelayDistribution::discrete({{0.3, 0.3}, {0.5, 0.3}, {1, 0.4}});
    for (auto& x : xs) x = three.sample(rng);
    CHECK(ks_distance(xs, [&](double x) { return three.cdf(x); }) < 0.005);
}

TEST_CASE("shifted tail cdf") {
    const CombinedDelay any = CombinedDelay::from(DelayDistribution::exponential(1));
    CHECK(tail_cdf_shifted(any, 0.5, 1.5) == 1.0);
    CHECK(tail_cdf_shifted(CombinedDelay::from(two_atoms(2)), 1.0, 0.0) == 0.5);
    CHECK(std::abs(tail_cdf_shifted(any, 2.0, 0.5) - std::exp(-1.5)) < 1e-15);
    CHECK(std::abs(tail_cdf_shifted(any, 2.0, 0.5) - 0.223130) < 1e-6);
    CHECK(tail_cdf_shifted(CombinedDelay::from(two_atoms(2)), 0.7, 0.7) == 1.0);
}
