#pragma once

#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace freshq {

struct Atom {
    double value = 0.0;
    double prob = 0.0;
};

/// Atoms closer than this are merged into one support point.
inline constexpr double kAtomMergeTolerance = 1e-12;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Distribution of a single non-negative delay (forward Y or backward D).
class DelayDistribution {
public:
    enum class Kind { Deterministic, DiscreteAtoms, Exponential };

    static DelayDistribution deterministic(double value);
    /// Sorts by value and merges near-equal atoms; probabilities must be positive and sum to 1.
    static DelayDistribution discrete(std::vector<Atom> atoms);
    static DelayDistribution exponential(double rate);

    Kind kind() const noexcept { return kind_; }
    bool is_atomic() const noexcept { return kind_ != Kind::Exponential; }
    /// Support points in increasing order (empty for Exponential).
    std::span<const Atom> atoms() const noexcept { return atoms_; }
    double rate() const noexcept { return rate_; }

    double cdf(double x) const;
    double survival(double x) const { return 1.0 - cdf(x); }
    double mean() const;
    double support_max() const;

    double sample(std::mt19937_64& rng) const;

    std::string describe() const;

private:
    Kind kind_ = Kind::Deterministic;
    std::vector<Atom> atoms_;
    std::vector<double> cumulative_;
    double rate_ = 0.0;
};

/// One mixture component of a combined delay: `shift` plus a point mass, an
/// exponential, or a two-phase hypoexponential (Erlang-2 when the rates agree).
struct DelayComponent {
    enum class Shape { Point, Exponential, Hypoexponential };

    Shape shape = Shape::Point;
    double weight = 0.0;
    double shift = 0.0;
    double rate1 = 0.0;
    double rate2 = 0.0;

    bool is_point() const noexcept { return shape == Shape::Point; }
    bool is_erlang() const noexcept;
    /// Survival of the continuous part at x >= 0 (measured from `shift`).
    double residual_survival(double x) const;
    /// Density of the continuous part at x >= 0.
    double residual_density(double x) const;
    double residual_mean() const;
};

/// Distribution of Z = Y + D as a finite mixture of shifted components.
class CombinedDelay {
public:
    CombinedDelay() = default;
    explicit CombinedDelay(std::vector<DelayComponent> components);
    static CombinedDelay from(const DelayDistribution& dist);

    std::span<const DelayComponent> components() const noexcept { return components_; }

    double cdf(double x) const;
    double survival(double x) const { return 1.0 - cdf(x); }
    double mean() const;
    /// Throws DensityUnavailable if the distribution has atoms.
    double density(double x) const;

    bool is_absolutely_continuous() const noexcept;
    bool is_atomic() const noexcept;
    double support_max() const;
    /// Point x with the integrated survival beyond x below `eps`.
    double tail_point(double eps) const;
    /// Shifts of all components, i.e. the atoms and the kink points of the cdf.
    std::vector<double> kinks() const;

private:
    std::vector<DelayComponent> components_;
};

/// Distribution of the sum of two independent delays.
CombinedDelay convolve(const DelayDistribution& y, const DelayDistribution& d);
/// General mixture convolution. Throws UnsupportedPair when both sides carry a
/// continuous part whose sum is not a two-phase hypoexponential.
CombinedDelay convolve(const CombinedDelay& a, const CombinedDelay& b);

/// 1 - F^Z(t - w); equals 1 whenever t <= w.
double tail_cdf_shifted(const CombinedDelay& z, double t, double w);

}  // namespace freshq
