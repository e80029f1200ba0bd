#include "freshquery/delay.hpp"

#include "freshquery/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace freshq {

namespace {

void validate_value(double v) {
    if (!std::isfinite(v) || v < 0.0) {
        throw Error(ErrorCode::InvalidDistribution, "delay values must be finite and >= 0");
    }
}

// Sort, merge near-equal points and drop zero weights. Used for atoms and for
// point components of mixtures alike.
std::vector<Atom> normalize_atoms(std::vector<Atom> atoms) {
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& a, const Atom& b) { return a.value < b.value; });
    std::vector<Atom> merged;
    for (const Atom& a : atoms) {
        if (!merged.empty() && a.value - merged.back().value < kAtomMergeTolerance) {
            merged.back().prob += a.prob;
        } else {
            merged.push_back(a);
        }
    }
    return merged;
}

bool same_rate(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(a, b); }

}  // namespace

DelayDistribution DelayDistribution::deterministic(double value) {
    validate_value(value);
    DelayDistribution d;
    d.kind_ = Kind::Deterministic;
    d.atoms_ = {{value, 1.0}};
    d.cumulative_ = {1.0};
    return d;
}

DelayDistribution DelayDistribution::discrete(std::vector<Atom> atoms) {
    if (atoms.empty()) throw Error(ErrorCode::InvalidDistribution, "no atoms");
    double total = 0.0;
    for (const Atom& a : atoms) {
        validate_value(a.value);
        if (!(a.prob > 0.0)) {
            throw Error(ErrorCode::InvalidDistribution, "atom probabilities must be positive");
        }
        total += a.prob;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw Error(ErrorCode::InvalidDistribution, "atom probabilities sum to " +
                                                        std::to_string(total));
    }
    DelayDistribution d;
    d.atoms_ = normalize_atoms(std::move(atoms));
    d.kind_ = d.atoms_.size() == 1 ? Kind::Deterministic : Kind::DiscreteAtoms;
    double acc = 0.0;
    for (const Atom& a : d.atoms_) {
        acc += a.prob;
        d.cumulative_.push_back(acc);
    }
    d.cumulative_.back() = 1.0;
    return d;
}

DelayDistribution DelayDistribution::exponential(double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) {
        throw Error(ErrorCode::InvalidDistribution, "exponential rate must be positive");
    }
    DelayDistribution d;
    d.kind_ = Kind::Exponential;
    d.rate_ = rate;
    return d;
}

double DelayDistribution::cdf(double x) const {
    if (x < 0.0) return 0.0;
    if (kind_ == Kind::Exponential) return -std::expm1(-rate_ * x);
    double f = 0.0;
    for (const Atom& a : atoms_) {
        if (a.value <= x) f += a.prob;
    }
    return std::min(f, 1.0);
}

double DelayDistribution::mean() const {
    if (kind_ == Kind::Exponential) return 1.0 / rate_;
    double m = 0.0;
    for (const Atom& a : atoms_) m += a.prob * a.value;
    return m;
}

double DelayDistribution::support_max() const {
    return kind_ == Kind::Exponential ? kInfinity : atoms_.back().value;
}

double DelayDistribution::sample(std::mt19937_64& rng) const {
    if (kind_ == Kind::Exponential) {
        return std::exponential_distribution<double>(rate_)(rng);
    }
    if (atoms_.size() == 1) return atoms_.front().value;
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                           atoms_.size() - 1);
    return atoms_[idx].value;
}

std::string DelayDistribution::describe() const {
    std::ostringstream os;
    if (kind_ == Kind::Exponential) {
        os << "Exp(" << rate_ << ")";
        return os.str();
    }
    os << "{";
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
        if (k) os << " ";
        os << atoms_[k].value << ":" << atoms_[k].prob;
    }
    os << "}";
    return os.str();
}

bool DelayComponent::is_erlang() const noexcept {
    return shape == Shape::Hypoexponential && same_rate(rate1, rate2);
}

double DelayComponent::residual_survival(double x) const {
    if (x < 0.0) return 1.0;
    switch (shape) {
        case Shape::Point:
            return 0.0;
        case Shape::Exponential:
            return std::exp(-rate1 * x);
        case Shape::Hypoexponential:
            if (is_erlang()) return std::exp(-rate1 * x) * (1.0 + rate1 * x);
            return (rate2 * std::exp(-rate1 * x) - rate1 * std::exp(-rate2 * x)) /
                   (rate2 - rate1);
    }
    return 0.0;
}

double DelayComponent::residual_density(double x) const {
    if (x < 0.0) return 0.0;
    switch (shape) {
        case Shape::Point:
            throw Error(ErrorCode::DensityUnavailable, "point mass has no density");
        case Shape::Exponential:
            return rate1 * std::exp(-rate1 * x);
        case Shape::Hypoexponential:
            if (is_erlang()) return rate1 * rate1 * x * std::exp(-rate1 * x);
            return rate1 * rate2 * (std::exp(-rate1 * x) - std::exp(-rate2 * x)) /
                   (rate2 - rate1);
    }
    return 0.0;
}

double DelayComponent::residual_mean() const {
    switch (shape) {
        case Shape::Point: return 0.0;
        case Shape::Exponential: return 1.0 / rate1;
        case Shape::Hypoexponential: return 1.0 / rate1 + 1.0 / rate2;
    }
    return 0.0;
}

CombinedDelay::CombinedDelay(std::vector<DelayComponent> components) {
    std::vector<Atom> points;
    for (const DelayComponent& c : components) {
        if (!(c.weight > 0.0)) continue;
        validate_value(c.shift);
        if (c.is_point()) {
            points.push_back({c.shift, c.weight});
            continue;
        }
        // Merge continuous components with the same shape, rates and shift.
        auto it = std::find_if(components_.begin(), components_.end(), [&](const DelayComponent& o) {
            return o.shape == c.shape && std::abs(o.shift - c.shift) < kAtomMergeTolerance &&
                   same_rate(o.rate1, c.rate1) && same_rate(o.rate2, c.rate2);
        });
        if (it != components_.end()) {
            it->weight += c.weight;
        } else {
            components_.push_back(c);
        }
    }
    for (const Atom& a : normalize_atoms(std::move(points))) {
        components_.push_back({DelayComponent::Shape::Point, a.prob, a.value, 0.0, 0.0});
    }
    std::stable_sort(components_.begin(), components_.end(),
                     [](const DelayComponent& a, const DelayComponent& b) {
                         return a.shift < b.shift;
                     });
}

CombinedDelay CombinedDelay::from(const DelayDistribution& dist) {
    std::vector<DelayComponent> comps;
    if (dist.kind() == DelayDistribution::Kind::Exponential) {
        comps.push_back({DelayComponent::Shape::Exponential, 1.0, 0.0, dist.rate(), 0.0});
    } else {
        for (const Atom& a : dist.atoms()) {
            comps.push_back({DelayComponent::Shape::Point, a.prob, a.value, 0.0, 0.0});
        }
    }
    return CombinedDelay(std::move(comps));
}

double CombinedDelay::cdf(double x) const {
    if (x < 0.0) return 0.0;
    double f = 0.0;
    for (const DelayComponent& c : components_) {
        if (x < c.shift) continue;
        f += c.weight * (1.0 - c.residual_survival(x - c.shift));
    }
    return std::clamp(f, 0.0, 1.0);
}

double CombinedDelay::mean() const {
    double m = 0.0;
    for (const DelayComponent& c : components_) m += c.weight * (c.shift + c.residual_mean());
    return m;
}

double CombinedDelay::density(double x) const {
    if (!is_absolutely_continuous()) {
        throw Error(ErrorCode::DensityUnavailable, "combined delay has atoms");
    }
    double f = 0.0;
    for (const DelayComponent& c : components_) {
        if (x >= c.shift) f += c.weight * c.residual_density(x - c.shift);
    }
    return f;
}

bool CombinedDelay::is_absolutely_continuous() const noexcept {
    return std::none_of(components_.begin(), components_.end(),
                        [](const DelayComponent& c) { return c.is_point(); });
}

bool CombinedDelay::is_atomic() const noexcept {
    return std::all_of(components_.begin(), components_.end(),
                       [](const DelayComponent& c) { return c.is_point(); });
}

double CombinedDelay::support_max() const {
    double m = 0.0;
    for (const DelayComponent& c : components_) {
        m = std::max(m, c.is_point() ? c.shift : kInfinity);
    }
    return m;
}

double CombinedDelay::tail_point(double eps) const {
    double x = 0.0;
    for (const DelayComponent& c : components_) {
        double reach = c.shift;
        if (!c.is_point()) {
            // Integrated survival of an exponential tail with the slowest rate,
            // padded for the Erlang/hypoexponential polynomial factor.
            const double slow = std::min(c.rate1, c.shape == DelayComponent::Shape::Exponential
                                                      ? c.rate1
                                                      : c.rate2);
            reach += (std::log(1.0 / (eps * slow)) + 4.0) / slow;
        }
        x = std::max(x, reach);
    }
    return x;
}

std::vector<double> CombinedDelay::kinks() const {
    std::vector<double> out;
    for (const DelayComponent& c : components_) out.push_back(c.shift);
    return out;
}

CombinedDelay convolve(const CombinedDelay& a, const CombinedDelay& b) {
    using Shape = DelayComponent::Shape;
    std::vector<DelayComponent> out;
    for (const DelayComponent& x : a.components()) {
        for (const DelayComponent& y : b.components()) {
            DelayComponent c;
            c.weight = x.weight * y.weight;
            c.shift = x.shift + y.shift;
            if (x.is_point() || y.is_point()) {
                const DelayComponent& cont = x.is_point() ? y : x;
                c.shape = cont.shape;
                c.rate1 = cont.rate1;
                c.rate2 = cont.rate2;
            } else if (x.shape == Shape::Exponential && y.shape == Shape::Exponential) {
                c.shape = Shape::Hypoexponential;
                c.rate1 = std::min(x.rate1, y.rate1);
                c.rate2 = std::max(x.rate1, y.rate1);
            } else {
                throw Error(ErrorCode::UnsupportedPair,
                            "convolution beyond two exponential phases; discretize first");
            }
            out.push_back(c);
        }
    }
    return CombinedDelay(std::move(out));
}

CombinedDelay convolve(const DelayDistribution& y, const DelayDistribution& d) {
    return convolve(CombinedDelay::from(y), CombinedDelay::from(d));
}

double tail_cdf_shifted(const CombinedDelay& z, double t, double w) {
    if (t <= w) return 1.0;
    return z.survival(t - w);
}

}  // namespace freshq
