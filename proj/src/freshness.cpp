#include "freshquery/freshness.hpp"

#include "freshquery/errors.hpp"
#include "freshquery/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace freshq {

namespace {

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

}  // namespace

std::map<std::string, double> FreshnessReport::record() const {
    std::map<std::string, double> out{
        {"mbf", mbf}, {"numerator", numerator}, {"denominator", denominator}};
    for (Eigen::Index i = 0; i < phi.size(); ++i) {
        out["phi_" + std::to_string(i + 1)] = phi(i);
        out["g_" + std::to_string(i + 1)] = per_state_g(i);
    }
    return out;
}

std::string FreshnessReport::csv_header(std::size_t states) {
    std::string h = "mbf,numerator,denominator";
    for (std::size_t i = 1; i <= states; ++i) h += ",phi_" + std::to_string(i);
    for (std::size_t i = 1; i <= states; ++i) h += ",g_" + std::to_string(i);
    return h;
}

std::string FreshnessReport::csv_row() const {
    std::string r = fmt9(mbf) + "," + fmt9(numerator) + "," + fmt9(denominator);
    for (Eigen::Index i = 0; i < phi.size(); ++i) r += "," + fmt9(phi(i));
    for (Eigen::Index i = 0; i < per_state_g.size(); ++i) r += "," + fmt9(per_state_g(i));
    return r;
}

FreshnessModel::FreshnessModel(GeneratorMatrix g, EstimatorKind kind, DelayDistribution forward,
                               DelayDistribution backward, const FreshnessOptions& opts)
    : match_(std::move(g), kind, opts.match),
      forward_(std::move(forward)),
      backward_(std::move(backward)),
      combined_(convolve(forward_, backward_)),
      opts_(opts) {
    mean_z_ = combined_.mean();
    const GeneratorMatrix& gen = match_.generator();
    const auto n = static_cast<Eigen::Index>(gen.size());

    if (forward_.is_atomic()) {
        forward_transform_ = Matrix::Zero(n, n);
        for (const Atom& a : forward_.atoms()) forward_transform_ += a.prob * match_.transition(a.value);
    } else {
        forward_transform_ = forward_.rate() * resolvent(gen, forward_.rate());
    }

    combined_transform_ = Matrix::Zero(n, n);
    for (const DelayComponent& c : combined_.components()) {
        if (c.is_point()) continue;
        for (double r : {c.rate1, c.rate2}) {
            const bool known = std::any_of(resolvents_.begin(), resolvents_.end(),
                                           [&](const auto& e) { return e.first == r; });
            if (r > 0.0 && !known) resolvents_.emplace_back(r, resolvent(gen, r));
        }
    }
    for (const DelayComponent& c : combined_.components()) {
        Matrix survival = Matrix::Zero(n, n);
        Matrix density = Matrix::Identity(n, n);
        if (c.shape == DelayComponent::Shape::Exponential) {
            const Matrix r = resolvent(gen, c.rate1);
            survival = r;
            density = c.rate1 * r;
        } else if (c.shape == DelayComponent::Shape::Hypoexponential) {
            const Matrix r1 = resolvent(gen, c.rate1);
            if (c.is_erlang()) {
                survival = r1 + c.rate1 * r1 * r1;
                density = c.rate1 * c.rate1 * r1 * r1;
            } else {
                const Matrix r2 = resolvent(gen, c.rate2);
                survival = (c.rate2 * r1 - c.rate1 * r2) / (c.rate2 - c.rate1);
                density = c.rate1 * c.rate2 * r1 * r2;
            }
        }
        survival_transforms_.push_back(std::move(survival));
        density_transforms_.push_back(density);
        combined_transform_ += c.weight * match_.transition(c.shift) * density;
    }
}

const Matrix& FreshnessModel::resolvent_at(double rate) const {
    for (const auto& [r, m] : resolvents_) {
        if (r == rate) return m;
    }
    throw Error(ErrorCode::InvalidArgument, "no resolvent cached for this rate");
}

double FreshnessModel::exp_moment(std::size_t i, double b, double rate, int power) const {
    // On a piece [l, u) with a fixed estimate s, F(t) = exp(-rate (t - b)) P(t) has
    // F' = F (Q - rate I), so the integral of F is (F(l) - F(u)) R with R = (rate I - Q)^-1,
    // and the integral of (t - b) F is (that - [(t - b) F]_l^u) R.
    const Matrix& res = resolvent_at(rate);
    const auto row = static_cast<Eigen::Index>(i);
    auto f_row = [&](double t) -> Vector {
        return std::exp(-rate * (t - b)) * match_.transition(t).row(row).transpose();
    };
    const auto pieces = match_.pieces(i);
    double acc = 0.0;
    for (std::size_t k = 0; k < pieces.size(); ++k) {
        const double end = k + 1 < pieces.size() ? pieces[k + 1].start : kInfinity;
        const double lo = std::max(b, pieces[k].start);
        if (!(end > lo)) continue;
        const auto col = static_cast<Eigen::Index>(pieces[k].state);
        const Vector f_lo = f_row(lo);
        const Vector f_hi = std::isinf(end) ? Vector::Zero(f_lo.size()) : f_row(end);
        const Vector flat = f_lo - f_hi;
        if (power == 0) {
            acc += flat.dot(res.col(col));
        } else {
            const Vector first = (flat.transpose() * res).transpose();
            const Vector edge = (std::isinf(end) ? 0.0 : end - b) * f_hi - (lo - b) * f_lo;
            acc += (first - edge).dot(res.col(col));
        }
    }
    return acc;
}

double FreshnessModel::continuous_window(std::size_t i, double b, const DelayComponent& c,
                                         bool density) const {
    const double r1 = c.rate1;
    if (c.shape == DelayComponent::Shape::Exponential) {
        return (density ? r1 : 1.0) * exp_moment(i, b, r1, 0);
    }
    if (c.is_erlang()) {
        // S(x) = (1 + r x) e^{-r x}, f(x) = r^2 x e^{-r x}.
        if (density) return r1 * r1 * exp_moment(i, b, r1, 1);
        return exp_moment(i, b, r1, 0) + r1 * exp_moment(i, b, r1, 1);
    }
    const double r2 = c.rate2;
    const double e1 = exp_moment(i, b, r1, 0);
    const double e2 = exp_moment(i, b, r2, 0);
    if (density) return r1 * r2 / (r2 - r1) * (e1 - e2);
    return (r2 * e1 - r1 * e2) / (r2 - r1);
}

Vector FreshnessModel::window_fresh_time(double a) const {
    const auto n = static_cast<Eigen::Index>(states());
    Vector out = Vector::Zero(n);
    const auto comps = combined_.components();
    if (estimator() == EstimatorKind::Martingale) {
        const Vector base = match_.integral(a).diagonal();
        for (std::size_t k = 0; k < comps.size(); ++k) {
            const DelayComponent& c = comps[k];
            const double b = a + c.shift;
            Vector term = match_.integral(b).diagonal() - base;
            if (!c.is_point()) term += (match_.transition(b) * survival_transforms_[k]).diagonal();
            out += c.weight * term;
        }
        return out;
    }
    for (std::size_t i = 0; i < states(); ++i) {
        const double base = match_.cumulative(i, a);
        double acc = 0.0;
        for (const DelayComponent& c : comps) {
            const double b = a + c.shift;
            double term = match_.cumulative(i, b) - base;
            if (!c.is_point()) term += continuous_window(i, b, c, false);
            acc += c.weight * term;
        }
        out(static_cast<Eigen::Index>(i)) = acc;
    }
    return out;
}

Vector FreshnessModel::fresh_time(double d, double w) const {
    const auto n = static_cast<Eigen::Index>(states());
    Vector waited(n);
    if (estimator() == EstimatorKind::Martingale) {
        waited = (match_.integral(d + w) - match_.integral(d)).diagonal();
    } else {
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto s = static_cast<std::size_t>(i);
            waited(i) = match_.cumulative(s, d + w) - match_.cumulative(s, d);
        }
    }
    return waited + window_fresh_time(d + w);
}

double FreshnessModel::expect_backward(const std::function<double(double)>& f,
                                       std::span<const double> kinks) const {
    if (backward_.is_atomic()) {
        double acc = 0.0;
        for (const Atom& a : backward_.atoms()) acc += a.prob * f(a.value);
        return acc;
    }
    const double r = backward_.rate();
    const double reach = (std::log(1.0 / opts_.tail_mass) + 3.0) / r;
    return numerics::integrate_piecewise<double>(
        [&](double d) { return r * std::exp(-r * d) * f(d); }, 0.0, reach, kinks,
        opts_.quadrature_tolerance, 0.0);
}

Vector FreshnessModel::expect_backward(const std::function<Vector(double)>& f, Eigen::Index size,
                                       std::span<const double> kinks) const {
    if (backward_.is_atomic()) {
        Vector acc = Vector::Zero(size);
        for (const Atom& a : backward_.atoms()) acc += a.prob * f(a.value);
        return acc;
    }
    const double r = backward_.rate();
    const double reach = (std::log(1.0 / opts_.tail_mass) + 3.0) / r;
    return numerics::integrate_piecewise<Vector>(
        [&](double d) -> Vector { return r * std::exp(-r * d) * f(d); }, 0.0, reach, kinks,
        opts_.quadrature_tolerance, Vector::Zero(size));
}

double FreshnessModel::density_weighted_match(const Vector& weights, double gamma) const {
    const auto comps = combined_.components();
    if (estimator() == EstimatorKind::Martingale) {
        Vector diag = Vector::Zero(weights.size());
        for (std::size_t k = 0; k < comps.size(); ++k) {
            const DelayComponent& c = comps[k];
            diag += c.weight * (match_.transition(gamma + c.shift) * density_transforms_[k]).diagonal();
        }
        return weights.dot(diag);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < states(); ++i) {
        const double wi = weights(static_cast<Eigen::Index>(i));
        if (wi == 0.0) continue;
        double sum = 0.0;
        for (const DelayComponent& c : comps) {
            const double b = gamma + c.shift;
            if (c.is_point()) {
                sum += c.weight * match_.value(i, b);
                continue;
            }
            sum += c.weight * continuous_window(i, b, c, true);
        }
        acc += wi * sum;
    }
    return acc;
}

SampledChain sampled_chain(const FreshnessModel& model, const WaitingPolicy& w) {
    const auto n = static_cast<Eigen::Index>(model.states());
    Matrix rows(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto s = static_cast<std::size_t>(i);
        const DelayWaitFn& fn = w.for_state(s);
        const auto kinks = fn.kinks();
        rows.row(i) = model
                          .expect_backward(
                              [&](double d) -> Vector {
                                  return model.match().transition(d + fn(d)).row(i).transpose();
                              },
                              n, kinks)
                          .transpose();
    }
    SampledChain out;
    out.p_tilde = rows * model.forward_transform();
    out.phi = stationary_vector(out.p_tilde);
    return out;
}

double expected_g(const FreshnessModel& model, std::size_t i, const WaitingPolicy& w) {
    const DelayWaitFn& fn = w.for_state(i);
    const auto kinks = fn.kinks();
    return model.expect_backward(
        [&](double d) { return model.fresh_time(d, fn(d))(static_cast<Eigen::Index>(i)); },
        kinks);
}

double expected_wait(const FreshnessModel& model, std::size_t i, const WaitingPolicy& w) {
    const DelayWaitFn& fn = w.for_state(i);
    const auto kinks = fn.kinks();
    return model.expect_backward([&](double d) { return fn(d); }, kinks);
}

namespace {

FreshnessReport assemble(const FreshnessModel& model, const WaitingPolicy& w, Vector phi) {
    const auto n = static_cast<Eigen::Index>(model.states());
    FreshnessReport r;
    r.phi = std::move(phi);
    r.per_state_g.resize(n);
    r.per_state_wait.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto s = static_cast<std::size_t>(i);
        r.per_state_g(i) = expected_g(model, s, w);
        r.per_state_wait(i) = expected_wait(model, s, w);
    }
    r.numerator = r.phi.dot(r.per_state_g);
    r.denominator = model.mean_z() + r.phi.dot(r.per_state_wait);
    if (!(r.denominator > 1e-15)) {
        throw Error(ErrorCode::DegenerateCycle, "mean cycle length is zero");
    }
    r.mbf = r.numerator / r.denominator;
    return r;
}

}  // namespace

FreshnessReport mbf_analytic(const FreshnessModel& model, const WaitingPolicy& w) {
    // With no delay and no wait the sampled chain is the identity, so phi is not
    // unique; report the empty cycle instead of a singular solve.
    if (model.mean_z() <= 1e-15) {
        double longest = 0.0;
        for (std::size_t i = 0; i < model.states(); ++i) longest = std::max(longest, w.for_state(i).max_wait());
        if (longest <= 1e-15) throw Error(ErrorCode::DegenerateCycle, "mean cycle length is zero");
    }
    return assemble(model, w, sampled_chain(model, w).phi);
}

FreshnessReport zero_wait_mbf(const FreshnessModel& model) {
    return assemble(model, WaitingPolicy::zero_wait(), model.pi());
}

SampledChain sampled_chain(const GeneratorMatrix& g, const DelayDistribution& y,
                           const DelayDistribution& d, const WaitingPolicy& w) {
    return sampled_chain(FreshnessModel(g, EstimatorKind::Martingale, y, d), w);
}

FreshnessReport mbf_analytic(const GeneratorMatrix& g, EstimatorKind kind,
                             const DelayDistribution& y, const DelayDistribution& d,
                             const WaitingPolicy& w) {
    return mbf_analytic(FreshnessModel(g, kind, y, d), w);
}

FreshnessReport zero_wait_mbf(const GeneratorMatrix& g, EstimatorKind kind,
                              const DelayDistribution& y, const DelayDistribution& d) {
    return zero_wait_mbf(FreshnessModel(g, kind, y, d));
}

}  // namespace freshq
