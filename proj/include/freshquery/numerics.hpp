#pragma once

#include "freshquery/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace freshq::numerics {

inline double max_abs(double v) { return std::abs(v); }
inline double max_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

namespace detail {

template <class F, class V>
V simpson_step(F& f, double a, double b, const V& fa, const V& fm, const V& fb, const V& whole,
               double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const V flm = f(lm);
    const V frm = f(rm);
    const V left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const V right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const V delta = left + right - whole;
    if (max_abs(delta) <= 15.0 * tol) {
        return left + right + delta / 15.0;
    }
    if (depth <= 0) {
        throw Error(ErrorCode::QuadratureNonConvergence,
                    "adaptive Simpson exhausted its depth on [" + std::to_string(a) + ", " +
                        std::to_string(b) + "]");
    }
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson quadrature of f over [a, b] with absolute tolerance `tol`.
/// V is double or Eigen::VectorXd (the error test uses the max norm).
template <class V, class F>
V adaptive_simpson(F&& f, double a, double b, double tol, int max_depth = 40) {
    const double m = 0.5 * (a + b);
    const V fa = f(a);
    const V fm = f(m);
    const V fb = f(b);
    const V whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// Integrates over [a, b], splitting at every breakpoint that falls strictly inside.
/// The interval is also pre-split into `min_pieces` uniform parts so Simpson's
/// first estimate cannot miss narrow features.
template <class V, class F>
V integrate_piecewise(F&& f, double a, double b, std::span<const double> breaks, double tol,
                      V zero, int min_pieces = 8) {
    if (!(b > a)) return zero;
    std::vector<double> cuts{a};
    for (double x : breaks) {
        if (x > a && x < b) cuts.push_back(x);
    }
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    V total = zero;
    const double piece_tol = tol / static_cast<double>(cuts.size() - 1) / min_pieces;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double lo = cuts[k];
        const double hi = cuts[k + 1];
        if (!(hi > lo)) continue;
        for (int p = 0; p < min_pieces; ++p) {
            const double x0 = lo + (hi - lo) * p / min_pieces;
            const double x1 = p + 1 == min_pieces ? hi : lo + (hi - lo) * (p + 1) / min_pieces;
            total = total + adaptive_simpson<V>(f, x0, x1, piece_tol);
        }
    }
    return total;
}

/// Golden-section maximization of a unimodal f on [a, b], to width `tol`.
/// Returns the best of the final bracket and both end points.
template <class F>
double golden_section_max(F&& f, double a, double b, double tol) {
    constexpr double inv_phi = 0.6180339887498949;
    const double fa = f(a);
    const double fb = f(b);
    double lo = a;
    double hi = b;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = f(x1);
    double f2 = f(x2);
    while (hi - lo > tol) {
        if (f1 >= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    double best = f1 >= f2 ? x1 : x2;
    double fbest = std::max(f1, f2);
    if (fa >= fbest) {
        best = a;
        fbest = fa;
    }
    if (fb > fbest) best = b;
    return best;
}

}  // namespace freshq::numerics
