#include "freshquery/ctmc.hpp"

#include "freshquery/errors.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace freshq {

namespace {

// Poisson(lambda) probabilities for k = 0..R, with R chosen so the mass beyond R is
// below `tail`. Computed in log space so large lambda does not underflow.
std::vector<double> poisson_weights(double lambda, double tail, std::size_t max_terms) {
    std::vector<double> w;
    if (lambda == 0.0) {
        w.push_back(1.0);
        return w;
    }
    const double log_lambda = std::log(lambda);
    for (std::size_t k = 0;; ++k) {
        if (k >= max_terms) {
            throw Error(ErrorCode::NumericalOverflow,
                        "uniformization needs more than " + std::to_string(max_terms) +
                            " terms (lambda*t = " + std::to_string(lambda) + ")");
        }
        const double kd = static_cast<double>(k);
        w.push_back(std::exp(-lambda + kd * log_lambda - std::lgamma(kd + 1.0)));
        if (kd + 2.0 > lambda) {
            // Geometric bound on the remaining mass past k.
            const double next = w.back() * lambda / (kd + 1.0);
            const double bound = next / (1.0 - lambda / (kd + 2.0));
            if (bound < tail) break;
        }
    }
    return w;
}

}  // namespace

GeneratorMatrix::GeneratorMatrix(Matrix rates) : rates_(std::move(rates)) {
    lambda_ = rates_.diagonal().cwiseAbs().maxCoeff();
}

GeneratorMatrix GeneratorMatrix::validate(const Matrix& rates, const CtmcOptions& opts) {
    if (rates.rows() != rates.cols()) {
        throw Error(ErrorCode::NonSquare, "generator is " + std::to_string(rates.rows()) + "x" +
                                              std::to_string(rates.cols()));
    }
    if (rates.rows() < 2) {
        throw Error(ErrorCode::NonSquare, "generator needs at least two states");
    }
    const auto n = rates.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        double row = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double q = rates(i, j);
            if (!std::isfinite(q)) {
                throw Error(ErrorCode::InvalidArgument, "non-finite rate");
            }
            if (i != j && q < 0.0) {
                throw Error(ErrorCode::NegativeOffDiagonal,
                            "Q(" + std::to_string(i) + "," + std::to_string(j) + ") < 0");
            }
            row += q;
        }
        if (std::abs(row) > opts.row_sum_tolerance) {
            throw Error(ErrorCode::RowSumNonzero,
                        "row " + std::to_string(i) + " sums to " + std::to_string(row));
        }
    }
    if (!is_irreducible(rates)) {
        throw Error(ErrorCode::Reducible, "generator is not irreducible");
    }
    return GeneratorMatrix(rates);
}

GeneratorMatrix GeneratorMatrix::binary(double alpha, double beta) {
    Matrix q(2, 2);
    q << -alpha, alpha, beta, -beta;
    return validate(q);
}

bool is_irreducible(const Matrix& weights) {
    const auto n = weights.rows();
    auto reaches_all = [&](bool transpose) {
        std::vector<char> seen(static_cast<std::size_t>(n), 0);
        std::vector<Eigen::Index> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const auto u = stack.back();
            stack.pop_back();
            for (Eigen::Index v = 0; v < n; ++v) {
                const double w = transpose ? weights(v, u) : weights(u, v);
                if (v != u && w > 0.0 && !seen[static_cast<std::size_t>(v)]) {
                    seen[static_cast<std::size_t>(v)] = 1;
                    stack.push_back(v);
                }
            }
        }
        for (char s : seen) {
            if (!s) return false;
        }
        return true;
    };
    return reaches_all(false) && reaches_all(true);
}

TransitionPair transition_and_integral(const GeneratorMatrix& g, double t,
                                       const CtmcOptions& opts) {
    if (!(t >= 0.0) || !std::isfinite(t)) {
        throw Error(ErrorCode::InvalidArgument, "time must be finite and non-negative");
    }
    const auto n = static_cast<Eigen::Index>(g.size());
    const double big_lambda = g.uniformization_rate();
    TransitionPair out{Matrix::Zero(n, n), Matrix::Zero(n, n)};
    if (t == 0.0) {
        out.probs.setIdentity();
        return out;
    }
    const Matrix step = Matrix::Identity(n, n) + g.rates() / big_lambda;
    const auto w = poisson_weights(big_lambda * t, opts.series_tail, opts.max_series_terms);

    // Upper tails P(N > k), summed from the top to avoid cancellation.
    std::vector<double> upper(w.size(), 0.0);
    double acc = 0.0;
    for (std::size_t k = w.size(); k-- > 0;) {
        upper[k] = acc;
        acc += w[k];
    }

    Matrix power = Matrix::Identity(n, n);
    for (std::size_t k = 0; k < w.size(); ++k) {
        if (k > 0) power = power * step;
        out.probs.noalias() += w[k] * power;
        out.integral.noalias() += (upper[k] / big_lambda) * power;
    }
    return out;
}

TransitionMatrix transition_probabilities(const GeneratorMatrix& g, double t,
                                          const CtmcOptions& opts) {
    return {t, transition_and_integral(g, t, opts).probs};
}

Matrix integrated_transition(const GeneratorMatrix& g, double t, const CtmcOptions& opts) {
    return transition_and_integral(g, t, opts).integral;
}

Matrix resolvent(const GeneratorMatrix& g, double r) {
    if (!(r > 0.0)) throw Error(ErrorCode::InvalidArgument, "resolvent needs r > 0");
    const auto n = static_cast<Eigen::Index>(g.size());
    const Matrix a = r * Matrix::Identity(n, n) - g.rates();
    return a.partialPivLu().inverse();
}

Vector stationary_vector(const Matrix& stochastic) {
    const auto n = stochastic.rows();
    Matrix a = stochastic.transpose() - Matrix::Identity(n, n);
    a.row(n - 1).setOnes();
    Vector b = Vector::Zero(n);
    b(n - 1) = 1.0;
    Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible()) {
        throw Error(ErrorCode::SingularSystem, "stationary system is singular");
    }
    Vector x = lu.solve(b);
    if ((a * x - b).cwiseAbs().maxCoeff() > 1e-9) {
        throw Error(ErrorCode::SingularSystem, "stationary system is ill-conditioned");
    }
    // Clip round-off negatives so the result is a probability vector.
    x = x.cwiseMax(0.0);
    return x / x.sum();
}

StationaryDistribution stationary_distribution(const GeneratorMatrix& g) {
    const auto n = static_cast<Eigen::Index>(g.size());
    Matrix a = g.rates().transpose();
    a.row(n - 1).setOnes();
    Vector b = Vector::Zero(n);
    b(n - 1) = 1.0;
    Eigen::FullPivLU<Matrix> lu(a);
    if (!lu.isInvertible()) {
        throw Error(ErrorCode::SingularSystem, "balance equations are singular");
    }
    Vector pi = lu.solve(b).cwiseMax(0.0);
    return {pi / pi.sum()};
}

double mixing_horizon(const GeneratorMatrix& g, const Vector& pi, double tv_tol, double t0,
                      double t_cap) {
    const auto n = static_cast<Eigen::Index>(g.size());
    double t = t0 / std::max(1.0, g.uniformization_rate());
    Matrix p = transition_probabilities(g, t).probs;
    const Matrix limit = Vector::Ones(n) * pi.transpose();
    while (true) {
        const double tv = (p - limit).cwiseAbs().rowwise().sum().maxCoeff();
        if (tv < tv_tol) return t;
        if (t > t_cap) {
            throw Error(ErrorCode::NoConvergence, "chain does not mix before t = " +
                                                      std::to_string(t_cap));
        }
        p = p * p;
        t *= 2.0;
    }
}

}  // namespace freshq
