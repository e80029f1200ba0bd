#pragma once

#include <Eigen/Dense>

#include <cstddef>

namespace freshq {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Numerical knobs for the CTMC kernels. Defaults are the library-wide tolerances.
struct CtmcOptions {
    double row_sum_tolerance = 1e-12;
    /// Poisson tail mass dropped by the uniformization series.
    double series_tail = 1e-12;
    /// Upper bound on the number of uniformization terms (NumericalOverflow beyond).
    std::size_t max_series_terms = 200000;
};

/// A validated, irreducible generator matrix Q of a finite-state CTMC.
class GeneratorMatrix {
public:
    /// Validates `rates` and throws freshq::Error on failure
    /// (NonSquare, NegativeOffDiagonal, RowSumNonzero, Reducible).
    static GeneratorMatrix validate(const Matrix& rates, const CtmcOptions& opts = {});

    /// Two-state chain with rate `alpha` from state 1 to 2 and `beta` back.
    static GeneratorMatrix binary(double alpha, double beta);

    std::size_t size() const noexcept { return static_cast<std::size_t>(rates_.rows()); }
    const Matrix& rates() const noexcept { return rates_; }
    /// max_i |Q_ii|
    double uniformization_rate() const noexcept { return lambda_; }

private:
    explicit GeneratorMatrix(Matrix rates);

    Matrix rates_;
    double lambda_ = 0.0;
};

struct TransitionMatrix {
    double t = 0.0;
    Matrix probs;
};

struct StationaryDistribution {
    Vector pi;
};

/// P(t) = exp(Qt) by uniformization.
TransitionMatrix transition_probabilities(const GeneratorMatrix& g, double t,
                                          const CtmcOptions& opts = {});

/// Integral of P(s) over s in [0, t], by the integrated uniformization series.
Matrix integrated_transition(const GeneratorMatrix& g, double t, const CtmcOptions& opts = {});

/// Both P(t) and its integral from one pass over the series.
struct TransitionPair {
    Matrix probs;
    Matrix integral;
};
TransitionPair transition_and_integral(const GeneratorMatrix& g, double t,
                                       const CtmcOptions& opts = {});

/// (rI - Q)^{-1}; for r > 0 this is the Laplace transform of P at r.
Matrix resolvent(const GeneratorMatrix& g, double r);

StationaryDistribution stationary_distribution(const GeneratorMatrix& g);

/// Unique stationary vector of a row-stochastic matrix (last balance equation
/// replaced by normalization). Throws SingularSystem when the system is singular.
Vector stationary_vector(const Matrix& stochastic);

/// True when the directed graph of positive off-diagonal entries is strongly connected.
bool is_irreducible(const Matrix& weights);

/// Smallest t (found by doubling from t0) with max_i sum_j |P_ij(t) - pi_j| < tv_tol.
double mixing_horizon(const GeneratorMatrix& g, const Vector& pi, double tv_tol,
                      double t0 = 1.0, double t_cap = 1e6);

}  // namespace freshq
