#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace freshq {

enum class ErrorCode {
    NonSquare,
    NegativeOffDiagonal,
    RowSumNonzero,
    Reducible,
    NumericalOverflow,
    SingularSystem,
    InvalidDistribution,
    UnsupportedPair,
    QuadratureNonConvergence,
    DegenerateCycle,
    DensityUnavailable,
    NonStochasticRow,
    NonPositiveSojourn,
    NoConvergence,
    InvalidArgument,
    UnsupportedConfiguration,
    ConfigParse,
    MissingColumn,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace freshq
