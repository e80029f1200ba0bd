#include "freshquery/errors.hpp"

namespace freshq {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NonSquare: return "NonSquare";
        case ErrorCode::NegativeOffDiagonal: return "NegativeOffDiagonal";
        case ErrorCode::RowSumNonzero: return "RowSumNonzero";
        case ErrorCode::Reducible: return "Reducible";
        case ErrorCode::NumericalOverflow: return "NumericalOverflow";
        case ErrorCode::SingularSystem: return "SingularSystem";
        case ErrorCode::InvalidDistribution: return "InvalidDistribution";
        case ErrorCode::UnsupportedPair: return "UnsupportedPair";
        case ErrorCode::QuadratureNonConvergence: return "QuadratureNonConvergence";
        case ErrorCode::DegenerateCycle: return "DegenerateCycle";
        case ErrorCode::DensityUnavailable: return "DensityUnavailable";
        case ErrorCode::NonStochasticRow: return "NonStochasticRow";
        case ErrorCode::NonPositiveSojourn: return "NonPositiveSojourn";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::UnsupportedConfiguration: return "UnsupportedConfiguration";
        case ErrorCode::ConfigParse: return "ConfigParse";
        case ErrorCode::MissingColumn: return "MissingColumn";
    }
    return "Unknown";
}

}  // namespace freshq
