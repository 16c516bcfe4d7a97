#include "hierfc/error.hpp"

namespace hierfc {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::DuplicateSeries: return "DuplicateSeries";
        case ErrorCode::EmptySupport: return "EmptySupport";
        case ErrorCode::TopRowNotTotal: return "TopRowNotTotal";
        case ErrorCode::InvalidStructure: return "InvalidStructure";
        case ErrorCode::UnknownSeries: return "UnknownSeries";
        case ErrorCode::UnknownLevel: return "UnknownLevel";
        case ErrorCode::UnknownTag: return "UnknownTag";
        case ErrorCode::InvalidSplit: return "InvalidSplit";
        case ErrorCode::GroupedStructure: return "GroupedStructure";
        case ErrorCode::RaggedPanel: return "RaggedPanel";
        case ErrorCode::HorizonTooLarge: return "HorizonTooLarge";
        case ErrorCode::TooShort: return "TooShort";
        case ErrorCode::BadAlpha: return "BadAlpha";
        case ErrorCode::BadLambda: return "BadLambda";
        case ErrorCode::BadLevel: return "BadLevel";
        case ErrorCode::EmptyLevels: return "EmptyLevels";
        case ErrorCode::BadCorrelation: return "BadCorrelation";
        case ErrorCode::BadSpec: return "BadSpec";
        case ErrorCode::InsufficientResiduals: return "InsufficientResiduals";
        case ErrorCode::InsufficientHistory: return "InsufficientHistory";
        case ErrorCode::NoResiduals: return "NoResiduals";
        case ErrorCode::NoExplicitP: return "NoExplicitP";
        case ErrorCode::NoDistribution: return "NoDistribution";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::NonFiniteResiduals: return "NonFiniteResiduals";
        case ErrorCode::ZeroDenominator: return "ZeroDenominator";
        case ErrorCode::ZeroScale: return "ZeroScale";
        case ErrorCode::SingularW: return "SingularW";
    }
    return "Unknown";
}

bool is_numerical(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NonFiniteResiduals:
        case ErrorCode::ZeroDenominator:
        case ErrorCode::ZeroScale:
        case ErrorCode::SingularW:
            return true;
        default:
            return false;
    }
}

}  // namespace hierfc
