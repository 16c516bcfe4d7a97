#pragma once

#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hierfc {

enum class ErrorCode {
    // input / validation
    ParseError,
    ShapeMismatch,
    DuplicateSeries,
    EmptySupport,
    TopRowNotTotal,
    InvalidStructure,
    UnknownSeries,
    UnknownLevel,
    UnknownTag,
    InvalidSplit,
    GroupedStructure,
    RaggedPanel,
    HorizonTooLarge,
    TooShort,
    BadAlpha,
    BadLambda,
    BadLevel,
    EmptyLevels,
    BadCorrelation,
    BadSpec,
    InsufficientResiduals,
    InsufficientHistory,
    NoResiduals,
    NoExplicitP,
    NoDistribution,
    TooFewSamples,
    // numerical
    NonFiniteResiduals,
    ZeroDenominator,
    ZeroScale,
    SingularW,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for failures caused by the numbers rather than by malformed input.
bool is_numerical(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

struct Warning {
    std::string source;
    std::string message;
};

/// Collects non-fatal conditions (ill-conditioning, fallback shares, lasso
/// sweep cap). Safe to share between threads.
class Diagnostics {
public:
    void warn(std::string source, std::string message) {
        std::lock_guard lock(mutex_);
        items_.push_back({std::move(source), std::move(message)});
    }

    std::vector<Warning> items() const {
        std::lock_guard lock(mutex_);
        return items_;
    }

    bool empty() const {
        std::lock_guard lock(mutex_);
        return items_.empty();
    }

private:
    mutable std::mutex mutex_;
    std::vector<Warning> items_;
};

inline void warn(Diagnostics* diag, std::string source, std::string message) {
    if (diag != nullptr) {
        diag->warn(std::move(source), std::move(message));
    }
}

}  // namespace hierfc
