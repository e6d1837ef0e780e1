#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oodkit {

// Every failure surfaced by the library carries one of these codes so callers
// (and the CLI's machine-readable error listing) can branch on the kind.
enum class ErrorCode {
    Io,
    BadMagic,
    UnsupportedDtype,
    FortranOrderUnsupported,
    TruncatedPayload,
    NonFiniteValue,
    BadHeader,
    DuplicateId,
    MissingColumn,
    BadValue,
    WindowTooLarge,
    RankTooLow,
    ShapeMismatch,
    TooFewSamples,
    NTooLarge,
    SingularEvenWithJitter,
    NonFiniteInput,
    DimensionMismatch,
    KTooLarge,
    InvalidArgument,
    EmptyMask,
    SpacingMismatch,
    NoImages,
    DegenerateLabels,
    NoPositives,
    ZeroVariance,
    TooFewPoints,
    LengthMismatch,
    EverythingRejected,
    MissingPair,
    MissingFiles,
    BadConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace oodkit
