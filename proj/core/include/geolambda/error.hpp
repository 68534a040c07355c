#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geolambda {

enum class ErrorCode {
    InvalidArgument,
    ValidationError,
    DuplicateEvent,
    StorageFailure,
    IngestFailed,
    ReplayFailed,
    NameTaken,
    NotFound,
    UnknownView,
    BinMismatch,
    OutOfOrderSeq,
    FloorRegression,
    WatermarkMismatch,
    OutOfBounds,
    DegenerateDensity,
    SpecMismatch,
    OverlappingScenarios,
    NoObservations,
    ParseError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the engine carries a machine-readable code and,
/// where one applies, the name of the offending input field.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message, std::string field = {})
        : std::runtime_error(std::move(message)), code_(code), field_(std::move(field)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& field() const noexcept { return field_; }

private:
    ErrorCode code_;
    std::string field_;
};

}  // namespace geolambda
