#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace etobs {

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    NonPositiveArgument,
    NotHurwitz,
    Singular,
    Item1Violated,
    Item2Violated,
    Item3Violated,
    Item4Violated,
    MaxJumpsExceeded,
    NonFiniteState,
    NegativeAuxiliaryState,
    ConfigError,
};

[[nodiscard]] std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace etobs
