#pragma once

#include <stdexcept>
#include <string>

namespace semu {

// Base for all library errors so the CLI can catch one type at its boundary.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape disagreement between operands.
struct DimensionError : Error {
    using Error::Error;
};

// NaN/Inf escaped a numeric routine, or a computation diverged.
struct NumericError : Error {
    using Error::Error;
};

// Caller violated a documented precondition.
struct ContractError : Error {
    using Error::Error;
};

// Malformed input file.
struct FormatError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

}  // namespace semu
