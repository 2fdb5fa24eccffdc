#pragma once

#include <stdexcept>
#include <string>

namespace gsmae {

// Error taxonomy shared by all modules. Every category maps to a distinct
// CLI exit code (see tools/).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller passed values that violate an operation's preconditions.
struct InvalidInputError : Error {
    using Error::Error;
};

// Tensor operands with incompatible shapes.
struct ShapeError : Error {
    using Error::Error;
};

// A run configuration field is out of range or inconsistent.
struct ConfigError : Error {
    using Error::Error;
};

// A file does not match its expected on-disk layout.
struct FormatError : Error {
    using Error::Error;
};

// Data content is structurally valid but semantically broken (NaN splat,
// label out of range, ...).
struct DataError : Error {
    using Error::Error;
};

// Numerical failure at runtime (singular matrix, NaN loss, ...).
struct NumericError : Error {
    using Error::Error;
};

// Filesystem-level failure.
struct IoError : Error {
    using Error::Error;
};

} // namespace gsmae
