#pragma once

#include <stdexcept>
#include <string>

namespace priorcl {

// Base of every error this library throws. Subtypes map onto the CLI exit
// codes: validation (shape/domain/parse/config), numerical, and I/O.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor or signal dimensions do not line up; message names the axis.
struct ShapeError : Error {
    using Error::Error;
};

// A parameter is outside its documented domain.
struct DomainError : Error {
    using Error::Error;
};

// Malformed input bytes or text (EDF stream, label CSV, config file).
struct ParseError : Error {
    using Error::Error;
};

// Invalid run configuration; message lists every violation found.
struct ConfigError : Error {
    using Error::Error;
};

// An internal invariant was violated (non-scalar loss, non-finite gradient,
// subject leakage across splits).
struct ContractError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

} // namespace priorcl
