#pragma once

#include <stdexcept>
#include <string>

namespace nom {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite value (NaN or infinity).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Malformed, truncated or version-mismatched serialized payload.
class FormatError : public Error {
public:
    using Error::Error;
};

} // namespace nom
