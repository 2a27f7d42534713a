#pragma once

#include <stdexcept>
#include <string>

namespace dart {

/// Raised for invalid arguments, malformed inputs and violated invariants.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a file or stream cannot be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace dart
