#pragma once

#include <stdexcept>
#include <string>

namespace ssdda {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Shape mismatches, out-of-range labels, empty inputs.
struct InvalidInput : Error {
    using Error::Error;
};

/// Structurally invalid configuration values.
struct InvalidConfig : Error {
    using Error::Error;
};

/// Split requests that cannot be satisfied by the dataset.
struct InvalidSplit : Error {
    using Error::Error;
};

/// A loss target with zero valid (non-ignore) pixels.
struct DegenerateTarget : Error {
    using Error::Error;
};

/// An evaluation over a class subset where no IoU is defined.
struct DegenerateEval : Error {
    using Error::Error;
};

/// Malformed files: bad magic, truncated payload, unparsable text.
struct FormatError : Error {
    using Error::Error;
};

/// Filesystem failures, reported with path context.
struct IoError : Error {
    using Error::Error;
};

/// Non-finite values where finite arithmetic is required.
struct NumericError : Error {
    using Error::Error;
};

} // namespace ssdda
