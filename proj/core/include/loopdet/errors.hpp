#pragma once

#include <stdexcept>
#include <string>

namespace loopdet {

/// Base class for all loopdet errors. The concrete subclass determines the
/// process exit code when an error escapes the CLI (see tools/).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file: bad magic, wrong version, truncated payload, ragged CSV.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Well-formed input whose content violates a contract (NaN values,
/// out-of-range labels, too few samples, values outside {0,1}).
class DataError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure: unreadable or unwritable path.
class IoError : public Error {
public:
    using Error::Error;
};

/// Shape mismatch between operands (descriptor dim vs codebook dim, etc).
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value or inconsistent artifact combination.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Arithmetic left the valid domain (log of a non-positive value,
/// probability outside (0,1), non-finite intermediate).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Invalid argument combination (e.g. mutual information of a word with itself).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// A metric whose denominator is empty (no ground-truth positives, no
/// predictions above threshold).
class UndefinedMetric : public Error {
public:
    using Error::Error;
};

}  // namespace loopdet
