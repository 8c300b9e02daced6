#pragma once

#include <stdexcept>
#include <string>

namespace seal {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unreadable input file. Messages name the file, row and column where known.
class LoadError : public Error {
public:
    using Error::Error;
};

/// Schema or configuration content that violates a documented constraint.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Shape mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Non-finite values or a numerically singular system.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure: an input that cannot be opened or an output that cannot be written.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace seal
