#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace astral {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor shapes do not agree for the requested operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A layer was driven out of order (e.g. backward before forward).
class StateError : public Error {
public:
    using Error::Error;
};

/// A NaN/Inf surfaced where a finite value is required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// An argument is outside the accepted domain.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration (unknown keys, bad hyperparameters, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Problem with input data: unreadable file, tagset mismatch, empty corpus.
class DataError : public Error {
public:
    using Error::Error;
};

/// Malformed line in a text input. Carries the 1-based line number.
class ParseError : public DataError {
public:
    ParseError(std::size_t line, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Malformed embedding / binary file content.
class FormatError : public DataError {
public:
    using DataError::DataError;
    FormatError(std::size_t line, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_ = 0;
};

class VersionError : public DataError {
public:
    using DataError::DataError;
};

class ChecksumError : public DataError {
public:
    using DataError::DataError;
};

class TruncatedError : public DataError {
public:
    using DataError::DataError;
};

}  // namespace astral
