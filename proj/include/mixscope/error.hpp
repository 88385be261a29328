#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mixscope {

/// Base for every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input data or arguments (exit code 1 in the CLI).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A malformed line in a CSV input.
class ParseError : public ValidationError {
public:
    ParseError(std::size_t line, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class EmptyTraceError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class EmptyObservationError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class UndefinedProfileError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ShapeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// File could not be opened, read, or written (exit code 2 in the CLI).
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace mixscope
