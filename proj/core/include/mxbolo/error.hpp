#pragma once

#include <stdexcept>
#include <string>

namespace mxbolo {

/// Base of every error thrown by the library. The CLI maps UserError
/// subclasses to exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Errors caused by the caller's input (bad arguments, configs, files).
class UserError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public UserError {
public:
    using UserError::UserError;
};

class DomainError : public UserError {
public:
    using UserError::UserError;
};

/// Nyquist, timing and band-placement violations.
class ConfigurationError : public UserError {
public:
    using UserError::UserError;
};

/// Config schema violation; carries the JSON pointer of the offending field.
class SchemaError : public UserError {
public:
    SchemaError(std::string pointer, const std::string& message)
        : UserError(pointer + ": " + message), pointer_(std::move(pointer)) {}

    const std::string& pointer() const noexcept { return pointer_; }

private:
    std::string pointer_;
};

/// Malformed file; line is 1-based, 0 when not applicable.
class ParseError : public UserError {
public:
    ParseError(std::size_t line, const std::string& message)
        : UserError(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class SolverError : public Error {
public:
    SolverError(const std::string& message, double last_residual)
        : Error(message), last_residual_(last_residual) {}

    double last_residual() const noexcept { return last_residual_; }

private:
    double last_residual_;
};

class FitError : public Error {
public:
    using Error::Error;
};

class CalibrationError : public Error {
public:
    using Error::Error;
};

}  // namespace mxbolo
