#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rca {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad or inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input data that violates a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Malformed input text; carries the 1-based line number.
class ParseError : public ValidationError {
public:
    ParseError(std::size_t line, const std::string& what)
        : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A statistical stage could not produce a result from valid inputs.
class AnalysisError : public Error {
public:
    using Error::Error;
};

}  // namespace rca
