#pragma once

#include <stdexcept>
#include <string>

namespace ebgraph {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent caller input (length mismatch, bad range, ...).
class InputError : public Error {
public:
    using Error::Error;
};

/// A partition with an empty cluster, or one that cannot support the request.
class DegeneratePartitionError : public InputError {
public:
    using InputError::InputError;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Text input that failed to parse; carries the 1-based line number.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Non-finite objective or other numerical breakdown.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace ebgraph
