#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sdu {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed configuration; carries the offending key and, when known, the line.
class ParseError : public Error {
public:
    ParseError(std::string key, int line, const std::string& what)
        : Error(what), key_(std::move(key)), line_(line) {}
    const std::string& key() const noexcept { return key_; }
    int line() const noexcept { return line_; }

private:
    std::string key_;
    int line_;
};

// Value outside its admissible domain (sigma <= 0, wealth <= 0 under power, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Non-finite value or singular denominator during path integration.
class NumericalAbort : public Error {
public:
    NumericalAbort(std::size_t path, std::size_t step, const std::string& what)
        : Error(what + " (path " + std::to_string(path) + ", step " + std::to_string(step) + ")"),
          path_(path), step_(step) {}
    std::size_t path() const noexcept { return path_; }
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t path_;
    std::size_t step_;
};

// A closed form was requested outside the regime it was derived for.
class RegimeError : public Error {
public:
    using Error::Error;
};

class EstimatorError : public Error {
public:
    using Error::Error;
};

} // namespace sdu
