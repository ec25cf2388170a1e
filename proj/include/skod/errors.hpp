#ifndef SKOD_ERRORS_HPP
#define SKOD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace skod {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad argument value, shape mismatch, invalid configuration.
class ValueError : public Error {
public:
    using Error::Error;
};

// Malformed or truncated input files.
class ParseError : public Error {
public:
    using Error::Error;
};

// Operation invoked on an object in the wrong state
// (e.g. detection before threshold calibration).
class StateError : public Error {
public:
    using Error::Error;
};

// Internal contract violation (non-scalar backward root, protocol breach).
class ContractError : public Error {
public:
    using Error::Error;
};

} // namespace skod

#endif
