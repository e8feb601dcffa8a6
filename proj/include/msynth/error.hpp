#pragma once

#include <stdexcept>
#include <string>

namespace msynth {

/// Precondition violated by a caller-supplied value (empty sets, NaN, bad sizes).
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Point set too degenerate to register (fewer than three distinct points).
class DegenerateGeometry : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration file or flag combination.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Transport or protocol failure talking to a text-generation backend.
class BackendError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace msynth
