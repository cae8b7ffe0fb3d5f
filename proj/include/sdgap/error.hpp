#pragma once

#include <stdexcept>
#include <string>

namespace sdgap {

/// Malformed or inconsistent input data (bad file contents, range violations,
/// mismatched dimensions). Maps to exit code 2 in the CLI.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration or parameter values. Maps to exit code 1 in the CLI.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace sdgap
