#pragma once

#include <stdexcept>
#include <string>

namespace vqad {

/// Base error carrying a machine-parsable category used by the CLI
/// ("error[<category>]: <message>" on stderr, exit code 1).
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(message), category_(std::move(category)) {}
    const std::string& category() const { return category_; }

private:
    std::string category_;
};

/// Bad configuration values or malformed config files.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("config", message) {}
};

/// Dataset, detection or checkpoint content that fails validation on load.
class LoadError : public Error {
public:
    explicit LoadError(const std::string& message) : Error("load", message) {}
};

/// Filesystem-level failures (missing paths, unwritable output).
class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error("io", message) {}
};

/// Non-finite values or degenerate numerical situations.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& message) : Error("numeric", message) {}
};

}  // namespace vqad
