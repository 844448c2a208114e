#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gcnc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on the inputs of an operation was violated (shapes, ranges, balance).
class ContractError : public Error {
public:
    using Error::Error;
};

/// Malformed input file.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A quantity is undefined because class means coincide or a denominator vanishes.
class DegenerateError : public Error {
public:
    using Error::Error;
};

class SingularSystemError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite value or an exploding loss.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t step, const std::string& what)
        : Error("diverged at step " + std::to_string(step) + ": " + what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Invalid experiment configuration; carries the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error("config error [" + key + "]: " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

}  // namespace gcnc
