#pragma once

#include <stdexcept>
#include <string>

namespace fedlex {

// Base of every error the library raises. Callers that only care about
// "something in the simulator failed" can catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Layout or dimension mismatch between operands.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A precondition on the caller side was broken (stale cache, wrong kind,
// unnormalized guidance, ...).
class ContractViolation : public Error {
public:
    using Error::Error;
};

// Invalid architecture / dataset / partition / run configuration.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& message)
        : Error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}
    explicit ConfigError(const std::string& message) : Error(message) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

// Malformed or inconsistent input file.
class FormatError : public Error {
public:
    using Error::Error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

// Local training produced a non-finite loss.
class DivergenceError : public Error {
public:
    DivergenceError(int epoch, const std::string& what)
        : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

}  // namespace fedlex
