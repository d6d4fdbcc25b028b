#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace amod {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent dataset content.
class DatasetError : public Error {
public:
    using Error::Error;
};

/// Invalid run configuration, missing credentials, bad arguments.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Model endpoint failure (after retries, or non-retryable).
class GatewayError : public Error {
public:
    using Error::Error;
};

/// Malformed model output that cannot be turned into the expected structure.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Hierarchical chain grammar violation, carrying the first offending byte offset.
class ChainParseError : public ParseError {
public:
    ChainParseError(std::size_t offset, std::string expected, const std::string& message)
        : ParseError(message + " at offset " + std::to_string(offset)),
          offset_(offset), expected_(std::move(expected)) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& expected() const noexcept { return expected_; }

private:
    std::size_t offset_;
    std::string expected_;
};

}  // namespace amod
