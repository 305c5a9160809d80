#pragma once

#include <stdexcept>
#include <string>

namespace firecast {

// Exit-code families used by the CLI: config 2, data 3, numeric 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ChecksumError : DataError {
    explicit ChecksumError(const std::string& msg) : DataError(msg) {}
};

struct VersionError : DataError {
    explicit VersionError(const std::string& msg) : DataError(msg) {}
};

struct TruncatedError : DataError {
    explicit TruncatedError(const std::string& msg) : DataError(msg) {}
};

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace firecast
