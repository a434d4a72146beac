#pragma once

#include <stdexcept>
#include <string>

namespace mhyper {

// Usage / configuration problems (missing files, bad config keys, bad flag
// combinations). The CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed data encountered at runtime (parse errors, format errors,
// shape mismatches). The CLI maps these to exit code 1.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace mhyper
