#pragma once

#include <stdexcept>
#include <string>

namespace kgrl {

// Bad or out-of-range configuration values. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or unusable input data. The CLI maps this to exit code 3.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace kgrl
