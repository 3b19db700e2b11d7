#pragma once

#include <stdexcept>
#include <string>

namespace rlinrl {

// Exit-code mapping lives in the CLI: config=2, io=3, integrity=4, training=5.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& m) : std::runtime_error(m) {}
};
struct IoError : std::runtime_error {
  explicit IoError(const std::string& m) : std::runtime_error(m) {}
};
struct IntegrityError : std::runtime_error {
  explicit IntegrityError(const std::string& m) : std::runtime_error(m) {}
};
struct TrainingError : std::runtime_error {
  explicit TrainingError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace rlinrl
