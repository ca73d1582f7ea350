#pragma once

#include <stdexcept>
#include <string>

namespace dashsim {

// Configuration problems: bad or missing fields, inconsistent values.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem and file-content problems.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dashsim
