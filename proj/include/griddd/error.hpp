#pragma once

#include <stdexcept>
#include <string>

namespace griddd {

// Error kinds map onto CLI exit codes (2 config, 3 compatibility, 4 runtime).
enum class ErrorKind { config, compatibility, runtime };

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ErrorKind kind = ErrorKind::runtime)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, std::string key = {})
      : Error(what, ErrorKind::config), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class CompatibilityError : public Error {
 public:
  explicit CompatibilityError(const std::string& what)
      : Error(what, ErrorKind::compatibility) {}
};

}  // namespace griddd
