#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hlsalign {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments. The CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what), problems_{what} {}
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& item : items) {
      if (!out.empty()) out += "; ";
      out += item;
    }
    return out;
  }

  std::vector<std::string> problems_;
};

/// Input data that violates an operation's preconditions (shape mismatch,
/// unsupported sample type, empty input). Exit code 3.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Arithmetic outside the valid domain of a formula (sun below horizon,
/// zero transmittance, degenerate range).
class DomainError : public DataError {
 public:
  using DataError::DataError;
};

/// File could not be opened, parsed, or written.
class IoError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace hlsalign
