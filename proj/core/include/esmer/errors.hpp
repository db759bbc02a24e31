#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace esmer {

// An argument violated a documented precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// External data (IDX file, JSON document) is malformed.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A non-finite value showed up where finite math was required.
class NumericFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Experiment configuration rejected; carries every issue found, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}

  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& issues) {
    std::string out = "invalid configuration:";
    for (const auto& s : issues) {
      out += "\n  - " + s;
    }
    return out;
  }

  std::vector<std::string> issues_;
};

}  // namespace esmer
