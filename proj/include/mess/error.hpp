#pragma once

#include <stdexcept>
#include <string>

namespace mess {

/// Bad user-supplied parameters (speeds, tolerances, counts).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Case data that parses but violates a cross-reference or bound.
/// `where()` carries "file:line" when known.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what, std::string where = {})
      : std::runtime_error(where.empty() ? what : where + ": " + what), where_(std::move(where)) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

/// Internal invariant broken (e.g. an arc that does not match the vehicle's location).
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A time-space layer has an interval with no feasible arc.
class InfeasibleLayer : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file that cannot be read or written, or a malformed output artifact.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mess
