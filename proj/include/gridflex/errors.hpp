#pragma once

#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridflex {

// Malformed input text (JSON, CSV or MATPOWER case). Message carries a
// line/field location when one is known.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One or more Grid invariants violated. Every violation is listed, not just
// the first one found.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> violations)
      : std::runtime_error(join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "grid validation failed:";
    for (const auto& s : v) out += "\n  - " + s;
    return out;
  }
  std::vector<std::string> violations_;
};

// Linear system singular or too ill-conditioned to trust.
class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operating point outside the valid range of the power-flow linearization.
class LinearizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gridflex
