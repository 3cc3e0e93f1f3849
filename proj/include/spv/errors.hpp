#pragma once

#include <stdexcept>
#include <string>

namespace spv {

/// Raised when an input violates a documented invariant. `stage()` names the
/// component that rejected it ("array", "bundle", "model", ...).
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(std::string stage, const std::string& detail)
      : std::invalid_argument(stage + ": " + detail),
        stage_(std::move(stage)),
        detail_(detail) {}

  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string stage_;
  std::string detail_;
};

/// File or stream failure (unreadable input, unwritable output, truncated data).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spv
