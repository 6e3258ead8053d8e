#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace iontrap {

// Config parse/validation failure. Carries the per-field issue list.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
  explicit ConfigError(const std::string& issue)
      : ConfigError(std::vector<std::string>{issue}) {}
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& e : v) {
      if (!s.empty()) s += "; ";
      s += e;
    }
    return s;
  }
  std::vector<std::string> issues_;
};

// Physical/numerical failure in a model evaluation (singular steady state,
// coincident ions, bracketing failure, non-convergence, ...).
class PhysicsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Integration blow-up; carries a diagnostic of where it happened.
class InstabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Requested value outside a tabulated/simulated calibration range.
class CalibrationRangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace iontrap
