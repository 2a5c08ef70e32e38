#pragma once

#include <stdexcept>
#include <string>

namespace stcausal {

// Configuration / schema problems. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The observed treatment pattern has zero density under the propensity model
// (bounded-overlap assumption breached). The CLI maps this to exit code 3.
class PositivityViolation : public std::runtime_error {
 public:
  PositivityViolation(const std::string& msg, int period)
      : std::runtime_error(msg), period_(period) {}
  int period() const { return period_; }

 private:
  int period_;
};

// Likelihood maximization diverged (separation / runaway coefficient).
// The CLI maps this to exit code 4.
class FitError : public std::runtime_error {
 public:
  explicit FitError(const std::string& msg, std::string feature = "")
      : std::runtime_error(msg), feature_(std::move(feature)) {}
  const std::string& feature() const { return feature_; }

 private:
  std::string feature_;
};

// A thinning proposal drew an intensity above the declared upper bound.
// Internal: simulation drivers catch this, enlarge the bound, and resample;
// it must never be silently clamped.
class BoundBreach : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stcausal
