#pragma once

#include <stdexcept>
#include <string>

namespace pipect {

/// Invalid or inconsistent configuration, argument, or file content.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes or geometries do not match.
class DimensionError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine failed to produce a usable result.
class NumericalError : public std::runtime_error {
  public:
    explicit NumericalError(const std::string& what, double residual = 0.0)
        : std::runtime_error(what), residual_(residual) {}

    /// Residual (or other figure of merit) at the point of failure.
    double residual() const { return residual_; }

  private:
    double residual_;
};

}  // namespace pipect
