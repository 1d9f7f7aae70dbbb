#pragma once

#include <stdexcept>
#include <string>

namespace dexreg {

// Argument outside a family's mean domain or response support.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Query that escaped the tabulated normalizing-constant grid. `coordinate`
// names the axis ("link_mu", "link_theta" or "weight").
class GridBoundsError : public std::out_of_range {
 public:
  GridBoundsError(std::string coordinate, double value, const std::string& what)
      : std::out_of_range(what), coordinate_(std::move(coordinate)), value_(value) {}

  const std::string& coordinate() const noexcept { return coordinate_; }
  double value() const noexcept { return value_; }

 private:
  std::string coordinate_;
  double value_;
};

// A model state that breaks the indicator / zero-storage constraints.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unrecoverable failure inside a numerical routine (non-finite objective,
// indefinite Hessian after regularization, sampler abort).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dexreg
