#pragma once

#include <stdexcept>
#include <string>

namespace dtpa {

// Invalid argument values for a mathematical operation (empty input, region
// out of bounds, k = 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Every w_i = 0 wherever raw_i > 0: nothing left to normalize.
class DegenerateDistributionError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Malformed weight, prefix, vocabulary or trace file. The message names the
// offending tensor or field.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible components (prefix shape vs model, class count, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A session would grow beyond max_positions.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dtpa
