#pragma once

#include <stdexcept>
#include <string>

namespace mpvaa {

// Violated precondition of an operation (bad argument, wrong call order).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Operand dimensions do not conform.
class ShapeError : public ContractError {
 public:
  using ContractError::ContractError;
};

// NaN/Inf produced or consumed; the computation cannot continue.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. The message names the line and the field.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A concept index has no row in an embedding table.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Metric is undefined for the given input (single class, empty truth set).
class UndefinedMetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A pipeline artifact expected on disk is missing.
class MissingArtifactError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mpvaa
