#pragma once

#include <stdexcept>
#include <string>

namespace cimtherm {

/// Malformed configuration text or a program/instruction file that does not parse.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A value is well-formed but violates a documented invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The electrical threshold decision disagrees with the Boolean truth table.
/// Only corrupted device parameters can trigger this.
class ModelInconsistency : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the iterative thermal solver when the iteration cap is hit.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Instruction-level execution fault (bad operand, lane out of range, ...).
class ExecutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cimtherm
