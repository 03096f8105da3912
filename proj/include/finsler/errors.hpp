#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace finsler {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Evaluation left the smoothness domain (slit bundle, sqrt of a negative,
/// abs differentiated at 0, non-finite intermediate, ...).
class DomainError : public Error {
public:
  using Error::Error;
};

/// |det g| fell below the degeneracy threshold.
class DegeneracyError : public Error {
public:
  using Error::Error;
};

/// Metric inverse requested on a matrix with condition estimate above limit.
class ConditioningError : public Error {
public:
  using Error::Error;
};

/// Operation requires a positive-definite structure (e.g. indicatrix,
/// arc length) but an alternating one was supplied, or vice versa.
class UnsupportedKindError : public Error {
public:
  using Error::Error;
};

/// Wrong pipeline for the given input (e.g. y-dependent potential passed
/// to the Riemannian field-strength routine).
class WrongOperationError : public Error {
public:
  using Error::Error;
};

/// Where and why parsing stopped.
struct ParseDiagnostic {
  std::size_t offset = 0;                // byte offset into the input
  std::vector<std::string> expected;     // tokens that would have been accepted
  std::string message;
};

class ParseError : public Error {
public:
  ParseError(ParseDiagnostic d, const std::string& what_arg)
      : Error(what_arg), diagnostic(std::move(d)) {}
  ParseDiagnostic diagnostic;
};

/// Runtime expression-evaluation failure, annotated with the byte offset of
/// the offending AST node.
class EvalError : public Error {
public:
  EvalError(std::size_t node_offset, const std::string& what_arg)
      : Error(what_arg), offset(node_offset) {}
  std::size_t offset = 0;
};

/// Bad run configuration (CLI surface); maps to exit code 2.
class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace finsler
