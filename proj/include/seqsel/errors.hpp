#pragma once
#include <cstddef>
#include <stdexcept>
#include <string>

namespace seqsel {

/// Broad failure category; the CLI maps it onto an exit code.
enum class ErrorKind {
  kInput,      // malformed or inconsistent user input
  kNumerical,  // numerical failure of an otherwise valid request
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& what)
      : std::runtime_error(what), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Short machine-readable tag, e.g. "singular-design".
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

class SingularDesignError : public Error {
 public:
  explicit SingularDesignError(const std::string& what)
      : Error(ErrorKind::kNumerical, "singular-design", what) {}
};

class DegenerateVariableError : public Error {
 public:
  explicit DegenerateVariableError(const std::string& what)
      : Error(ErrorKind::kNumerical, "degenerate-variable", what) {}
};

class RangeError : public Error {
 public:
  explicit RangeError(const std::string& what) : Error(ErrorKind::kInput, "range", what) {}
};

class ConfigurationError : public Error {
 public:
  explicit ConfigurationError(const std::string& what)
      : Error(ErrorKind::kInput, "configuration", what) {}
};

/// Two candidates attain the selection criterion simultaneously.
class TieError : public Error {
 public:
  explicit TieError(const std::string& what) : Error(ErrorKind::kNumerical, "tie", what) {}
};

/// The penalized problem has no unique solution along the requested path.
class NonUniqueSolutionError : public Error {
 public:
  explicit NonUniqueSolutionError(const std::string& what)
      : Error(ErrorKind::kNumerical, "non-unique-solution", what) {}
};

class ReconstructionError : public Error {
 public:
  explicit ReconstructionError(const std::string& what)
      : Error(ErrorKind::kInput, "reconstruction-failure", what) {}
};

/// Accept/reject produced fewer acceptances than required within its budget.
class LowAcceptanceError : public Error {
 public:
  LowAcceptanceError(const std::string& what, std::size_t accepted, std::size_t proposed)
      : Error(ErrorKind::kNumerical, "low-acceptance", what),
        accepted_(accepted),
        proposed_(proposed) {}
  std::size_t accepted() const noexcept { return accepted_; }
  std::size_t proposed() const noexcept { return proposed_; }

 private:
  std::size_t accepted_;
  std::size_t proposed_;
};

class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& what)
      : Error(ErrorKind::kNumerical, "infeasible", what) {}
};

class InsufficientSamplesError : public Error {
 public:
  explicit InsufficientSamplesError(const std::string& what)
      : Error(ErrorKind::kNumerical, "insufficient-conditioning-samples", what) {}
};

class UnsupportedError : public Error {
 public:
  explicit UnsupportedError(const std::string& what)
      : Error(ErrorKind::kInput, "unsupported-configuration", what) {}
};

/// Malformed input file.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(ErrorKind::kInput, "parse", what) {}
};

}  // namespace seqsel
