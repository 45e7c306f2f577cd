#pragma once

#include <stdexcept>
#include <string>

namespace factorlab {

enum class ErrorKind {
  InvalidInput,
  NumericalFailure,
  SingularMatrix,
  DegenerateSpectrum,
  BlockingInfeasible,
  DegenerateOracle,
  StudyFailed,
  PoetInfeasible,
  Io,
};

const char* to_string(ErrorKind kind);

/// Base of every exception thrown by the library. The kind lets callers
/// (notably the CLI) map failures to exit codes without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define FACTORLAB_DEFINE_ERROR(Name)                                      \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(ErrorKind::Name, what) {} \
  };

FACTORLAB_DEFINE_ERROR(InvalidInput)
FACTORLAB_DEFINE_ERROR(NumericalFailure)
FACTORLAB_DEFINE_ERROR(SingularMatrix)
FACTORLAB_DEFINE_ERROR(BlockingInfeasible)
FACTORLAB_DEFINE_ERROR(DegenerateOracle)
FACTORLAB_DEFINE_ERROR(StudyFailed)
FACTORLAB_DEFINE_ERROR(PoetInfeasible)

#undef FACTORLAB_DEFINE_ERROR

/// Thrown when a criterion tail sum vanishes; carries the offending q.
class DegenerateSpectrum : public Error {
 public:
  DegenerateSpectrum(const std::string& what, int q)
      : Error(ErrorKind::DegenerateSpectrum, what), q_(q) {}

  int q() const noexcept { return q_; }

 private:
  int q_;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace factorlab
