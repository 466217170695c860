#pragma once

#include <stdexcept>
#include <string>

namespace freeharm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range input (bad characters, invalid parameters, bad files).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A word or radius that falls outside the domain an operation is defined on.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Raised by matrix square roots when an eigenvalue is below the positivity tolerance.
class SingularityError : public Error {
 public:
  SingularityError(const std::string& what, double eigenvalue)
      : Error(what), eigenvalue_(eigenvalue) {}
  double eigenvalue() const noexcept { return eigenvalue_; }

 private:
  double eigenvalue_;
};

/// A Gram matrix that is indefinite (or singular where strictness is required).
class PositivityError : public Error {
 public:
  PositivityError(const std::string& what, double min_eigenvalue)
      : Error(what), min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

class ContourError : public Error {
 public:
  using Error::Error;
};

class CompletionError : public Error {
 public:
  using Error::Error;
};

/// A representation that fails to be a homomorphism (or unitary) within tolerance.
class RepresentationError : public Error {
 public:
  using Error::Error;
};

/// An instance generator produced an object violating its own invariants.
class GeneratorError : public Error {
 public:
  using Error::Error;
};

}  // namespace freeharm
