#pragma once

#include <stdexcept>
#include <string>

namespace supreg {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input or configuration (bad interval, sigma < 0, D too small, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown: a solver could not produce a trustworthy answer.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The rate equation has no root in (0, 1]: n is too small for the noise level.
class NoRootError : public NumericalError {
 public:
  NoRootError(const std::string& what, double x) : NumericalError(what), x_(x) {}
  double x() const noexcept { return x_; }

 private:
  double x_;
};

/// A local least-squares system stayed ill-conditioned after regularization.
class SingularFitError : public NumericalError {
 public:
  SingularFitError(const std::string& what, double condition)
      : NumericalError(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

/// A localized inner product was requested over a window holding no data.
class EmptyWindowError : public Error {
 public:
  using Error::Error;
};

/// Every candidate window of a bandwidth grid is empty.
class EmptyGridError : public Error {
 public:
  using Error::Error;
};

/// The localization interval is too short to hold a single bump.
class EmptyFamilyError : public InputError {
 public:
  using InputError::InputError;
};

}  // namespace supreg
