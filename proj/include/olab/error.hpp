#pragma once

#include <stdexcept>
#include <string>

namespace olab {

// Base of every error the library throws. The C API maps the concrete
// subclasses onto its status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed grids, configs, violated preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A point or box that falls outside the grid it is evaluated on.
class DomainError : public Error {
 public:
  DomainError(const std::string& what, int axis, double coordinate)
      : Error(what), axis_(axis), coordinate_(coordinate) {}
  int axis() const noexcept { return axis_; }
  double coordinate() const noexcept { return coordinate_; }

 private:
  int axis_;
  double coordinate_;
};

// Non-finite data or a failed factorization inside a numerical kernel.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// A structural invariant checked at run time was broken.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace olab
