#pragma once

#include <stdexcept>
#include <string>

namespace hcadapt {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Raised when the first-order part of an expansion vanishes at a grid point,
/// so the Gaussian adaptation direction is undefined there.
class DegenerateGaussianPart : public Error {
 public:
  DegenerateGaussianPart(const std::string& what, std::size_t point)
      : Error(what), point_(point) {}
  std::size_t point() const { return point_; }

 private:
  std::size_t point_;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace hcadapt
