#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace agmm {

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct OutOfRange : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// Base for failures that arise while fitting rather than from bad input.
struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateVariance : FitError {
  using FitError::FitError;
};

struct SingularDesign : FitError {
  using FitError::FitError;
};

struct InitFailure : FitError {
  using FitError::FitError;
};

struct IsolatedGridPoint : FitError {
  IsolatedGridPoint(std::size_t j)
      : FitError("grid point " + std::to_string(j) +
                 " has zero kernel mass; increase h or use a gaussian kernel"),
        index(j) {}
  std::size_t index;
};

struct NoSupport : FitError {
  using FitError::FitError;
};

// Unreadable, unwritable or malformed files.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidState : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace agmm
