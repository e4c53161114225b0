// Copyright (c) approx-opacity contributors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace opacity {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A model document (system JSON, relation JSON, control-system config) failed validation.
/// `location()` names the offending element, e.g. `transitions[3][2]`.
class ModelError : public Error {
  public:
    ModelError(std::string location, const std::string& message)
        : Error(location.empty() ? message : location + ": " + message), location_(std::move(location)) {}

    [[nodiscard]] const std::string& location() const noexcept { return location_; }

  private:
    std::string location_;
};

/// A state-space exploration exceeded its configured budget. Results are never truncated silently.
class BudgetExceeded : public Error {
  public:
    using Error::Error;
};

/// An operation was called outside its documented precondition (negative delta, epsilon > delta/2, ...).
class PreconditionError : public Error {
  public:
    using Error::Error;
};

/// A requested estimator path does not exist.
class PathError : public Error {
  public:
    using Error::Error;
};

} // namespace opacity
