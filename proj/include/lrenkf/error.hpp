/*
 * (C) Copyright 2026 The lrenkf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace lrenkf {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  /// Short machine-readable category, used in CLI error reports.
  virtual const char* kind() const noexcept { return "error"; }
};

/// Dimensions of two operands do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "shape"; }
};

/// An argument or configuration value is outside its admissible range.
class ValueError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "value"; }
};

/// A factorization or inversion cannot be carried out reliably.
class NumericalError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numerical"; }
};

/// Malformed file contents or an I/O failure.
class FormatError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "format"; }
};

}  // namespace lrenkf
