// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace gspace {

/// Broad failure classes. The CLI maps them onto exit codes
/// (validation/format/io -> 2, degenerate -> 3).
enum class ErrorKind { validation, format, io, degenerate };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Bad arguments, dimension mismatches, out-of-range parameters.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

/// Malformed or truncated files.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::format, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

/// The data itself makes the requested quantity undefined
/// (empty stream, zero variance, a single cluster for silhouette, ...).
class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& what) : Error(ErrorKind::degenerate, what) {}
};

/// A vector with zero L2 norm where a direction is required.
class ZeroVectorError : public DegenerateError {
 public:
  explicit ZeroVectorError(const std::string& what) : DegenerateError(what) {}
};

}  // namespace gspace
