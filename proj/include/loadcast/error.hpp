// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace loadcast {

enum class ErrorKind {
  io,
  config,
  shape,
  data,
  numeric,
  internal,
};

/// Base for every error raised by the engine. The kind drives the CLI exit
/// code, so callers can catch this one type and still tell failures apart.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

class IoError : public Error {
public:
  explicit IoError(const std::string &what) : Error(ErrorKind::io, what) {}
};

class ConfigError : public Error {
public:
  explicit ConfigError(const std::string &what)
      : Error(ErrorKind::config, what) {}
};

class ShapeError : public Error {
public:
  explicit ShapeError(const std::string &what)
      : Error(ErrorKind::shape, what) {}
};

class DataError : public Error {
public:
  explicit DataError(const std::string &what) : Error(ErrorKind::data, what) {}
};

class NumericError : public Error {
public:
  explicit NumericError(const std::string &what)
      : Error(ErrorKind::numeric, what) {}
};

class InternalError : public Error {
public:
  explicit InternalError(const std::string &what)
      : Error(ErrorKind::internal, what) {}
};

/// Process exit code for an error kind: 2 usage/config, 3 data, 4 numeric,
/// 5 internal invariant.
int exit_code_for(ErrorKind kind) noexcept;

} // namespace loadcast
