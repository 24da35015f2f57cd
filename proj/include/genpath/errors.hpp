// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace genpath {

// Process exit codes used by the command-line tool. Stable contract.
enum class ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept = 0;
};

// Invalid configuration, arguments, or shape contracts.
class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kUsage; }
};

class ShapeError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Malformed or truncated files, checksum mismatches.
class DataError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kData; }
};

// Non-finite values, diverging losses, corrupted model parameters.
class NumericalError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumerical; }
};

}  // namespace genpath
