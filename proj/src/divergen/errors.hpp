#pragma once

#include <stdexcept>
#include <string>

namespace divergen {

// Exit codes used by the CLI: 0 success, 1 usage, 2 I/O, 3 format, 4 numeric.
enum ExitCode {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIo = 2,
  kExitFormat = 3,
  kExitNumeric = 4,
};

// Bad flag values, invalid hyperparameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unreadable/unwritable files.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Readable file with contents that do not parse.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Incompatible tensor shapes; message carries both shapes.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

}  // namespace divergen
