// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace oprior {

/// Base of every failure raised by the generator and the evaluator.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

#define OPRIOR_DEFINE_ERROR(Name, prefix)                               \
  class Name : public Error {                                           \
   public:                                                              \
    explicit Name(const std::string& what) : Error(prefix ": " + what) {} \
  }

OPRIOR_DEFINE_ERROR(ConfigError, "config-error");
OPRIOR_DEFINE_ERROR(NumericError, "numeric-error");
OPRIOR_DEFINE_ERROR(SelectionError, "selection-error");
OPRIOR_DEFINE_ERROR(CalibrationError, "calibration-error");
OPRIOR_DEFINE_ERROR(ExhaustedError, "exhausted-error");
OPRIOR_DEFINE_ERROR(FormatError, "format-error");
OPRIOR_DEFINE_ERROR(VersionError, "version-error");
OPRIOR_DEFINE_ERROR(IoError, "io-error");
OPRIOR_DEFINE_ERROR(EvalError, "eval-error");

#undef OPRIOR_DEFINE_ERROR

}  // namespace oprior
