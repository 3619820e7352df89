// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace augloop {

/// Base exception for everything the library throws. `code` is a stable
/// upper-case identifier (e.g. "NUMERIC_DIVERGENCE") that callers and ledgers
/// can match on; `what()` carries the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Bad input that the caller can fix (config, policy, file format).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Failure while a run is executing (trainer, provider, I/O).
class RuntimeError : public Error {
 public:
  using Error::Error;
};

}  // namespace augloop
