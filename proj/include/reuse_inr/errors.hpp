// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace reuse_inr {

/// Error categories. Each maps to a distinct process exit code in the CLI.
enum class ErrorKind {
  Usage,
  Config,
  Dimension,
  Index,
  Data,
  Format,
  Corruption,
  Evaluation,
  Io,
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

const char* to_string(ErrorKind kind) noexcept;

/// Exit code used by the command-line front end for an error category.
int exit_code(ErrorKind kind) noexcept;

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace reuse_inr
