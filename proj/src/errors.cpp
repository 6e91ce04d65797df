// SPDX-License-Identifier: Apache-2.0
#include "reuse_inr/errors.hpp"

namespace reuse_inr {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Usage: return "usage error";
    case ErrorKind::Config: return "configuration error";
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::Index: return "index error";
    case ErrorKind::Data: return "data error";
    case ErrorKind::Format: return "format error";
    case ErrorKind::Corruption: return "corruption error";
    case ErrorKind::Evaluation: return "evaluation error";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Usage: return 2;
    case ErrorKind::Config: return 3;
    case ErrorKind::Dimension: return 4;
    case ErrorKind::Index: return 4;
    case ErrorKind::Data: return 5;
    case ErrorKind::Format: return 6;
    case ErrorKind::Corruption: return 7;
    case ErrorKind::Evaluation: return 8;
    case ErrorKind::Io: return 9;
  }
  return 1;
}

}  // namespace reuse_inr
