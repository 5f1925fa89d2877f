// SPDX-License-Identifier: Apache-2.0
#include "loadcast/error.hpp"

namespace loadcast {

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
  case ErrorKind::config:
    return 2;
  case ErrorKind::io:
  case ErrorKind::shape:
  case ErrorKind::data:
    return 3;
  case ErrorKind::numeric:
    return 4;
  case ErrorKind::internal:
    return 5;
  }
  return 5;
}

} // namespace loadcast
