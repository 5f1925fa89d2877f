// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace loadcast::cli {

/// Entry point of the `loadcast` tool. Returns the process exit code:
/// 0 success, 2 usage/config, 3 data, 4 numeric, 5 internal invariant.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace loadcast::cli
