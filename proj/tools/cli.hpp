// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>

namespace sr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point shared by the executable and the tests. Subcommands:
/// simulate, run, eval.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sr::cli
