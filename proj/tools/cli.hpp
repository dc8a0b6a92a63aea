// SPDX-License-Identifier: Apache-2.0
// Command-line front end: pretrain, train, oracle, eval, serve, ablate.
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pebble::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRunFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line; argv[0] is the program name. Returns the exit code.
int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace pebble::cli
