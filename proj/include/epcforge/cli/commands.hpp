// SPDX-License-Identifier: Apache-2.0
//
// The epcforge command-line surface. Exit codes: 0 success, 1 internal
// failure, 2 bad usage or bad input.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace epcforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Directory name used for the generations of corpus sample `index`.
std::string sample_dir_name(std::size_t index);

}  // namespace epcforge::cli
