// Copyright (c) 2026, The GradientSpace Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gspace::cli {

/// Exit codes: 0 success, 2 usage/validation/format/io, 3 degenerate data.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDegenerate = 3;

/// Runs the `gspace` tool in-process. Machine-readable output goes to `out`,
/// human messages to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gspace::cli
