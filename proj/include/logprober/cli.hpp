// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <span>
#include <string>

namespace logprober {

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes: 0 success, 1 at least one item failed (the report is still
/// written), 2 usage or configuration error.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace logprober
