// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string_view>

#include "logprober/types.hpp"

namespace logprober {

/// Reads the small TOML subset used by endpoint and run configuration
/// files: `[section]` headers, `key = value` pairs with basic strings,
/// literal strings, integers, floats and booleans, and `#` comments.
/// Keys before the first header land at the top level. Returns an object of
/// objects mirroring the sections.
Json parse_config_text(std::string_view text);
Json load_config_file(const std::filesystem::path& path);

}  // namespace logprober
