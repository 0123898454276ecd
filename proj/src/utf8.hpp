// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace logprober::detail {

/// Splits UTF-8 text into code-point byte ranges. An invalid lead or
/// truncated sequence yields a single-byte unit.
inline std::vector<std::string_view> utf8_units(std::string_view text) {
  std::vector<std::string_view> units;
  units.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (c >= 0xF0 && c <= 0xF4) {
      len = 4;
    } else if (c >= 0xE0) {
      len = c <= 0xEF ? 3 : 1;
    } else if (c >= 0xC2) {
      len = 2;
    }
    if (len > 1) {
      if (i + len > text.size()) {
        len = 1;
      } else {
        for (std::size_t k = 1; k < len; ++k) {
          if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
            len = 1;
            break;
          }
        }
      }
    }
    units.push_back(text.substr(i, len));
    i += len;
  }
  return units;
}

inline std::vector<std::string_view> whitespace_tokens(std::string_view text) {
  std::vector<std::string_view> out;
  constexpr std::string_view ws = " \t\r\n\f\v";
  std::size_t i = text.find_first_not_of(ws);
  while (i != std::string_view::npos) {
    auto end = text.find_first_of(ws, i);
    out.push_back(text.substr(i, end == std::string_view::npos ? end : end - i));
    i = end == std::string_view::npos ? end : text.find_first_not_of(ws, end);
  }
  return out;
}

}  // namespace logprober::detail
