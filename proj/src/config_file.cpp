// SPDX-License-Identifier: Apache-2.0

#include "logprober/config_file.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "logprober/errors.hpp"

namespace logprober {

namespace {

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

// Parses a quoted string starting at text[0]; returns the value and sets
// `rest` to whatever follows the closing quote.
std::string parse_string(std::string_view text, std::size_t line, std::string_view& rest) {
  const char quote = text[0];
  std::string out;
  std::size_t i = 1;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c == quote) break;
    if (c == '\\' && quote == '"') {
      if (++i >= text.size()) break;
      switch (text[i]) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: throw ParseError(line, "unsupported escape sequence");
      }
    } else {
      out += c;
    }
  }
  if (i >= text.size()) throw ParseError(line, "unterminated string");
  rest = text.substr(i + 1);
  return out;
}

Json parse_scalar(std::string_view raw, std::size_t line) {
  if (raw.empty()) throw ParseError(line, "missing value");
  if (raw.front() == '"' || raw.front() == '\'') {
    std::string_view rest;
    auto value = parse_string(raw, line, rest);
    rest = trim(rest);
    if (!rest.empty() && rest.front() != '#') throw ParseError(line, "trailing characters after string");
    return value;
  }
  if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = trim(raw.substr(0, hash));
  if (raw == "true") return true;
  if (raw == "false") return false;

  std::string digits;
  for (char c : raw) {
    if (c != '_') digits += c;
  }
  std::int64_t iv = 0;
  auto [iend, iec] = std::from_chars(digits.data(), digits.data() + digits.size(), iv);
  if (iec == std::errc{} && iend == digits.data() + digits.size()) return iv;
  double dv = 0.0;
  auto [dend, dec] = std::from_chars(digits.data(), digits.data() + digits.size(), dv);
  if (dec == std::errc{} && dend == digits.data() + digits.size()) return dv;
  throw ParseError(line, "cannot parse value '" + std::string(raw) + "'");
}

}  // namespace

Json parse_config_text(std::string_view text) {
  Json root = Json::object();
  Json* section = &root;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      const auto close = line.find(']');
      if (close == std::string_view::npos) throw ParseError(line_no, "unterminated section header");
      const auto name = trim(line.substr(1, close - 1));
      if (!valid_key(name)) throw ParseError(line_no, "invalid section name");
      const auto tail = trim(line.substr(close + 1));
      if (!tail.empty() && tail.front() != '#') throw ParseError(line_no, "trailing characters after header");
      const std::string key(name);
      if (root.contains(key)) throw ParseError(line_no, "duplicate section '" + key + "'");
      root[key] = Json::object();
      section = &root[key];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw ParseError(line_no, "invalid key");
    const std::string k(key);
    if (section->contains(k)) throw ParseError(line_no, "duplicate key '" + k + "'");
    (*section)[k] = parse_scalar(trim(line.substr(eq + 1)), line_no);
  }
  return root;
}

Json load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ParseError& e) {
    throw Error(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

}  // namespace logprober
