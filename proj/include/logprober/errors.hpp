// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace logprober {

enum class ErrorKind {
  EmptyQuestion,
  DuplicateId,
  NoScorableTokens,
  InvalidLogprob,
  InvalidConfig,
  NoSamples,
  PartialSamples,
  EchoUnsupported,
  TransportError,
  SchemaError,
  ParseError,
  InvariantViolation,
  MissingItem,
  IoError,
  EmptySplit,
  DegenerateGroups,
  MissingLabels,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when a parse failure can be pinned to a line of an input file.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + reason),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Fewer completions came back than were requested. The ones that did arrive
/// are kept so callers can audit them; they are never padded.
class PartialSamplesError : public Error {
 public:
  PartialSamplesError(std::size_t requested, std::vector<std::string> obtained)
      : Error(ErrorKind::PartialSamples,
              "requested " + std::to_string(requested) + " completions, obtained " +
                  std::to_string(obtained.size())),
        requested_(requested),
        obtained_(std::move(obtained)) {}

  std::size_t requested() const noexcept { return requested_; }
  const std::vector<std::string>& obtained() const noexcept { return obtained_; }

 private:
  std::size_t requested_;
  std::vector<std::string> obtained_;
};

}  // namespace logprober
