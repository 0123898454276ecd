// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "logprober/types.hpp"

namespace logprober {

/// Answer-based baseline. A model that memorized an item tends to produce
/// the same answer whatever the sampling temperature, so sampled completions
/// pile up around the greedy one.
///
/// Reconstruction used here: peak_ratio is the fraction of sampled answers
/// whose normalized edit distance to the greedy answer is <= xi, and the
/// item is flagged when peak_ratio >= alpha.
struct CddResult {
  std::string item_id;
  std::string greedy_answer;
  std::vector<std::string> sampled_answers;
  std::vector<double> distances;
  double peak_ratio = 0.0;
  Verdict verdict = Verdict::Safe;

  friend bool operator==(const CddResult&, const CddResult&) = default;
};

/// Levenshtein distance over Unicode code points (Character) or
/// whitespace-separated words (Token). Malformed UTF-8 bytes count as one
/// unit each.
std::size_t edit_distance(std::string_view a, std::string_view b,
                          DistanceUnit unit = DistanceUnit::Character);

/// edit_distance / max(len(a), len(b), 1), in [0, 1].
double normalized_distance(std::string_view a, std::string_view b,
                           DistanceUnit unit = DistanceUnit::Character);

/// Length in the given unit.
std::size_t unit_length(std::string_view text, DistanceUnit unit);

/// First `max_chars` code points of `text`.
std::string truncate_chars(std::string_view text, std::size_t max_chars);

CddResult cdd_score(std::string_view greedy, std::span<const std::string> samples,
                    const CddConfig& config);

struct CompletionRequest {
  std::string item_id;
  std::string prompt;
  int n = 1;
  double temperature = 0.0;
  int max_tokens = 100;
};

/// Anything that can produce completions: a live endpoint or a recorded
/// completions dump. Implementations must be safe to call concurrently.
class CompletionSource {
 public:
  virtual ~CompletionSource() = default;
  /// Returns up to `n` completions in request order. Throws
  /// PartialSamplesError when fewer than `n` came back.
  virtual std::vector<std::string> complete(const CompletionRequest& request) = 0;
};

/// One greedy completion (temperature 0) plus `num_samples` completions at
/// `config.temperature`, then cdd_score.
CddResult run_cdd(const QaItem& item, CompletionSource& source, const CddConfig& config);

void to_json(Json& j, const CddResult& r);
void from_json(const Json& j, CddResult& r);

}  // namespace logprober
