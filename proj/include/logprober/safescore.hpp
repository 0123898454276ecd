// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "logprober/types.hpp"

namespace logprober {

/// Outcome of scoring one question.
///
/// `cumulative_curve` is the running sum of log-probabilities in token order.
/// `sorted_cumulative_curve` is the running sum after sorting the
/// log-probabilities (ascending by default: most negative first) and dividing
/// each by the number of scored tokens. `integral` is the sum of that second
/// curve, i.e. the area under its step function. A sequence the model knows
/// by heart plateaus early, so the area is small and the score is low.
struct SafeScoreResult {
  std::string item_id;
  std::size_t n_tokens = 0;
  std::vector<double> logprobs;
  std::vector<double> cumulative_curve;
  std::vector<double> sorted_normalized;
  std::vector<double> sorted_cumulative_curve;
  double integral = 0.0;
  // True when the area was closer to zero than clamp_epsilon and got pinned.
  bool clamped = false;
  double safe_score = 0.0;
  Verdict verdict = Verdict::Safe;

  friend bool operator==(const SafeScoreResult&, const SafeScoreResult&) = default;
};

/// Present log-probabilities in token order. Absent entries are skipped when
/// `config.drop_missing_logprobs` is set; otherwise an absent entry is an
/// InvalidLogprob error.
std::vector<double> extract_logprobs(std::span<const TokenScore> tokens,
                                     const SafeScoreConfig& config);

/// Safe Score of a log-probability sequence. Every value must be finite and
/// <= 0. `item_id` is left empty.
SafeScoreResult safe_score(std::span<const double> logprobs, const SafeScoreConfig& config);

/// Scores the question tokens of `item`. Errors are rethrown with the item
/// id in the message.
SafeScoreResult score_item(const QaItem& item, std::span<const TokenScore> tokens,
                           const SafeScoreConfig& config);

void to_json(Json& j, const SafeScoreResult& r);
void from_json(const Json& j, SafeScoreResult& r);

}  // namespace logprober
