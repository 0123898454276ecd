// SPDX-License-Identifier: Apache-2.0

#include "logprober/safescore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "logprober/errors.hpp"

namespace logprober {

std::vector<double> extract_logprobs(std::span<const TokenScore> tokens,
                                     const SafeScoreConfig& config) {
  std::vector<double> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (t.logprob) {
      out.push_back(*t.logprob);
    } else if (!config.drop_missing_logprobs) {
      throw Error(ErrorKind::InvalidLogprob,
                  "token " + std::to_string(t.index) + " has no log-probability");
    }
  }
  if (out.empty()) {
    throw Error(ErrorKind::NoScorableTokens, "no token carries a log-probability");
  }
  return out;
}

SafeScoreResult safe_score(std::span<const double> logprobs, const SafeScoreConfig& config) {
  config.validate();
  if (logprobs.empty()) {
    throw Error(ErrorKind::NoScorableTokens, "empty log-probability sequence");
  }
  for (std::size_t i = 0; i < logprobs.size(); ++i) {
    const double lp = logprobs[i];
    if (!std::isfinite(lp) || lp > 0.0) {
      throw Error(ErrorKind::InvalidLogprob,
                  "log-probability at position " + std::to_string(i) + " is not finite and <= 0");
    }
  }

  SafeScoreResult r;
  const std::size_t n = logprobs.size();
  r.n_tokens = n;
  r.logprobs.assign(logprobs.begin(), logprobs.end());

  r.cumulative_curve.resize(n);
  std::partial_sum(logprobs.begin(), logprobs.end(), r.cumulative_curve.begin());

  r.sorted_normalized = r.logprobs;
  if (config.sort_order == SortOrder::Ascending) {
    std::stable_sort(r.sorted_normalized.begin(), r.sorted_normalized.end());
  } else {
    std::stable_sort(r.sorted_normalized.begin(), r.sorted_normalized.end(), std::greater<>{});
  }
  const double len = static_cast<double>(n);
  for (auto& v : r.sorted_normalized) v /= len;

  r.sorted_cumulative_curve.resize(n);
  std::partial_sum(r.sorted_normalized.begin(), r.sorted_normalized.end(),
                   r.sorted_cumulative_curve.begin());

  double area = std::accumulate(r.sorted_cumulative_curve.begin(), r.sorted_cumulative_curve.end(), 0.0);
  if (area > -config.clamp_epsilon) {
    area = -config.clamp_epsilon;
    r.clamped = true;
  }
  r.integral = area;
  r.safe_score = std::log(-area);
  r.verdict = r.safe_score < config.threshold ? Verdict::Contaminated : Verdict::Safe;
  return r;
}

SafeScoreResult score_item(const QaItem& item, std::span<const TokenScore> tokens,
                           const SafeScoreConfig& config) {
  try {
    auto lp = extract_logprobs(tokens, config);
    auto r = safe_score(lp, config);
    r.item_id = item.id;
    return r;
  } catch (const Error& e) {
    throw Error(e.kind(), "item '" + item.id + "': " + e.what());
  }
}

void to_json(Json& j, const SafeScoreResult& r) {
  j = Json{{"item_id", r.item_id},
           {"n_tokens", r.n_tokens},
           {"logprobs", r.logprobs},
           {"cumulative_curve", r.cumulative_curve},
           {"sorted_normalized", r.sorted_normalized},
           {"sorted_cumulative_curve", r.sorted_cumulative_curve},
           {"integral", r.integral},
           {"clamped", r.clamped},
           {"safe_score", r.safe_score},
           {"verdict", to_string(r.verdict)}};
}

void from_json(const Json& j, SafeScoreResult& r) {
  r.item_id = j.at("item_id").get<std::string>();
  r.n_tokens = j.at("n_tokens").get<std::size_t>();
  r.logprobs = j.at("logprobs").get<std::vector<double>>();
  r.cumulative_curve = j.at("cumulative_curve").get<std::vector<double>>();
  r.sorted_normalized = j.at("sorted_normalized").get<std::vector<double>>();
  r.sorted_cumulative_curve = j.at("sorted_cumulative_curve").get<std::vector<double>>();
  r.integral = j.at("integral").get<double>();
  r.clamped = j.at("clamped").get<bool>();
  r.safe_score = j.at("safe_score").get<double>();
  r.verdict = parse_verdict(j.at("verdict").get<std::string>());
}

}  // namespace logprober
