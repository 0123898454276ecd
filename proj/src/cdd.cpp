// SPDX-License-Identifier: Apache-2.0

#include "logprober/cdd.hpp"

#include <algorithm>
#include <future>

#include "logprober/errors.hpp"
#include "utf8.hpp"

namespace logprober {

namespace {

std::vector<std::string_view> split_units(std::string_view text, DistanceUnit unit) {
  return unit == DistanceUnit::Character ? detail::utf8_units(text) : detail::whitespace_tokens(text);
}

// Two-row Wagner-Fischer over the shorter sequence.
std::size_t levenshtein(std::span<const std::string_view> a, std::span<const std::string_view> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = a[i - 1] == b[j - 1] ? diag : 1 + std::min({diag, up, row[j - 1]});
      diag = up;
    }
  }
  return row[b.size()];
}

}  // namespace

std::size_t edit_distance(std::string_view a, std::string_view b, DistanceUnit unit) {
  const auto ua = split_units(a, unit);
  const auto ub = split_units(b, unit);
  return levenshtein(ua, ub);
}

std::size_t unit_length(std::string_view text, DistanceUnit unit) {
  return split_units(text, unit).size();
}

double normalized_distance(std::string_view a, std::string_view b, DistanceUnit unit) {
  const auto ua = split_units(a, unit);
  const auto ub = split_units(b, unit);
  const std::size_t denom = std::max({ua.size(), ub.size(), std::size_t{1}});
  return static_cast<double>(levenshtein(ua, ub)) / static_cast<double>(denom);
}

std::string truncate_chars(std::string_view text, std::size_t max_chars) {
  const auto units = detail::utf8_units(text);
  if (units.size() <= max_chars) return std::string(text);
  std::string out;
  for (std::size_t i = 0; i < max_chars; ++i) out.append(units[i]);
  return out;
}

CddResult cdd_score(std::string_view greedy, std::span<const std::string> samples,
                    const CddConfig& config) {
  config.validate();
  if (samples.empty()) throw Error(ErrorKind::NoSamples, "no sampled completions");

  auto cut = [&](std::string_view s) {
    return config.answer_truncation_chars
               ? truncate_chars(s, static_cast<std::size_t>(*config.answer_truncation_chars))
               : std::string(s);
  };

  CddResult r;
  r.greedy_answer = cut(greedy);
  r.sampled_answers.reserve(samples.size());
  r.distances.reserve(samples.size());
  std::size_t within = 0;
  for (const auto& s : samples) {
    r.sampled_answers.push_back(cut(s));
    const double d = normalized_distance(r.greedy_answer, r.sampled_answers.back(), config.distance_unit);
    r.distances.push_back(d);
    if (d <= config.xi) ++within;
  }
  r.peak_ratio = static_cast<double>(within) / static_cast<double>(samples.size());
  r.verdict = r.peak_ratio >= config.alpha ? Verdict::Contaminated : Verdict::Safe;
  return r;
}

CddResult run_cdd(const QaItem& item, CompletionSource& source, const CddConfig& config) {
  config.validate();
  validate_item(item);
  const std::string prompt = item.question + config.prompt_suffix;

  CompletionRequest greedy_req{item.id, prompt, 1, 0.0, config.max_answer_tokens};
  CompletionRequest sample_req{item.id, prompt, config.num_samples, config.temperature,
                               config.max_answer_tokens};

  auto greedy_future = std::async(std::launch::async, [&] { return source.complete(greedy_req); });
  std::vector<std::string> samples;
  try {
    samples = source.complete(sample_req);
  } catch (...) {
    // Drain the other request before propagating.
    try {
      greedy_future.get();
    } catch (...) {
    }
    throw;
  }
  auto greedy = greedy_future.get();
  if (greedy.empty()) throw PartialSamplesError(1, {});
  if (samples.size() < static_cast<std::size_t>(config.num_samples)) {
    throw PartialSamplesError(static_cast<std::size_t>(config.num_samples), std::move(samples));
  }
  samples.resize(static_cast<std::size_t>(config.num_samples));

  auto r = cdd_score(greedy.front(), samples, config);
  r.item_id = item.id;
  return r;
}

void to_json(Json& j, const CddResult& r) {
  j = Json{{"item_id", r.item_id},
           {"greedy_answer", r.greedy_answer},
           {"sampled_answers", r.sampled_answers},
           {"distances", r.distances},
           {"peak_ratio", r.peak_ratio},
           {"verdict", to_string(r.verdict)}};
}

void from_json(const Json& j, CddResult& r) {
  r.item_id = j.at("item_id").get<std::string>();
  r.greedy_answer = j.at("greedy_answer").get<std::string>();
  r.sampled_answers = j.at("sampled_answers").get<std::vector<std::string>>();
  r.distances = j.at("distances").get<std::vector<double>>();
  r.peak_ratio = j.at("peak_ratio").get<double>();
  r.verdict = parse_verdict(j.at("verdict").get<std::string>());
}

}  // namespace logprober
