// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace logprober {

using Json = nlohmann::json;

/// One token of a scored sequence. `logprob` is a natural-log conditional
/// probability; the first token of a sequence usually has none.
struct TokenScore {
  std::size_t index = 0;
  std::string token;
  std::optional<double> logprob;

  friend bool operator==(const TokenScore&, const TokenScore&) = default;
};

enum class Label { Contaminated, Clean };
enum class Verdict { Contaminated, Safe };

std::string_view to_string(Label label);
std::string_view to_string(Verdict verdict);
Label parse_label(std::string_view text);
Verdict parse_verdict(std::string_view text);

/// A benchmark item: question ('Q'), optional answer ('A'), optional ground
/// truth and split tag. Fields the toolkit does not know about are carried
/// in `extra` so item files survive a load/save cycle unchanged.
struct QaItem {
  std::string id;
  std::string question;
  std::optional<std::string> answer;
  std::optional<Label> label;
  std::optional<std::string> split;
  Json extra = Json::object();

  friend bool operator==(const QaItem&, const QaItem&) = default;
};

/// Throws Error(EmptyQuestion) when the question is blank after trimming.
const QaItem& validate_item(const QaItem& item);

enum class SortOrder { Ascending, Descending };

struct SafeScoreConfig {
  double threshold = 1.0;
  SortOrder sort_order = SortOrder::Ascending;
  double clamp_epsilon = 1e-12;
  bool drop_missing_logprobs = true;

  void validate() const;
  friend bool operator==(const SafeScoreConfig&, const SafeScoreConfig&) = default;
};

enum class DistanceUnit { Character, Token };

struct CddConfig {
  double alpha = 0.05;
  double xi = 0.01;
  int num_samples = 50;
  double temperature = 1.0;
  int max_answer_tokens = 100;
  std::optional<int> answer_truncation_chars;
  DistanceUnit distance_unit = DistanceUnit::Character;
  // Appended to the question before sampling, e.g. an instruction to stop
  // after the answer. Empty by default.
  std::string prompt_suffix;

  void validate() const;
  friend bool operator==(const CddConfig&, const CddConfig&) = default;
};

std::string_view to_string(SortOrder order);
std::string_view to_string(DistanceUnit unit);
SortOrder parse_sort_order(std::string_view text);
DistanceUnit parse_distance_unit(std::string_view text);

std::string_view trim(std::string_view text);

// External record formats.
void to_json(Json& j, const TokenScore& t);
void from_json(const Json& j, TokenScore& t);
void to_json(Json& j, const QaItem& item);
void from_json(const Json& j, QaItem& item);
void to_json(Json& j, const SafeScoreConfig& config);
void from_json(const Json& j, SafeScoreConfig& config);
void to_json(Json& j, const CddConfig& config);
void from_json(const Json& j, CddConfig& config);

}  // namespace logprober
