// SPDX-License-Identifier: Apache-2.0

#include "logprober/types.hpp"

#include <cmath>

#include "logprober/errors.hpp"

namespace logprober {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyQuestion: return "EmptyQuestion";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::NoScorableTokens: return "NoScorableTokens";
    case ErrorKind::InvalidLogprob: return "InvalidLogprob";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::NoSamples: return "NoSamples";
    case ErrorKind::PartialSamples: return "PartialSamples";
    case ErrorKind::EchoUnsupported: return "EchoUnsupported";
    case ErrorKind::TransportError: return "TransportError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::MissingItem: return "MissingItem";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::EmptySplit: return "EmptySplit";
    case ErrorKind::DegenerateGroups: return "DegenerateGroups";
    case ErrorKind::MissingLabels: return "MissingLabels";
  }
  return "Unknown";
}

std::string_view to_string(Label label) {
  return label == Label::Contaminated ? "contaminated" : "clean";
}

std::string_view to_string(Verdict verdict) {
  return verdict == Verdict::Contaminated ? "contaminated" : "safe";
}

Label parse_label(std::string_view text) {
  if (text == "contaminated") return Label::Contaminated;
  if (text == "clean") return Label::Clean;
  throw Error(ErrorKind::SchemaError, "unknown label '" + std::string(text) + "'");
}

Verdict parse_verdict(std::string_view text) {
  if (text == "contaminated") return Verdict::Contaminated;
  if (text == "safe") return Verdict::Safe;
  throw Error(ErrorKind::SchemaError, "unknown verdict '" + std::string(text) + "'");
}

std::string_view to_string(SortOrder order) {
  return order == SortOrder::Ascending ? "ascending" : "descending";
}

std::string_view to_string(DistanceUnit unit) {
  return unit == DistanceUnit::Character ? "character" : "token";
}

SortOrder parse_sort_order(std::string_view text) {
  if (text == "ascending") return SortOrder::Ascending;
  if (text == "descending") return SortOrder::Descending;
  throw Error(ErrorKind::InvalidConfig, "sort_order must be ascending or descending");
}

DistanceUnit parse_distance_unit(std::string_view text) {
  if (text == "character") return DistanceUnit::Character;
  if (text == "token") return DistanceUnit::Token;
  throw Error(ErrorKind::InvalidConfig, "distance_unit must be character or token");
}

std::string_view trim(std::string_view text) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto first = text.find_first_not_of(ws);
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(ws);
  return text.substr(first, last - first + 1);
}

const QaItem& validate_item(const QaItem& item) {
  if (trim(item.question).empty()) {
    throw Error(ErrorKind::EmptyQuestion, "item '" + item.id + "' has an empty question");
  }
  return item;
}

void SafeScoreConfig::validate() const {
  if (!std::isfinite(threshold)) {
    throw Error(ErrorKind::InvalidConfig, "threshold must be finite");
  }
  if (!(clamp_epsilon > 0.0) || !std::isfinite(clamp_epsilon)) {
    throw Error(ErrorKind::InvalidConfig, "clamp_epsilon must be a positive finite number");
  }
}

void CddConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "alpha must lie in (0, 1)");
  }
  if (!(xi > 0.0 && xi < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "xi must lie in (0, 1)");
  }
  if (num_samples < 1) {
    throw Error(ErrorKind::InvalidConfig, "num_samples must be at least 1");
  }
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorKind::InvalidConfig, "temperature must be nonnegative");
  }
  if (max_answer_tokens < 1) {
    throw Error(ErrorKind::InvalidConfig, "max_answer_tokens must be at least 1");
  }
  if (answer_truncation_chars && *answer_truncation_chars < 1) {
    throw Error(ErrorKind::InvalidConfig, "answer_truncation_chars must be positive");
  }
}

void to_json(Json& j, const TokenScore& t) {
  j = Json{{"index", t.index}, {"token", t.token}};
  j["logprob"] = t.logprob ? Json(*t.logprob) : Json(nullptr);
}

void from_json(const Json& j, TokenScore& t) {
  t.index = j.at("index").get<std::size_t>();
  t.token = j.at("token").get<std::string>();
  const auto& lp = j.at("logprob");
  t.logprob = lp.is_null() ? std::nullopt : std::optional<double>(lp.get<double>());
}

namespace {
constexpr std::string_view kItemFields[] = {"id", "question", "answer", "label", "split"};

bool is_item_field(const std::string& key) {
  for (auto f : kItemFields) {
    if (key == f) return true;
  }
  return false;
}

std::optional<std::string> optional_string(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw Error(ErrorKind::SchemaError, std::string("field '") + key + "' must be a string");
  }
  return it->get<std::string>();
}
}  // namespace

void to_json(Json& j, const QaItem& item) {
  j = item.extra.is_object() ? item.extra : Json::object();
  j["id"] = item.id;
  j["question"] = item.question;
  if (item.answer) j["answer"] = *item.answer;
  if (item.label) j["label"] = to_string(*item.label);
  if (item.split) j["split"] = *item.split;
}

void from_json(const Json& j, QaItem& item) {
  if (!j.is_object()) throw Error(ErrorKind::SchemaError, "item record must be an object");
  auto id = optional_string(j, "id");
  if (!id || id->empty()) throw Error(ErrorKind::SchemaError, "missing field 'id'");
  auto question = optional_string(j, "question");
  if (!question) throw Error(ErrorKind::SchemaError, "missing field 'question'");
  item.id = std::move(*id);
  item.question = std::move(*question);
  item.answer = optional_string(j, "answer");
  auto label = optional_string(j, "label");
  item.label = label ? std::optional<Label>(parse_label(*label)) : std::nullopt;
  item.split = optional_string(j, "split");
  item.extra = Json::object();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!is_item_field(it.key())) item.extra[it.key()] = it.value();
  }
}

void to_json(Json& j, const SafeScoreConfig& c) {
  j = Json{{"threshold", c.threshold},
           {"sort_order", to_string(c.sort_order)},
           {"clamp_epsilon", c.clamp_epsilon},
           {"drop_missing_logprobs", c.drop_missing_logprobs}};
}

void from_json(const Json& j, SafeScoreConfig& c) {
  c = SafeScoreConfig{};
  if (j.contains("threshold")) c.threshold = j.at("threshold").get<double>();
  if (j.contains("sort_order")) c.sort_order = parse_sort_order(j.at("sort_order").get<std::string>());
  if (j.contains("clamp_epsilon")) c.clamp_epsilon = j.at("clamp_epsilon").get<double>();
  if (j.contains("drop_missing_logprobs")) {
    c.drop_missing_logprobs = j.at("drop_missing_logprobs").get<bool>();
  }
}

void to_json(Json& j, const CddConfig& c) {
  j = Json{{"alpha", c.alpha},
           {"xi", c.xi},
           {"num_samples", c.num_samples},
           {"temperature", c.temperature},
           {"max_answer_tokens", c.max_answer_tokens},
           {"distance_unit", to_string(c.distance_unit)},
           {"prompt_suffix", c.prompt_suffix}};
  j["answer_truncation_chars"] =
      c.answer_truncation_chars ? Json(*c.answer_truncation_chars) : Json(nullptr);
}

void from_json(const Json& j, CddConfig& c) {
  c = CddConfig{};
  if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
  if (j.contains("xi")) c.xi = j.at("xi").get<double>();
  if (j.contains("num_samples")) c.num_samples = j.at("num_samples").get<int>();
  if (j.contains("temperature")) c.temperature = j.at("temperature").get<double>();
  if (j.contains("max_answer_tokens")) c.max_answer_tokens = j.at("max_answer_tokens").get<int>();
  if (j.contains("distance_unit")) {
    c.distance_unit = parse_distance_unit(j.at("distance_unit").get<std::string>());
  }
  if (j.contains("prompt_suffix")) c.prompt_suffix = j.at("prompt_suffix").get<std::string>();
  if (j.contains("answer_truncation_chars") && !j.at("answer_truncation_chars").is_null()) {
    c.answer_truncation_chars = j.at("answer_truncation_chars").get<int>();
  }
}

}  // namespace logprober
