// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "logprober/safescore.hpp"
#include "logprober/types.hpp"

namespace logprober {

struct Corpus {
  std::string name;
  std::string source;  // file path, or "embedded"
  std::vector<QaItem> items;

  const QaItem* find(std::string_view id) const;
};

/// Builds a corpus, validating every item and rejecting repeated ids.
Corpus make_corpus(std::string name, std::string source, std::vector<QaItem> items);

/// Streams item records (one JSON object per line, blank lines skipped) to
/// `sink` without holding the file in memory. Errors carry the line number.
void for_each_item(std::istream& in, const std::function<void(QaItem&&, std::size_t line)>& sink);

Corpus load_items(const std::filesystem::path& path);
void write_items(const Corpus& corpus, std::ostream& out);
void write_items(const Corpus& corpus, const std::filesystem::path& path);

/// The seven classic Cognitive Reflection Test items (labelled contaminated,
/// split "oldcrt") and their seven reworded counterparts (labelled clean,
/// split "newcrt").
std::pair<Corpus, Corpus> embedded_crt();

/// Accepts "embedded:oldcrt", "embedded:newcrt", "embedded:crt" (both) or a
/// file path.
Corpus resolve_corpus(const std::string& spec);

/// One entry of an offline log-probability dump.
struct DumpRecord {
  std::string model;
  std::vector<TokenScore> tokens;

  friend bool operator==(const DumpRecord&, const DumpRecord&) = default;
};

struct LogprobDump {
  std::map<std::string, DumpRecord> records;
};

/// Parses a dump line. Accepts the flat shape
/// {"id","model","tokens":[...],"logprobs":[...]} and the wire shape where
/// "logprobs" is {"tokens":[...],"token_logprobs":[...]}. An optional
/// "logprob_base" converts values to natural log.
std::pair<std::string, DumpRecord> parse_dump_record(const Json& j);
Json dump_record_to_json(const std::string& id, const DumpRecord& record);

LogprobDump load_dump(const std::filesystem::path& path);
void write_dump(const LogprobDump& dump, const std::filesystem::path& path);

/// Recorded completions for the answer-based detector: one greedy answer and
/// the sampled answers per item.
struct CompletionRecord {
  std::string model;
  std::string greedy;
  std::vector<std::string> samples;

  friend bool operator==(const CompletionRecord&, const CompletionRecord&) = default;
};

struct CompletionsDump {
  std::map<std::string, CompletionRecord> records;
};

CompletionsDump load_completions_dump(const std::filesystem::path& path);
void write_completions_dump(const CompletionsDump& dump, const std::filesystem::path& path);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// CSV with header
/// item_id,position,logprob,cumulative_logprob,sorted_normalized_logprob,sorted_cumulative
/// and one row per scored token. `position` is the 0-based rank; the
/// logprob and cumulative_logprob columns are in token order, the sorted
/// columns in sorted order.
void write_curves(std::span<const SafeScoreResult> results, std::ostream& out);
void write_curves(std::span<const SafeScoreResult> results, const std::filesystem::path& path);

}  // namespace logprober
