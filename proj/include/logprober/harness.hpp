// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "logprober/cdd.hpp"
#include "logprober/dataset_io.hpp"
#include "logprober/errors.hpp"
#include "logprober/llm_client.hpp"
#include "logprober/safescore.hpp"
#include "logprober/stats.hpp"
#include "logprober/types.hpp"

namespace logprober {

/// Supplies question-token log-probabilities for an item.
class LogprobSource {
 public:
  virtual ~LogprobSource() = default;
  virtual std::vector<TokenScore> question_tokens(const QaItem& item) = 0;
  /// Description echoed into reports ({"kind": ..., ...}).
  virtual Json describe() const = 0;
};

class DumpLogprobSource : public LogprobSource {
 public:
  DumpLogprobSource(LogprobDump dump, std::string path)
      : dump_(std::move(dump)), path_(std::move(path)) {}
  /// Throws MissingItem when the dump has no record for the item.
  std::vector<TokenScore> question_tokens(const QaItem& item) override;
  Json describe() const override;

 private:
  LogprobDump dump_;
  std::string path_;
};

class EndpointLogprobSource : public LogprobSource {
 public:
  explicit EndpointLogprobSource(LlmClient& client) : client_(client) {}
  std::vector<TokenScore> question_tokens(const QaItem& item) override;
  Json describe() const override;

 private:
  LlmClient& client_;
};

/// Serves recorded completions. A temperature-0 single request returns the
/// greedy answer; anything else returns the first `n` samples.
class DumpCompletionSource : public CompletionSource {
 public:
  DumpCompletionSource(CompletionsDump dump, std::string path)
      : dump_(std::move(dump)), path_(std::move(path)) {}
  std::vector<std::string> complete(const CompletionRequest& request) override;
  Json describe() const;

 private:
  CompletionsDump dump_;
  std::string path_;
};

enum class Detector { LogProber, Cdd };
std::string_view to_string(Detector d);

/// Reading of the question-based and answer-based verdicts side by side.
enum class Interpretation {
  QaTrainedOrQuestionConfident,
  QuestionOnly,
  AnswerOnlyOrConfident,
  Clean,
};

Interpretation interpret(Verdict q_verdict, Verdict a_verdict);
std::string_view to_string(Interpretation i);
std::string_view describe(Interpretation i);

struct ItemError {
  std::string item_id;
  Detector detector = Detector::LogProber;
  ErrorKind kind = ErrorKind::TransportError;
  std::string message;
  // Completions obtained before a PartialSamples failure.
  std::optional<std::size_t> obtained;
};

struct ItemRecord {
  std::string id;
  std::optional<std::string> split;
  std::optional<Label> label;
  std::optional<SafeScoreResult> logprober;
  std::optional<CddResult> cdd;
};

struct SplitRatio {
  std::size_t n_items = 0;
  std::size_t n_contaminated = 0;
  double ratio = 0.0;
};

struct TTestSummary {
  std::string group_x;
  std::string group_y;
  std::string metric;
  TTestResult result;
};

struct ItemInterpretation {
  std::string item_id;
  Verdict q_verdict = Verdict::Safe;
  Verdict a_verdict = Verdict::Safe;
  Interpretation outcome = Interpretation::Clean;
};

struct AuditReport {
  Json run = Json::object();
  std::optional<SafeScoreConfig> logprober_config;
  std::optional<CddConfig> cdd_config;
  std::vector<ItemRecord> items;  // sorted by id
  std::vector<ItemError> errors;  // sorted by (id, detector)
  // detector -> split tag ("all" covers every scored item) -> ratio
  std::map<std::string, std::map<std::string, SplitRatio>> ratios;
  std::map<std::string, ConfusionMetrics> metrics;
  std::optional<TTestSummary> ttest;
  std::vector<ItemInterpretation> interpretations;

  const ItemRecord* find(std::string_view id) const;
};

/// Scores every item with LogProber using up to `jobs` worker threads. Per
/// item failures become error entries. Output does not depend on `jobs` or
/// on corpus order.
AuditReport run_logprober(const Corpus& corpus, LogprobSource& source,
                          const SafeScoreConfig& config, int jobs = 1);

AuditReport run_cdd_corpus(const Corpus& corpus, CompletionSource& source,
                           const CddConfig& config, int jobs = 1);

/// Fraction of verdicts that are contaminated. Throws EmptySplit when empty.
double contamination_ratio(std::span<const Verdict> verdicts);

/// Ratio for items whose split equals `split` ("all" selects every item).
SplitRatio contamination_ratio(const AuditReport& report, Detector detector,
                               const std::string& split);

ConfusionMetrics confusion_metrics(std::span<const Verdict> predicted,
                                   std::span<const Label> labels);

/// Metrics over all items scored by `detector`. Throws MissingLabels when
/// any scored item is unlabelled.
ConfusionMetrics confusion_metrics(const AuditReport& report, Detector detector);

/// Items matched by a group selector: "group:NAME" or "split:NAME" (split
/// tag), "label:contaminated" / "label:clean", or "all".
std::vector<const ItemRecord*> select_group(const AuditReport& report, const std::string& selector);

/// "safe_score" (LogProber) or "peak_ratio" (CDD).
TTestSummary compare_groups(const AuditReport& report, const std::string& group_x,
                            const std::string& group_y, const std::string& metric);

/// Fills `ratios` for every detector present.
void compute_ratios(AuditReport& report);

/// Fills `interpretations` for items carrying both verdicts.
void compute_interpretations(AuditReport& report);

/// Union of two reports by item id. Fails if both carry the same detector
/// result for an item.
AuditReport merge_reports(const AuditReport& a, const AuditReport& b);

enum class ReportFormat { Structured, Tabular };

Json report_to_json(const AuditReport& report);
AuditReport report_from_json(const Json& j);

void write_report(const AuditReport& report, std::ostream& out, ReportFormat format);
void write_report(const AuditReport& report, const std::filesystem::path& path, ReportFormat format);
AuditReport read_report(const std::filesystem::path& path);

}  // namespace logprober
