// SPDX-License-Identifier: Apache-2.0

#include "logprober/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <optional>

#include "logprober/config_file.hpp"
#include "logprober/dataset_io.hpp"
#include "logprober/errors.hpp"
#include "logprober/harness.hpp"
#include "logprober/llm_client.hpp"

namespace logprober {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitItemErrors = 1;
constexpr int kExitUsage = 2;

// Raised for anything that is the caller's fault: bad flags, unreadable
// inputs, invalid configuration.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string corpus;
  std::string out;
  std::string format = "structured";
  std::string config_file;
  std::string timestamp;
  int jobs = 1;
  bool verbose = false;
};

struct EndpointOverrides {
  std::string endpoint;
  std::optional<std::string> cache_dir;
  std::optional<int> max_in_flight;
  std::optional<int> retries;
};

struct ScoreOptions {
  CommonOptions common;
  EndpointOverrides ep;
  std::string dump;
  std::string curves;
  std::optional<double> threshold;
  std::optional<std::string> sort_order;
  std::optional<double> clamp_epsilon;
  bool keep_missing = false;
};

struct CddOptions {
  CommonOptions common;
  EndpointOverrides ep;
  std::string completions;
  std::optional<double> alpha;
  std::optional<double> xi;
  std::optional<int> samples;
  std::optional<double> temperature;
  std::optional<int> max_tokens;
  std::optional<int> truncate_chars;
  std::optional<std::string> distance_unit;
  std::optional<std::string> prompt_suffix;
};

struct ReportOptions {
  std::vector<std::string> inputs;
  std::string out;
  std::string format = "structured";
  std::vector<std::string> ttest;
  std::string ttest_metric = "safe_score";
  bool metrics = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--corpus", o.corpus,
                  "Item file (JSON lines) or embedded:oldcrt | embedded:newcrt | embedded:crt")
      ->required();
  cmd->add_option("--out", o.out, "Report output path")->required();
  cmd->add_option("--format", o.format, "Report format")
      ->check(CLI::IsMember({"structured", "tabular"}))
      ->capture_default_str();
  cmd->add_option("--config", o.config_file, "Run configuration file (TOML subset)");
  cmd->add_option("--jobs", o.jobs, "Items scored in parallel")
      ->check(CLI::Range(1, 1024))
      ->capture_default_str();
  cmd->add_option("--timestamp", o.timestamp,
                  "Timestamp recorded in the report (default: SOURCE_DATE_EPOCH if set, else none)");
  cmd->add_flag("-v,--verbose", o.verbose, "Progress messages on stderr");
}

void add_endpoint(CLI::App* cmd, EndpointOverrides& o) {
  cmd->add_option("--endpoint", o.endpoint,
                  "Endpoint configuration file; the API key is read from LOGPROBER_API_KEY");
  cmd->add_option("--cache-dir", o.cache_dir, "Response cache directory (overrides endpoint file)");
  cmd->add_option("--max-in-flight", o.max_in_flight, "Concurrent HTTP requests (overrides endpoint file)");
  cmd->add_option("--retries", o.retries, "Retries per request (overrides endpoint file)");
}

ReportFormat parse_format(const std::string& s) {
  return s == "tabular" ? ReportFormat::Tabular : ReportFormat::Structured;
}

Json load_run_config(const std::string& path) {
  if (path.empty()) return Json::object();
  return load_config_file(path);
}

std::optional<std::string> resolve_timestamp(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long secs = std::strtoll(epoch, &end, 10);
    if (end == epoch || *end != '\0') throw UsageError("SOURCE_DATE_EPOCH is not an integer");
    const std::time_t t = static_cast<std::time_t>(secs);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
  }
  return std::nullopt;
}

EndpointConfig endpoint_config(const EndpointOverrides& o) {
  EndpointConfig c = load_endpoint_config(o.endpoint);
  if (o.cache_dir) c.cache_dir = *o.cache_dir;
  if (o.max_in_flight) c.max_in_flight = *o.max_in_flight;
  if (o.retries) c.retries = *o.retries;
  c.validate();
  return c;
}

void stamp_run(AuditReport& report, const CommonOptions& common, std::string_view command) {
  report.run["command"] = command;
  report.run["tool_version"] = kVersion;
  if (auto ts = resolve_timestamp(common.timestamp)) report.run["timestamp"] = *ts;
}

int finish_run(const AuditReport& report, const CommonOptions& common, std::ostream& err) {
  write_report(report, common.out, parse_format(common.format));
  if (common.verbose) {
    err << "scored " << report.items.size() << " item(s), " << report.errors.size()
        << " error(s); report written to " << common.out << '\n';
  }
  for (const auto& e : report.errors) {
    err << "error: " << e.item_id << ": " << to_string(e.kind) << ": " << e.message << '\n';
  }
  return report.errors.empty() ? kExitOk : kExitItemErrors;
}

int cmd_score(const ScoreOptions& o, std::ostream& err) {
  if (o.ep.endpoint.empty() == o.dump.empty()) {
    throw UsageError("exactly one of --endpoint or --dump is required");
  }
  SafeScoreConfig config;
  const Json file = load_run_config(o.common.config_file);
  if (file.contains("logprober")) config = file.at("logprober").get<SafeScoreConfig>();
  if (o.threshold) config.threshold = *o.threshold;
  if (o.sort_order) config.sort_order = parse_sort_order(*o.sort_order);
  if (o.clamp_epsilon) config.clamp_epsilon = *o.clamp_epsilon;
  if (o.keep_missing) config.drop_missing_logprobs = false;
  config.validate();

  const Corpus corpus = resolve_corpus(o.common.corpus);
  AuditReport report;
  if (!o.dump.empty()) {
    DumpLogprobSource source(load_dump(o.dump), o.dump);
    report = run_logprober(corpus, source, config, o.common.jobs);
  } else {
    LlmClient client(endpoint_config(o.ep));
    EndpointLogprobSource source(client);
    report = run_logprober(corpus, source, config, o.common.jobs);
  }
  stamp_run(report, o.common, "score");

  if (!o.curves.empty()) {
    std::vector<SafeScoreResult> results;
    for (const auto& rec : report.items) {
      if (rec.logprober) results.push_back(*rec.logprober);
    }
    if (!results.empty()) write_curves(results, o.curves);
  }
  return finish_run(report, o.common, err);
}

int cmd_cdd(const CddOptions& o, std::ostream& err) {
  if (o.ep.endpoint.empty() == o.completions.empty()) {
    throw UsageError("exactly one of --endpoint or --completions is required");
  }
  CddConfig config;
  const Json file = load_run_config(o.common.config_file);
  if (file.contains("cdd")) config = file.at("cdd").get<CddConfig>();
  if (o.alpha) config.alpha = *o.alpha;
  if (o.xi) config.xi = *o.xi;
  if (o.samples) config.num_samples = *o.samples;
  if (o.temperature) config.temperature = *o.temperature;
  if (o.max_tokens) config.max_answer_tokens = *o.max_tokens;
  if (o.truncate_chars) config.answer_truncation_chars = *o.truncate_chars;
  if (o.distance_unit) config.distance_unit = parse_distance_unit(*o.distance_unit);
  if (o.prompt_suffix) config.prompt_suffix = *o.prompt_suffix;
  config.validate();

  const Corpus corpus = resolve_corpus(o.common.corpus);
  AuditReport report;
  if (!o.completions.empty()) {
    DumpCompletionSource source(load_completions_dump(o.completions), o.completions);
    report = run_cdd_corpus(corpus, source, config, o.common.jobs);
    report.run["completion_source"] = source.describe();
  } else {
    LlmClient client(endpoint_config(o.ep));
    report = run_cdd_corpus(corpus, client, config, o.common.jobs);
    report.run["completion_source"] = Json{{"kind", "endpoint"},
                                           {"base_url", client.config().base_url},
                                           {"model", client.config().model}};
  }
  stamp_run(report, o.common, "cdd");
  return finish_run(report, o.common, err);
}

int cmd_report(const ReportOptions& o, std::ostream& err) {
  if (o.inputs.empty() || o.inputs.size() > 2) throw UsageError("--input takes one or two report files");
  AuditReport report = read_report(o.inputs[0]);
  if (o.inputs.size() == 2) report = merge_reports(report, read_report(o.inputs[1]));
  compute_ratios(report);
  compute_interpretations(report);

  report.metrics.clear();
  for (Detector d : {Detector::LogProber, Detector::Cdd}) {
    const auto key = std::string(to_string(d));
    if (!report.ratios.contains(key)) continue;
    try {
      report.metrics[key] = confusion_metrics(report, d);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::MissingLabels) throw;
      if (o.metrics) throw UsageError(std::string("--metrics: ") + e.what());
    }
  }
  if (!o.ttest.empty()) {
    try {
      report.ttest = compare_groups(report, o.ttest[0], o.ttest[1], o.ttest_metric);
    } catch (const Error& e) {
      throw UsageError(std::string("--ttest: ") + e.what());
    }
  }
  report.run["command"] = "report";
  report.run["tool_version"] = kVersion;

  write_report(report, o.out, parse_format(o.format));
  for (const auto& e : report.errors) {
    err << "note: input carries error for " << e.item_id << ": " << to_string(e.kind) << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contamination audit for language-model benchmarks", "logprober"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  ScoreOptions score;
  auto* score_cmd = app.add_subcommand("score", "Score question log-probabilities with LogProber");
  add_common(score_cmd, score.common);
  add_endpoint(score_cmd, score.ep);
  score_cmd->add_option("--dump", score.dump, "Offline log-probability dump (JSON lines)");
  score_cmd->add_option("--curves", score.curves, "Write per-token curve CSV to this path");
  score_cmd->add_option("--threshold", score.threshold, "Safe Score threshold [default: 1.0]");
  score_cmd->add_option("--sort-order", score.sort_order, "Sort direction [default: ascending]")
      ->check(CLI::IsMember({"ascending", "descending"}));
  score_cmd->add_option("--clamp-epsilon", score.clamp_epsilon,
                        "Smallest magnitude of the area before taking the log [default: 1e-12]");
  score_cmd->add_flag("--keep-missing-logprobs", score.keep_missing,
                      "Fail items with tokens lacking a log-probability instead of skipping them");

  CddOptions cdd;
  auto* cdd_cmd = app.add_subcommand("cdd", "Run the answer-based completion-peakedness detector");
  add_common(cdd_cmd, cdd.common);
  add_endpoint(cdd_cmd, cdd.ep);
  cdd_cmd->add_option("--completions", cdd.completions, "Recorded completions dump (JSON lines)");
  cdd_cmd->add_option("--alpha", cdd.alpha, "Peak-ratio threshold [default: 0.05]");
  cdd_cmd->add_option("--xi", cdd.xi, "Normalized edit-distance tolerance [default: 0.01]");
  cdd_cmd->add_option("--samples", cdd.samples, "Sampled completions per item [default: 50]");
  cdd_cmd->add_option("--temperature", cdd.temperature, "Sampling temperature [default: 1.0]");
  cdd_cmd->add_option("--max-tokens", cdd.max_tokens, "Completion length cap in tokens [default: 100]");
  cdd_cmd->add_option("--truncate-chars", cdd.truncate_chars,
                      "Cut every answer to this many characters before comparing");
  cdd_cmd->add_option("--distance-unit", cdd.distance_unit, "Edit-distance unit [default: character]")
      ->check(CLI::IsMember({"character", "token"}));
  cdd_cmd->add_option("--prompt-suffix", cdd.prompt_suffix, "Text appended to each question");

  ReportOptions rep;
  auto* report_cmd = app.add_subcommand("report", "Merge detector reports and compute statistics");
  report_cmd->add_option("--input", rep.inputs, "Report file from score or cdd (one or two)")
      ->required();
  report_cmd->add_option("--out", rep.out, "Output path")->required();
  report_cmd->add_option("--format", rep.format, "Output format")
      ->check(CLI::IsMember({"structured", "tabular"}))
      ->capture_default_str();
  report_cmd->add_flag("--metrics", rep.metrics, "Require confusion metrics (fails on unlabelled items)");
  report_cmd->add_option("--ttest", rep.ttest,
                         "Welch t-test between two groups (group:NAME, split:NAME, label:VALUE, all)")
      ->expected(2);
  report_cmd->add_option("--ttest-metric", rep.ttest_metric, "Value compared by --ttest")
      ->check(CLI::IsMember({"safe_score", "peak_ratio"}))
      ->capture_default_str();

  std::vector<std::string> reversed(args.begin(), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*score_cmd) return cmd_score(score, err);
    if (*cdd_cmd) return cmd_cdd(cdd, err);
    return cmd_report(rep, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const Json::exception& e) {
    err << "error: invalid configuration: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace logprober
