// SPDX-License-Identifier: Apache-2.0

#include "logprober/harness.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <set>
#include <thread>

#include "logprober/errors.hpp"

namespace logprober {

namespace fs = std::filesystem;

std::vector<TokenScore> DumpLogprobSource::question_tokens(const QaItem& item) {
  auto it = dump_.records.find(item.id);
  if (it == dump_.records.end()) {
    throw Error(ErrorKind::MissingItem, "dump has no record for item '" + item.id + "'");
  }
  return it->second.tokens;
}

Json DumpLogprobSource::describe() const { return Json{{"kind", "dump"}, {"path", path_}}; }

std::vector<TokenScore> EndpointLogprobSource::question_tokens(const QaItem& item) {
  return client_.fetch_question_logprobs(item.question).tokens;
}

Json EndpointLogprobSource::describe() const {
  return Json{{"kind", "endpoint"},
              {"base_url", client_.config().base_url},
              {"model", client_.config().model}};
}

std::vector<std::string> DumpCompletionSource::complete(const CompletionRequest& request) {
  auto it = dump_.records.find(request.item_id);
  if (it == dump_.records.end()) {
    throw Error(ErrorKind::MissingItem, "completions dump has no record for '" + request.item_id + "'");
  }
  const auto& rec = it->second;
  if (request.temperature == 0.0 && request.n == 1) return {rec.greedy};
  const auto n = static_cast<std::size_t>(request.n);
  if (rec.samples.size() < n) throw PartialSamplesError(n, rec.samples);
  return {rec.samples.begin(), rec.samples.begin() + static_cast<std::ptrdiff_t>(n)};
}

Json DumpCompletionSource::describe() const {
  return Json{{"kind", "completions_dump"}, {"path", path_}};
}

std::string_view to_string(Detector d) { return d == Detector::LogProber ? "logprober" : "cdd"; }

namespace {
Detector parse_detector(std::string_view s) {
  if (s == "logprober") return Detector::LogProber;
  if (s == "cdd") return Detector::Cdd;
  throw Error(ErrorKind::SchemaError, "unknown detector '" + std::string(s) + "'");
}
}  // namespace

Interpretation interpret(Verdict q, Verdict a) {
  const bool qc = q == Verdict::Contaminated;
  const bool ac = a == Verdict::Contaminated;
  if (qc && ac) return Interpretation::QaTrainedOrQuestionConfident;
  if (qc) return Interpretation::QuestionOnly;
  if (ac) return Interpretation::AnswerOnlyOrConfident;
  return Interpretation::Clean;
}

std::string_view to_string(Interpretation i) {
  switch (i) {
    case Interpretation::QaTrainedOrQuestionConfident: return "qa_trained_or_q_confident";
    case Interpretation::QuestionOnly: return "q_only";
    case Interpretation::AnswerOnlyOrConfident: return "a_only_or_confident";
    case Interpretation::Clean: return "clean";
  }
  return "clean";
}

std::string_view describe(Interpretation i) {
  switch (i) {
    case Interpretation::QaTrainedOrQuestionConfident:
      return "trained on the full 'Q-A' pair, or seen the question ('Q-' training) and happens "
             "to be confident in its answer";
    case Interpretation::QuestionOnly:
      return "trained on the question alone";
    case Interpretation::AnswerOnlyOrConfident:
      return "likely indicates '-A' training, or that the model is just confident in its answer";
    case Interpretation::Clean:
      return "the model was not contaminated on the item";
  }
  return "";
}

namespace {

Interpretation parse_interpretation(std::string_view s) {
  for (auto i : {Interpretation::QaTrainedOrQuestionConfident, Interpretation::QuestionOnly,
                 Interpretation::AnswerOnlyOrConfident, Interpretation::Clean}) {
    if (to_string(i) == s) return i;
  }
  throw Error(ErrorKind::SchemaError, "unknown interpretation '" + std::string(s) + "'");
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::clamp<std::size_t>(
      static_cast<std::size_t>(std::max(jobs, 1)), 1, std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
}

ItemRecord record_for(const QaItem& item) {
  return ItemRecord{item.id, item.split, item.label, std::nullopt, std::nullopt};
}

ItemError error_for(const std::string& id, Detector detector, const std::exception& e) {
  ItemError err{id, detector, ErrorKind::TransportError, e.what(), std::nullopt};
  if (const auto* partial = dynamic_cast<const PartialSamplesError*>(&e)) {
    err.obtained = partial->obtained().size();
  }
  if (const auto* typed = dynamic_cast<const Error*>(&e)) {
    err.kind = typed->kind();
  } else {
    err.kind = ErrorKind::InvariantViolation;
  }
  return err;
}

void sort_report(AuditReport& report) {
  std::sort(report.items.begin(), report.items.end(),
            [](const ItemRecord& a, const ItemRecord& b) { return a.id < b.id; });
  std::sort(report.errors.begin(), report.errors.end(), [](const ItemError& a, const ItemError& b) {
    return std::tie(a.item_id, a.detector) < std::tie(b.item_id, b.detector);
  });
}

template <typename Result, typename Fn>
void run_items(const Corpus& corpus, Detector detector, int jobs, AuditReport& report,
               std::optional<Result> ItemRecord::*slot, Fn&& score) {
  const std::size_t n = corpus.items.size();
  std::vector<std::optional<Result>> results(n);
  std::vector<std::optional<ItemError>> failures(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    const auto& item = corpus.items[i];
    try {
      results[i] = score(item);
    } catch (const std::exception& e) {
      failures[i] = error_for(item.id, detector, e);
    }
  });
  for (std::size_t i = 0; i < n; ++i) {
    if (failures[i]) {
      report.errors.push_back(std::move(*failures[i]));
    } else {
      auto rec = record_for(corpus.items[i]);
      rec.*slot = std::move(results[i]);
      report.items.push_back(std::move(rec));
    }
  }
  sort_report(report);
}

Json corpus_info(const Corpus& corpus) {
  return Json{{"name", corpus.name}, {"source", corpus.source}, {"n_items", corpus.items.size()}};
}

}  // namespace

const ItemRecord* AuditReport::find(std::string_view id) const {
  auto it = std::lower_bound(items.begin(), items.end(), id,
                             [](const ItemRecord& r, std::string_view key) { return r.id < key; });
  return it != items.end() && it->id == id ? &*it : nullptr;
}

AuditReport run_logprober(const Corpus& corpus, LogprobSource& source,
                          const SafeScoreConfig& config, int jobs) {
  config.validate();
  AuditReport report;
  report.logprober_config = config;
  report.run = Json{{"corpus", corpus_info(corpus)}, {"logprob_source", source.describe()}};
  run_items<SafeScoreResult>(corpus, Detector::LogProber, jobs, report, &ItemRecord::logprober,
                             [&](const QaItem& item) {
                               const auto tokens = source.question_tokens(item);
                               return score_item(item, tokens, config);
                             });
  compute_ratios(report);
  return report;
}

AuditReport run_cdd_corpus(const Corpus& corpus, CompletionSource& source, const CddConfig& config,
                           int jobs) {
  config.validate();
  AuditReport report;
  report.cdd_config = config;
  report.run = Json{{"corpus", corpus_info(corpus)}};
  run_items<CddResult>(corpus, Detector::Cdd, jobs, report, &ItemRecord::cdd,
                       [&](const QaItem& item) { return run_cdd(item, source, config); });
  compute_ratios(report);
  return report;
}

double contamination_ratio(std::span<const Verdict> verdicts) {
  if (verdicts.empty()) throw Error(ErrorKind::EmptySplit, "split has no scored items");
  const auto hits = std::count(verdicts.begin(), verdicts.end(), Verdict::Contaminated);
  return static_cast<double>(hits) / static_cast<double>(verdicts.size());
}

namespace {
std::optional<Verdict> verdict_of(const ItemRecord& rec, Detector detector) {
  if (detector == Detector::LogProber) {
    return rec.logprober ? std::optional(rec.logprober->verdict) : std::nullopt;
  }
  return rec.cdd ? std::optional(rec.cdd->verdict) : std::nullopt;
}
}  // namespace

SplitRatio contamination_ratio(const AuditReport& report, Detector detector, const std::string& split) {
  std::vector<Verdict> verdicts;
  for (const auto& rec : report.items) {
    if (split != "all" && rec.split != split) continue;
    if (auto v = verdict_of(rec, detector)) verdicts.push_back(*v);
  }
  if (verdicts.empty()) {
    throw Error(ErrorKind::EmptySplit, "split '" + split + "' has no items scored by " +
                                           std::string(to_string(detector)));
  }
  SplitRatio r;
  r.n_items = verdicts.size();
  r.ratio = contamination_ratio(verdicts);
  r.n_contaminated = static_cast<std::size_t>(
      std::count(verdicts.begin(), verdicts.end(), Verdict::Contaminated));
  return r;
}

ConfusionMetrics confusion_metrics(std::span<const Verdict> predicted, std::span<const Label> labels) {
  if (predicted.size() != labels.size()) {
    throw Error(ErrorKind::MissingLabels, "every scored item needs a label");
  }
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool flagged = predicted[i] == Verdict::Contaminated;
    const bool truth = labels[i] == Label::Contaminated;
    if (flagged && truth) ++tp;
    else if (flagged) ++fp;
    else if (truth) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, fn, tn);
}

ConfusionMetrics confusion_metrics(const AuditReport& report, Detector detector) {
  std::vector<Verdict> predicted;
  std::vector<Label> labels;
  for (const auto& rec : report.items) {
    auto v = verdict_of(rec, detector);
    if (!v) continue;
    if (!rec.label) {
      throw Error(ErrorKind::MissingLabels,
                  "item '" + rec.id + "' has no ground-truth label; metrics need a labelled corpus");
    }
    predicted.push_back(*v);
    labels.push_back(*rec.label);
  }
  return confusion_metrics(predicted, labels);
}

std::vector<const ItemRecord*> select_group(const AuditReport& report, const std::string& selector) {
  std::vector<const ItemRecord*> out;
  const auto colon = selector.find(':');
  const std::string kind = colon == std::string::npos ? selector : selector.substr(0, colon);
  const std::string value = colon == std::string::npos ? "" : selector.substr(colon + 1);
  if (kind == "all" && colon == std::string::npos) {
    for (const auto& rec : report.items) out.push_back(&rec);
  } else if ((kind == "group" || kind == "split") && !value.empty()) {
    for (const auto& rec : report.items) {
      if (rec.split == value) out.push_back(&rec);
    }
  } else if (kind == "label" && !value.empty()) {
    const Label wanted = parse_label(value);
    for (const auto& rec : report.items) {
      if (rec.label == wanted) out.push_back(&rec);
    }
  } else {
    throw Error(ErrorKind::InvalidConfig, "bad group selector '" + selector + "'");
  }
  return out;
}

TTestSummary compare_groups(const AuditReport& report, const std::string& group_x,
                            const std::string& group_y, const std::string& metric) {
  auto values = [&](const std::string& selector) {
    std::vector<double> v;
    for (const auto* rec : select_group(report, selector)) {
      if (metric == "safe_score") {
        if (rec->logprober) v.push_back(rec->logprober->safe_score);
      } else if (metric == "peak_ratio") {
        if (rec->cdd) v.push_back(rec->cdd->peak_ratio);
      } else {
        throw Error(ErrorKind::InvalidConfig, "t-test metric must be safe_score or peak_ratio");
      }
    }
    return v;
  };
  const auto xs = values(group_x);
  const auto ys = values(group_y);
  return TTestSummary{group_x, group_y, metric, welch_t_test(xs, ys)};
}

void compute_ratios(AuditReport& report) {
  report.ratios.clear();
  for (Detector d : {Detector::LogProber, Detector::Cdd}) {
    std::set<std::string> splits;
    bool any = false;
    for (const auto& rec : report.items) {
      if (!verdict_of(rec, d)) continue;
      any = true;
      if (rec.split) splits.insert(*rec.split);
    }
    if (!any) continue;
    auto& table = report.ratios[std::string(to_string(d))];
    table["all"] = contamination_ratio(report, d, "all");
    for (const auto& s : splits) table[s] = contamination_ratio(report, d, s);
  }
}

void compute_interpretations(AuditReport& report) {
  report.interpretations.clear();
  for (const auto& rec : report.items) {
    if (!rec.logprober || !rec.cdd) continue;
    report.interpretations.push_back(ItemInterpretation{
        rec.id, rec.logprober->verdict, rec.cdd->verdict,
        interpret(rec.logprober->verdict, rec.cdd->verdict)});
  }
}

AuditReport merge_reports(const AuditReport& a, const AuditReport& b) {
  AuditReport out;
  out.run = Json{{"inputs", Json::array({a.run, b.run})}};
  out.logprober_config = a.logprober_config ? a.logprober_config : b.logprober_config;
  out.cdd_config = a.cdd_config ? a.cdd_config : b.cdd_config;

  std::map<std::string, ItemRecord> merged;
  for (const auto* src : {&a, &b}) {
    for (const auto& rec : src->items) {
      auto [it, fresh] = merged.try_emplace(rec.id, rec);
      if (fresh) continue;
      auto& dst = it->second;
      if ((rec.logprober && dst.logprober) || (rec.cdd && dst.cdd)) {
        throw Error(ErrorKind::InvariantViolation,
                    "item '" + rec.id + "' carries the same detector result in both reports");
      }
      if (rec.logprober) dst.logprober = rec.logprober;
      if (rec.cdd) dst.cdd = rec.cdd;
      if (!dst.split) dst.split = rec.split;
      if (!dst.label) dst.label = rec.label;
    }
    out.errors.insert(out.errors.end(), src->errors.begin(), src->errors.end());
  }
  for (auto& [_, rec] : merged) out.items.push_back(std::move(rec));
  sort_report(out);
  compute_ratios(out);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

Json error_to_json(const ItemError& e) {
  Json j{{"item_id", e.item_id},
         {"detector", to_string(e.detector)},
         {"kind", to_string(e.kind)},
         {"message", e.message}};
  if (e.obtained) j["obtained"] = *e.obtained;
  return j;
}

ErrorKind parse_error_kind(std::string_view s) {
  for (int k = 0; k <= static_cast<int>(ErrorKind::MissingLabels); ++k) {
    if (to_string(static_cast<ErrorKind>(k)) == s) return static_cast<ErrorKind>(k);
  }
  throw Error(ErrorKind::SchemaError, "unknown error kind '" + std::string(s) + "'");
}

}  // namespace

Json report_to_json(const AuditReport& report) {
  Json j;
  j["format"] = "logprober-report/1";
  j["run"] = report.run;
  Json config = Json::object();
  if (report.logprober_config) config["logprober"] = *report.logprober_config;
  if (report.cdd_config) config["cdd"] = *report.cdd_config;
  j["config"] = config;

  Json items = Json::array();
  for (const auto& rec : report.items) {
    Json r{{"id", rec.id}};
    r["split"] = rec.split ? Json(*rec.split) : Json(nullptr);
    r["label"] = rec.label ? Json(to_string(*rec.label)) : Json(nullptr);
    if (rec.logprober) r["logprober"] = *rec.logprober;
    if (rec.cdd) r["cdd"] = *rec.cdd;
    items.push_back(std::move(r));
  }
  j["items"] = std::move(items);

  Json errors = Json::array();
  for (const auto& e : report.errors) errors.push_back(error_to_json(e));
  j["errors"] = std::move(errors);

  Json ratios = Json::object();
  for (const auto& [det, table] : report.ratios) {
    for (const auto& [split, r] : table) {
      ratios[det][split] =
          Json{{"n_items", r.n_items}, {"n_contaminated", r.n_contaminated}, {"ratio", r.ratio}};
    }
  }
  j["ratios"] = std::move(ratios);

  if (!report.metrics.empty()) {
    Json metrics = Json::object();
    for (const auto& [det, m] : report.metrics) metrics[det] = m;
    j["metrics"] = std::move(metrics);
  }
  if (report.ttest) {
    j["ttest"] = Json{{"group_x", report.ttest->group_x},
                      {"group_y", report.ttest->group_y},
                      {"metric", report.ttest->metric},
                      {"result", report.ttest->result}};
  }
  if (!report.interpretations.empty()) {
    Json interp = Json::array();
    for (const auto& i : report.interpretations) {
      interp.push_back(Json{{"item_id", i.item_id},
                            {"q_verdict", to_string(i.q_verdict)},
                            {"a_verdict", to_string(i.a_verdict)},
                            {"outcome", to_string(i.outcome)},
                            {"description", describe(i.outcome)}});
    }
    j["interpretations"] = std::move(interp);
  }
  return j;
}

AuditReport report_from_json(const Json& j) {
  try {
    if (j.value("format", "") != "logprober-report/1") {
      throw Error(ErrorKind::SchemaError, "not a logprober report");
    }
    AuditReport report;
    report.run = j.value("run", Json::object());
    const Json& config = j.at("config");
    if (config.contains("logprober")) report.logprober_config = config.at("logprober").get<SafeScoreConfig>();
    if (config.contains("cdd")) report.cdd_config = config.at("cdd").get<CddConfig>();
    for (const auto& r : j.at("items")) {
      ItemRecord rec;
      rec.id = r.at("id").get<std::string>();
      if (!r.at("split").is_null()) rec.split = r.at("split").get<std::string>();
      if (!r.at("label").is_null()) rec.label = parse_label(r.at("label").get<std::string>());
      if (r.contains("logprober")) rec.logprober = r.at("logprober").get<SafeScoreResult>();
      if (r.contains("cdd")) rec.cdd = r.at("cdd").get<CddResult>();
      report.items.push_back(std::move(rec));
    }
    for (const auto& e : j.at("errors")) {
      ItemError err;
      err.item_id = e.at("item_id").get<std::string>();
      err.detector = parse_detector(e.at("detector").get<std::string>());
      err.kind = parse_error_kind(e.at("kind").get<std::string>());
      err.message = e.at("message").get<std::string>();
      if (e.contains("obtained")) err.obtained = e.at("obtained").get<std::size_t>();
      report.errors.push_back(std::move(err));
    }
    for (const auto& [det, table] : j.at("ratios").items()) {
      for (const auto& [split, r] : table.items()) {
        report.ratios[det][split] = SplitRatio{r.at("n_items").get<std::size_t>(),
                                               r.at("n_contaminated").get<std::size_t>(),
                                               r.at("ratio").get<double>()};
      }
    }
    if (j.contains("metrics")) {
      for (const auto& [det, m] : j.at("metrics").items()) report.metrics[det] = m.get<ConfusionMetrics>();
    }
    if (j.contains("ttest")) {
      const auto& t = j.at("ttest");
      report.ttest = TTestSummary{t.at("group_x").get<std::string>(), t.at("group_y").get<std::string>(),
                                  t.at("metric").get<std::string>(), t.at("result").get<TTestResult>()};
    }
    if (j.contains("interpretations")) {
      for (const auto& i : j.at("interpretations")) {
        report.interpretations.push_back(
            ItemInterpretation{i.at("item_id").get<std::string>(),
                               parse_verdict(i.at("q_verdict").get<std::string>()),
                               parse_verdict(i.at("a_verdict").get<std::string>()),
                               parse_interpretation(i.at("outcome").get<std::string>())});
      }
    }
    sort_report(report);
    return report;
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::SchemaError, std::string("malformed report: ") + e.what());
  }
}

namespace {

std::string csv(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string opt_num(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

void write_tabular(const AuditReport& report, std::ostream& out) {
  std::map<std::string, Interpretation> outcome;
  for (const auto& i : report.interpretations) outcome[i.item_id] = i.outcome;

  out << "# items\n";
  out << "item_id,split,label,n_tokens,safe_score,logprober_verdict,peak_ratio,cdd_verdict,interpretation\n";
  for (const auto& rec : report.items) {
    out << csv(rec.id) << ',' << csv(rec.split.value_or("")) << ','
        << (rec.label ? to_string(*rec.label) : "") << ',';
    if (rec.logprober) {
      out << rec.logprober->n_tokens << ',' << format_double(rec.logprober->safe_score) << ','
          << to_string(rec.logprober->verdict) << ',';
    } else {
      out << ",,,";
    }
    if (rec.cdd) {
      out << format_double(rec.cdd->peak_ratio) << ',' << to_string(rec.cdd->verdict) << ',';
    } else {
      out << ",,";
    }
    auto it = outcome.find(rec.id);
    out << (it != outcome.end() ? to_string(it->second) : "") << '\n';
  }

  out << "# ratios\ndetector,split,n_items,n_contaminated,ratio\n";
  for (const auto& [det, table] : report.ratios) {
    for (const auto& [split, r] : table) {
      out << det << ',' << csv(split) << ',' << r.n_items << ',' << r.n_contaminated << ','
          << format_double(r.ratio) << '\n';
    }
  }
  if (!report.metrics.empty()) {
    out << "# metrics\ndetector,tp,fp,fn,tn,accuracy,precision,recall,f1\n";
    for (const auto& [det, m] : report.metrics) {
      out << det << ',' << m.tp << ',' << m.fp << ',' << m.fn << ',' << m.tn << ','
          << format_double(m.accuracy) << ',' << opt_num(m.precision) << ',' << opt_num(m.recall)
          << ',' << opt_num(m.f1) << '\n';
    }
  }
  if (report.ttest) {
    const auto& t = *report.ttest;
    out << "# ttest\ngroup_x,group_y,metric,n_x,n_y,mean_x,mean_y,t,df,p_two_tailed\n";
    out << csv(t.group_x) << ',' << csv(t.group_y) << ',' << t.metric << ',' << t.result.n_x << ','
        << t.result.n_y << ',' << format_double(t.result.mean_x) << ','
        << format_double(t.result.mean_y) << ',' << format_double(t.result.t) << ','
        << format_double(t.result.df) << ',' << format_double(t.result.p_two_tailed) << '\n';
  }
  out << "# errors\nitem_id,detector,kind,message\n";
  for (const auto& e : report.errors) {
    out << csv(e.item_id) << ',' << to_string(e.detector) << ',' << to_string(e.kind) << ','
        << csv(e.message) << '\n';
  }
}

}  // namespace

void write_report(const AuditReport& report, std::ostream& out, ReportFormat format) {
  if (format == ReportFormat::Structured) {
    out << report_to_json(report).dump(2) << '\n';
  } else {
    write_tabular(report, out);
  }
}

void write_report(const AuditReport& report, const fs::path& path, ReportFormat format) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  write_report(report, out, format);
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

AuditReport read_report(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::SchemaError, path.string() + ": " + e.what());
  }
  return report_from_json(j);
}

}  // namespace logprober
