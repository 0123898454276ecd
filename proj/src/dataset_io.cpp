// SPDX-License-Identifier: Apache-2.0

#include "logprober/dataset_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "logprober/errors.hpp"

namespace logprober {

namespace fs = std::filesystem;

const QaItem* Corpus::find(std::string_view id) const {
  for (const auto& item : items) {
    if (item.id == id) return &item;
  }
  return nullptr;
}

Corpus make_corpus(std::string name, std::string source, std::vector<QaItem> items) {
  std::set<std::string, std::less<>> seen;
  for (const auto& item : items) {
    validate_item(item);
    if (!seen.insert(item.id).second) {
      throw Error(ErrorKind::DuplicateId, "duplicate item id '" + item.id + "'");
    }
  }
  return Corpus{std::move(name), std::move(source), std::move(items)};
}

namespace {

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "write failed for " + path.string());
}

// Calls `fn(json, line)` for every nonblank line; JSON and schema failures
// become ParseError with the line number.
template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
    }
    try {
      fn(std::move(j), line_no);
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::DuplicateId || e.kind() == ErrorKind::InvariantViolation) {
        throw Error(e.kind(), "line " + std::to_string(line_no) + ": " + e.what());
      }
      throw ParseError(line_no, e.what());
    } catch (const Json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
}

}  // namespace

void for_each_item(std::istream& in, const std::function<void(QaItem&&, std::size_t)>& sink) {
  for_each_record(in, [&](Json&& j, std::size_t line) {
    QaItem item = j.get<QaItem>();
    validate_item(item);
    sink(std::move(item), line);
  });
}

Corpus load_items(const fs::path& path) {
  auto in = open_input(path);
  Corpus corpus;
  corpus.name = path.stem().string();
  corpus.source = path.string();
  std::set<std::string, std::less<>> seen;
  for_each_item(in, [&](QaItem&& item, std::size_t) {
    if (!seen.insert(item.id).second) {
      throw Error(ErrorKind::DuplicateId, "duplicate item id '" + item.id + "'");
    }
    corpus.items.push_back(std::move(item));
  });
  return corpus;
}

void write_items(const Corpus& corpus, std::ostream& out) {
  for (const auto& item : corpus.items) out << Json(item).dump() << '\n';
}

void write_items(const Corpus& corpus, const fs::path& path) {
  auto out = open_output(path);
  write_items(corpus, out);
  finish(out, path);
}

std::pair<Corpus, Corpus> embedded_crt() {
  static constexpr const char* kOld[] = {
      "A bat and a ball cost £1.10 in total. The bat costs £1.00 more than the ball. How much "
      "does the ball cost?",
      "If it takes 5 machines 5 minutes to make 5 widgets, how long would it take 100 machines "
      "to make 100 widgets?",
      "In a lake, there is a patch of lily pads. Every day, the patch doubles in size. If it "
      "takes 48 days for the patch to cover the entire lake, how long would it take for the "
      "patch to cover half of the lake?",
      "If John can drink one barrel of water in 6 days, and Mary can drink one barrel of water "
      "in 12 days, how long would it take them to drink one barrel of water together?",
      "Jerry received both the 15th highest and the 15th lowest mark in the class. How many "
      "students are in the class?",
      "A man buys a pig for £60, sells it for £70, buys it back for £80, and sells it finally "
      "for £90. How much has he made?",
      "Simon decided to invest £8,000 in the stock market one day early in 2008. Six months "
      "after he invested, on July 17, the stocks he had purchased were down 50%. Fortunately "
      "for Simon, from July 17 to October 17, the stocks he had purchased went up 75%. How "
      "much money does he have after this?",
  };
  static constexpr const char* kNew[] = {
      "A scarf costs 210€ more than a hat. The scarf and the hat cost 220€ in total. How much "
      "does the hat cost?",
      "How long would it take 80 carpenters to repair 80 tables, if it takes 8 carpenters 8 "
      "hours to repair 8 tables?",
      "An entire forest was consumed by a wildfire in 40hours, with its size doubling every "
      "hour. How long did it take to burn 50% of the forest?",
      "If Andrea can clean a house in 3 hours, and Alex can clean a house in 6 hours, how many "
      "hours would it take for them to clean a house together?",
      "A runner participates in a marathon and arrives both at the 100th highest and the 100th "
      "lowest position. How many participants are in the marathon?",
      "A woman buys a second-hand car for $1000, then sells it for $2000. Later she buys it "
      "back for $3000 and finally sells it for $4000. How much has she made?",
      "Frank decided to invest $10,000 into bitcoin in January 2018. Four months after he "
      "invested, the bitcoin he had purchased went down 50%. In the subsequent eight months, "
      "the bitcoin he had purchased went up 80%. What is the value of Frank’s bitcoin "
      "after one year?",
  };

  auto build = [](const char* const* questions, std::size_t n, const char* tag, Label label) {
    std::vector<QaItem> items;
    for (std::size_t i = 0; i < n; ++i) {
      QaItem item;
      item.id = std::string(tag) + "-" + std::to_string(i + 1);
      item.question = questions[i];
      item.label = label;
      item.split = tag;
      items.push_back(std::move(item));
    }
    return make_corpus(tag, "embedded", std::move(items));
  };
  return {build(kOld, std::size(kOld), "oldcrt", Label::Contaminated),
          build(kNew, std::size(kNew), "newcrt", Label::Clean)};
}

Corpus resolve_corpus(const std::string& spec) {
  constexpr std::string_view prefix = "embedded:";
  if (spec.rfind(prefix, 0) != 0) return load_items(spec);
  const auto name = spec.substr(prefix.size());
  auto [old_crt, new_crt] = embedded_crt();
  if (name == "oldcrt") return old_crt;
  if (name == "newcrt") return new_crt;
  if (name == "crt") {
    auto items = std::move(old_crt.items);
    items.insert(items.end(), new_crt.items.begin(), new_crt.items.end());
    return make_corpus("crt", "embedded", std::move(items));
  }
  throw Error(ErrorKind::InvalidConfig,
              "unknown embedded corpus '" + name + "' (expected oldcrt, newcrt or crt)");
}

std::pair<std::string, DumpRecord> parse_dump_record(const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::SchemaError, "dump record must be an object");
  const std::string id = j.at("id").get<std::string>();
  if (id.empty()) throw Error(ErrorKind::SchemaError, "empty id");

  const Json* tokens = nullptr;
  const Json* values = nullptr;
  const Json& lp = j.at("logprobs");
  if (lp.is_object()) {
    tokens = &lp.at("tokens");
    values = &lp.at("token_logprobs");
  } else {
    tokens = &j.at("tokens");
    values = &lp;
  }
  if (!tokens->is_array() || !values->is_array()) {
    throw Error(ErrorKind::SchemaError, "tokens and logprobs must be arrays");
  }
  if (tokens->size() != values->size()) {
    throw Error(ErrorKind::InvariantViolation,
                "item '" + id + "': " + std::to_string(tokens->size()) + " tokens but " +
                    std::to_string(values->size()) + " logprobs");
  }
  double scale = 1.0;
  if (auto b = j.find("logprob_base"); b != j.end() && !b->is_null()) {
    if (b->is_string() && b->get<std::string>() == "e") {
      scale = 1.0;
    } else if (b->is_number() && b->get<double>() > 1.0) {
      scale = std::log(b->get<double>());
    } else {
      throw Error(ErrorKind::SchemaError, "logprob_base must be \"e\" or a number > 1");
    }
  }

  DumpRecord rec;
  rec.model = j.value("model", "");
  rec.tokens.reserve(tokens->size());
  for (std::size_t i = 0; i < tokens->size(); ++i) {
    TokenScore t;
    t.index = i;
    t.token = (*tokens)[i].get<std::string>();
    const Json& v = (*values)[i];
    if (!v.is_null()) {
      if (!v.is_number()) throw Error(ErrorKind::SchemaError, "logprob is not a number");
      const double value = v.get<double>() * scale;
      if (!std::isfinite(value) || value > 0.0) {
        throw Error(ErrorKind::InvariantViolation,
                    "item '" + id + "': logprob at token " + std::to_string(i) +
                        " must be finite and <= 0");
      }
      t.logprob = value;
    }
    rec.tokens.push_back(std::move(t));
  }
  return {id, std::move(rec)};
}

Json dump_record_to_json(const std::string& id, const DumpRecord& record) {
  Json tokens = Json::array();
  Json values = Json::array();
  for (const auto& t : record.tokens) {
    tokens.push_back(t.token);
    values.push_back(t.logprob ? Json(*t.logprob) : Json(nullptr));
  }
  return Json{{"id", id}, {"model", record.model}, {"tokens", tokens}, {"logprobs", values}};
}

LogprobDump load_dump(const fs::path& path) {
  auto in = open_input(path);
  LogprobDump dump;
  for_each_record(in, [&](Json&& j, std::size_t) {
    auto [id, rec] = parse_dump_record(j);
    if (!dump.records.emplace(id, std::move(rec)).second) {
      throw Error(ErrorKind::DuplicateId, "duplicate dump record '" + id + "'");
    }
  });
  return dump;
}

void write_dump(const LogprobDump& dump, const fs::path& path) {
  auto out = open_output(path);
  for (const auto& [id, rec] : dump.records) out << dump_record_to_json(id, rec).dump() << '\n';
  finish(out, path);
}

CompletionsDump load_completions_dump(const fs::path& path) {
  auto in = open_input(path);
  CompletionsDump dump;
  for_each_record(in, [&](Json&& j, std::size_t) {
    const std::string id = j.at("id").get<std::string>();
    CompletionRecord rec;
    rec.model = j.value("model", "");
    rec.greedy = j.at("greedy").get<std::string>();
    rec.samples = j.at("samples").get<std::vector<std::string>>();
    if (!dump.records.emplace(id, std::move(rec)).second) {
      throw Error(ErrorKind::DuplicateId, "duplicate completions record '" + id + "'");
    }
  });
  return dump;
}

void write_completions_dump(const CompletionsDump& dump, const fs::path& path) {
  auto out = open_output(path);
  for (const auto& [id, rec] : dump.records) {
    Json j{{"id", id}, {"model", rec.model}, {"greedy", rec.greedy}, {"samples", rec.samples}};
    out << j.dump() << '\n';
  }
  finish(out, path);
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, end);
}

namespace {
std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}
}  // namespace

void write_curves(std::span<const SafeScoreResult> results, std::ostream& out) {
  if (results.empty()) throw Error(ErrorKind::IoError, "no results to export");
  out << "item_id,position,logprob,cumulative_logprob,sorted_normalized_logprob,sorted_cumulative\n";
  for (const auto& r : results) {
    const auto id = csv_field(r.item_id);
    for (std::size_t i = 0; i < r.n_tokens; ++i) {
      out << id << ',' << i << ',' << format_double(r.logprobs[i]) << ','
          << format_double(r.cumulative_curve[i]) << ',' << format_double(r.sorted_normalized[i])
          << ',' << format_double(r.sorted_cumulative_curve[i]) << '\n';
    }
  }
}

void write_curves(std::span<const SafeScoreResult> results, const fs::path& path) {
  auto out = open_output(path);
  write_curves(results, out);
  finish(out, path);
}

}  // namespace logprober
