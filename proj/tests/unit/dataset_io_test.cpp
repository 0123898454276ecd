// SPDX-License-Identifier: Apache-2.0

#include "logprober/dataset_io.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "logprober/errors.hpp"
#include "mock_server.hpp"

using namespace logprober;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("logprober-test-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "-" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream(p, std::ios::binary) << content;
}

template <typename Fn>
ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::IoError;
}

}  // namespace

TEST(LoadItems, TwoLineFile) {
  TempDir dir;
  write_file(dir / "items.jsonl",
             "{\"id\":\"a\",\"question\":\"Q1?\"}\n\n{\"id\":\"b\",\"question\":\"Q2?\",\"label\":\"clean\"}\n");
  const auto corpus = load_items(dir / "items.jsonl");
  ASSERT_EQ(corpus.items.size(), 2u);
  EXPECT_EQ(corpus.items[1].label, Label::Clean);
  EXPECT_EQ(corpus.name, "items");
}

TEST(LoadItems, MissingQuestionReportsLine) {
  TempDir dir;
  write_file(dir / "items.jsonl", "{\"id\":\"a\"}\n");
  try {
    load_items(dir / "items.jsonl");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(LoadItems, RepeatedIdIsDuplicateId) {
  TempDir dir;
  write_file(dir / "items.jsonl",
             "{\"id\":\"a\",\"question\":\"Q1?\"}\n{\"id\":\"a\",\"question\":\"Q2?\"}\n");
  EXPECT_EQ(kind_of([&] { load_items(dir / "items.jsonl"); }), ErrorKind::DuplicateId);
}

TEST(LoadItems, BlankQuestionReportsLine) {
  TempDir dir;
  write_file(dir / "items.jsonl", "{\"id\":\"a\",\"question\":\"ok\"}\n{\"id\":\"b\",\"question\":\"  \"}\n");
  try {
    load_items(dir / "items.jsonl");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(LoadItems, MissingFileIsIoError) {
  EXPECT_EQ(kind_of([] { load_items("/nonexistent/items.jsonl"); }), ErrorKind::IoError);
}

TEST(ItemFormat, RoundTripPreservesUnknownFieldsAndCurrency) {
  TempDir dir;
  const std::string line =
      R"({"answer":"£0.05","id":"bb","label":"contaminated","meta":{"row":3},"question":"A bat and a ball cost £1.10 in total. 210€ $1000","split":"A"})";
  write_file(dir / "in.jsonl", line + "\n");
  const auto corpus = load_items(dir / "in.jsonl");
  EXPECT_EQ(corpus.items[0].extra.at("meta").at("row"), 3);
  write_items(corpus, dir / "out.jsonl");
  std::ifstream in(dir / "out.jsonl", std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), line + "\n");
  EXPECT_EQ(load_items(dir / "out.jsonl").items, corpus.items);
}

TEST(ItemFormat, StreamsMillionLineFile) {
  TempDir dir;
  {
    std::ofstream out(dir / "big.jsonl", std::ios::binary);
    for (int i = 0; i < 1'000'000; ++i) {
      out << "{\"id\":\"i" << i << "\",\"question\":\"What is " << i << "?\"}\n";
    }
  }
  std::ifstream in(dir / "big.jsonl", std::ios::binary);
  std::size_t count = 0;
  std::size_t last_line = 0;
  for_each_item(in, [&](QaItem&& item, std::size_t line) {
    ++count;
    last_line = line;
    ASSERT_FALSE(item.question.empty());
  });
  EXPECT_EQ(count, 1'000'000u);
  EXPECT_EQ(last_line, 1'000'000u);
}

TEST(EmbeddedCrt, MatchesPublishedItems) {
  const auto [old_crt, new_crt] = embedded_crt();
  ASSERT_EQ(old_crt.items.size(), 7u);
  ASSERT_EQ(new_crt.items.size(), 7u);
  EXPECT_EQ(old_crt.items[0].question.rfind("A bat and a ball cost £1.10 in total.", 0), 0u);
  EXPECT_EQ(new_crt.items[0].question.rfind("A scarf costs 210€ more than a hat.", 0), 0u);
  EXPECT_NE(new_crt.items[5].question.find("$1000"), std::string::npos);
  for (const auto& item : old_crt.items) {
    EXPECT_EQ(item.label, Label::Contaminated);
    EXPECT_EQ(item.split, "oldcrt");
  }
  for (const auto& item : new_crt.items) {
    EXPECT_EQ(item.label, Label::Clean);
    EXPECT_EQ(item.split, "newcrt");
  }
}

TEST(EmbeddedCrt, FixtureFileMatchesEmbeddedCorpus) {
  const auto from_file = load_items(logprober::testing::fixture_path("crt_items.jsonl"));
  const auto embedded = resolve_corpus("embedded:crt");
  EXPECT_EQ(from_file.items, embedded.items);
}

TEST(ResolveCorpus, UnknownEmbeddedName) {
  EXPECT_EQ(kind_of([] { resolve_corpus("embedded:mmlu"); }), ErrorKind::InvalidConfig);
}

TEST(LoadDump, NullFirstEntryIsValid) {
  TempDir dir;
  write_file(dir / "d.jsonl",
             R"({"id":"a","model":"m","tokens":["x"," y"," z"],"logprobs":[null,-0.2,-0.1]})" "\n");
  const auto dump = load_dump(dir / "d.jsonl");
  const auto& rec = dump.records.at("a");
  ASSERT_EQ(rec.tokens.size(), 3u);
  EXPECT_FALSE(rec.tokens[0].logprob);
  EXPECT_EQ(extract_logprobs(rec.tokens, {}).size(), 2u);
}

TEST(LoadDump, PositiveLogprobIsInvariantViolation) {
  TempDir dir;
  write_file(dir / "d.jsonl", R"({"id":"a","model":"m","tokens":["x","y"],"logprobs":[null,0.1]})" "\n");
  EXPECT_EQ(kind_of([&] { load_dump(dir / "d.jsonl"); }), ErrorKind::InvariantViolation);
}

TEST(LoadDump, LengthMismatchIsInvariantViolation) {
  TempDir dir;
  write_file(dir / "d.jsonl", R"({"id":"a","model":"m","tokens":["x","y"],"logprobs":[null]})" "\n");
  EXPECT_EQ(kind_of([&] { load_dump(dir / "d.jsonl"); }), ErrorKind::InvariantViolation);
}

TEST(LoadDump, AcceptsWireShapeAndConvertsBase) {
  TempDir dir;
  write_file(dir / "d.jsonl",
             R"({"id":"a","model":"m","logprob_base":10,"logprobs":{"tokens":["x","y"],"token_logprobs":[null,-1.0]}})" "\n");
  const auto dump = load_dump(dir / "d.jsonl");
  EXPECT_NEAR(*dump.records.at("a").tokens[1].logprob, -std::log(10.0), 1e-15);
}

TEST(LoadDump, RoundTripsThroughWriter) {
  TempDir dir;
  LogprobDump dump;
  dump.records["q1"] = DumpRecord{"m", {{0, "£", std::nullopt}, {1, "1.10", -0.5}}};
  dump.records["q2"] = DumpRecord{"m", {{0, "€", -2.0}}};
  write_dump(dump, dir / "d.jsonl");
  EXPECT_EQ(load_dump(dir / "d.jsonl").records, dump.records);
}

TEST(CompletionsDump, RoundTrips) {
  TempDir dir;
  CompletionsDump dump;
  dump.records["q1"] = CompletionRecord{"m", "B", {"B", "C"}};
  write_completions_dump(dump, dir / "c.jsonl");
  EXPECT_EQ(load_completions_dump(dir / "c.jsonl").records, dump.records);
}

TEST(WriteCurves, OneRowPerScoredToken) {
  auto r = safe_score(std::vector<double>{-2.0, -0.1, -3.0}, {});
  r.item_id = "a,b";
  std::ostringstream out;
  write_curves(std::span(&r, 1), out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "item_id,position,logprob,cumulative_logprob,sorted_normalized_logprob,sorted_cumulative");
  std::vector<std::string> rows;
  while (std::getline(in, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].rfind("\"a,b\",0,-2,-2,-1,-1", 0), 0u);
}

TEST(WriteCurves, FileReproducesIntegralAndMonotoneCumulative) {
  // Independent recomputation from the exported text.
  std::vector<SafeScoreResult> results;
  for (auto lp : {std::vector<double>{-0.3, -1.7, -0.01, -2.2}, std::vector<double>{-5.0, -0.5}}) {
    results.push_back(safe_score(lp, {}));
    results.back().item_id = "i" + std::to_string(results.size());
  }
  std::ostringstream out;
  write_curves(results, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  std::map<std::string, double> area;
  std::map<std::string, double> last_cumulative;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::stringstream ls(line);
    std::string col;
    while (std::getline(ls, col, ',')) cols.push_back(col);
    ASSERT_EQ(cols.size(), 6u);
    const double cumulative = std::stod(cols[3]);
    if (last_cumulative.contains(cols[0])) {
      EXPECT_LE(cumulative, last_cumulative[cols[0]]);
    }
    last_cumulative[cols[0]] = cumulative;
    area[cols[0]] += std::stod(cols[5]);
  }
  for (const auto& r : results) EXPECT_NEAR(area.at(r.item_id), r.integral, 1e-9);
}

TEST(WriteCurves, EmptyInputIsAnError) {
  std::ostringstream out;
  EXPECT_THROW(write_curves(std::span<const SafeScoreResult>{}, out), Error);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.1, -27.631021115928547, 1e-12, -0.0, 3.0}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.25), "0.25");
}
