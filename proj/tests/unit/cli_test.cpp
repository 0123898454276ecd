// SPDX-License-Identifier: Apache-2.0

#include "logprober/cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "logprober/harness.hpp"
#include "mock_server.hpp"

using namespace logprober;
using logprober::testing::fixture_path;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("logprober-cli-" +
            std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, ScoreFromDumpSucceeds) {
  const auto r = cli({"score", "--corpus", "embedded:crt", "--dump", fixture_path("crt_dump.jsonl"),
                      "--out", path("r.json")});
  EXPECT_EQ(r.code, 0) << r.err;
  const auto report = read_report(path("r.json"));
  EXPECT_EQ(report.items.size(), 14u);
  EXPECT_EQ(report.logprober_config->threshold, 1.0);
  EXPECT_EQ(report.run.at("command"), "score");
}

TEST_F(CliTest, ScoreWithoutSourceIsUsageError) {
  EXPECT_EQ(cli({"score", "--corpus", "embedded:crt", "--out", path("r.json")}).code, 2);
  EXPECT_FALSE(fs::exists(path("r.json")));
}

TEST_F(CliTest, ScoreWithBothSourcesIsUsageError) {
  EXPECT_EQ(cli({"score", "--corpus", "embedded:crt", "--dump", fixture_path("crt_dump.jsonl"),
                 "--endpoint", path("e.toml"), "--out", path("r.json")})
                .code,
            2);
}

TEST_F(CliTest, UnknownFlagIsUsageError) {
  EXPECT_EQ(cli({"score", "--frobnicate"}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
}

TEST_F(CliTest, ThresholdFlagAndConfigPrecedence) {
  std::ofstream(path("run.toml")) << "[logprober]\nthreshold = 5.0\n";
  auto r = cli({"score", "--corpus", "embedded:crt", "--dump", fixture_path("crt_dump.jsonl"),
                "--config", path("run.toml"), "--out", path("a.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_report(path("a.json")).logprober_config->threshold, 5.0);
  r = cli({"score", "--corpus", "embedded:crt", "--dump", fixture_path("crt_dump.jsonl"),
           "--config", path("run.toml"), "--threshold", "0.5", "--out", path("b.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_report(path("b.json")).logprober_config->threshold, 0.5);
}

TEST_F(CliTest, ZeroSamplesIsUsageError) {
  const auto r = cli({"cdd", "--corpus", "embedded:crt", "--completions",
                      fixture_path("crt_completions.jsonl"), "--samples", "0", "--out",
                      path("c.json")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("InvalidConfig"), std::string::npos) << r.err;
}

TEST_F(CliTest, CddFromCompletionsSucceeds) {
  const auto r = cli({"cdd", "--corpus", "embedded:crt", "--completions",
                      fixture_path("crt_completions.jsonl"), "--out", path("c.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_report(path("c.json")).cdd_config->num_samples, 50);
}

TEST_F(CliTest, TooFewRecordedSamplesGiveItemErrors) {
  const auto r = cli({"cdd", "--corpus", "embedded:crt", "--completions",
                      fixture_path("crt_completions.jsonl"), "--samples", "80", "--out",
                      path("c.json")});
  EXPECT_EQ(r.code, 1);
  const auto report = read_report(path("c.json"));
  ASSERT_EQ(report.errors.size(), 14u);
  EXPECT_EQ(report.errors[0].kind, ErrorKind::PartialSamples);
  EXPECT_EQ(report.errors[0].obtained, 50u);
}

TEST_F(CliTest, UnreachableEndpointGivesTransportErrors) {
  std::ofstream(path("e.toml")) << "base_url = \"http://127.0.0.1:1\"\nmodel = \"m\"\n"
                                   "retries = 0\ntimeout_s = 0.5\ncache_dir = \"cache\"\n";
  const auto r = cli({"score", "--corpus", "embedded:oldcrt", "--endpoint", path("e.toml"), "--out",
                      path("r.json")});
  EXPECT_EQ(r.code, 1);
  const auto report = read_report(path("r.json"));
  ASSERT_EQ(report.errors.size(), 7u);
  for (const auto& e : report.errors) EXPECT_EQ(e.kind, ErrorKind::TransportError);
}

TEST_F(CliTest, MetricsOnUnlabelledItemsIsUsageError) {
  {
    std::ofstream items(path("items.jsonl"));
    items << R"({"id":"oldcrt-1","question":"anything"})" << '\n';
  }
  ASSERT_EQ(cli({"score", "--corpus", path("items.jsonl"), "--dump",
                 fixture_path("crt_dump.jsonl"), "--out", path("r.json")})
                .code,
            0);
  EXPECT_EQ(cli({"report", "--input", path("r.json"), "--metrics", "--out", path("m.json")}).code, 2);
  EXPECT_EQ(cli({"report", "--input", path("r.json"), "--out", path("m.json")}).code, 0);
}

TEST_F(CliTest, ReportMergesAndTests) {
  ASSERT_EQ(cli({"score", "--corpus", "embedded:crt", "--dump", fixture_path("crt_dump.jsonl"),
                 "--out", path("s.json")})
                .code,
            0);
  ASSERT_EQ(cli({"cdd", "--corpus", "embedded:crt", "--completions",
                 fixture_path("crt_completions.jsonl"), "--out", path("c.json")})
                .code,
            0);
  const auto r = cli({"report", "--input", path("s.json"), "--input", path("c.json"), "--metrics",
                      "--ttest", "split:oldcrt", "split:newcrt", "--out", path("r.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = read_report(path("r.json"));
  EXPECT_EQ(report.interpretations.size(), 14u);
  ASSERT_TRUE(report.ttest);
  EXPECT_LT(report.ttest->result.t, 0.0);
  EXPECT_EQ(report.metrics.count("logprober"), 1u);
  EXPECT_EQ(report.metrics.count("cdd"), 1u);

  EXPECT_EQ(cli({"report", "--input", path("s.json"), "--ttest", "split:oldcrt", "split:nothing",
                 "--out", path("x.json")})
                .code,
            2);
}

TEST_F(CliTest, TimestampOnlyWhenRequested) {
  ::unsetenv("SOURCE_DATE_EPOCH");
  ASSERT_EQ(cli({"score", "--corpus", "embedded:crt", "--dump", fixture_path("crt_dump.jsonl"),
                 "--out", path("a.json")})
                .code,
            0);
  EXPECT_FALSE(read_report(path("a.json")).run.contains("timestamp"));
  ASSERT_EQ(cli({"score", "--corpus", "embedded:crt", "--dump", fixture_path("crt_dump.jsonl"),
                 "--timestamp", "2024-01-01T00:00:00Z", "--out", path("b.json")})
                .code,
            0);
  EXPECT_EQ(read_report(path("b.json")).run.at("timestamp"), "2024-01-01T00:00:00Z");
}

TEST_F(CliTest, CurvesExport) {
  ASSERT_EQ(cli({"score", "--corpus", "embedded:crt", "--dump", fixture_path("crt_dump.jsonl"),
                 "--curves", path("curves.csv"), "--out", path("a.json")})
                .code,
            0);
  const auto text = read_file(path("curves.csv"));
  EXPECT_EQ(text.rfind("item_id,position,", 0), 0u);
}

TEST(CliHelp, MatchesGoldenFiles) {
  const std::string golden_dir = LOGPROBER_GOLDEN_DIR;
  const std::vector<std::pair<std::vector<std::string>, std::string>> cases{
      {{"--help"}, "help.txt"},
      {{"score", "--help"}, "score_help.txt"},
      {{"cdd", "--help"}, "cdd_help.txt"},
      {{"report", "--help"}, "report_help.txt"},
  };
  for (const auto& [args, file] : cases) {
    const auto r = cli(args);
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, read_file(golden_dir + "/" + file)) << file;
  }
}

TEST(CliHelp, ApiKeyIsNotAFlag) {
  const auto r = cli({"score", "--help"});
  EXPECT_EQ(r.out.find("api-key"), std::string::npos);
  EXPECT_EQ(r.out.find("api_key"), std::string::npos);
}
