#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>

#include "service_support.hpp"
#include "vizpipe/text.hpp"

using namespace vizpipe;
namespace tu = vizpipe::testutil;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::string& args, const tu::TempDir& dir) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const auto cmd = fmt::format("'{}' {} >'{}' 2>'{}' </dev/null", VIZPIPE_CLI_BINARY, args, out.string(), err.string());
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = tu::read_file(out);
  r.err = tu::read_file(err);
  return r;
}

std::string replay(const std::string& cassette_name) {
  return fmt::format("--provider replay --cassette '{}'", tu::cassette(cassette_name).string());
}

}  // namespace

TEST(Cli, SummarizePrintsTheEnrichedSummary) {
  tu::TempDir dir("cli");
  const auto r = run_cli(replay("cars.json") + " summarize --data '" + tu::corpus("cars.csv").string() + "'", dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["enrichment_status"], "llm_enriched");
  EXPECT_EQ(j["fields"].size(), 9u);
}

TEST(Cli, SchemaSummaryNeedsNoModel) {
  tu::TempDir dir("cli");
  const auto r = run_cli("--provider live --model none summarize --condition schema --data '" +
                             tu::corpus("penguins.csv").string() + "'",
                         dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["enrichment_status"], "base");
}

TEST(Cli, VizReplaysARecordedChart) {
  tu::TempDir dir("cli");
  const auto result = dir / "viz.json";
  const auto r = run_cli(fmt::format("{} --work '{}' --out '{}' viz --data '{}' --goal-index 0 --n-goals 5",
                                     replay("cars.json"), (dir / "work").string(), result.string(),
                                     tu::corpus("cars.csv").string()),
                         dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto j = nlohmann::json::parse(tu::read_file(result));
  EXPECT_EQ(j["candidate"]["status"], "compiled_ok");
  EXPECT_EQ(j["grammar_id"], "vegalite");
}

TEST(Cli, BenchmarkReplaysTheAblation) {
  tu::TempDir dir("cli");
  const auto r = run_cli(replay("ablation.json") + " benchmark --sevq --format csv --data '" +
                             (tu::source_dir() / "data/corpus").string() + "'",
                         dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const auto lines = text::split_lines(text::trim(r.out));
  ASSERT_EQ(lines.size(), 25u);
  EXPECT_EQ(lines[0], "dataset,grammar,condition,E,T,ver,mean_sevq");
  EXPECT_EQ(lines[2].rfind(",vegalite,enrich,0,25,0,", 0), 0u);
}

TEST(Cli, ErrorsMapToDistinctExitCodes) {
  tu::TempDir dir("cli");
  EXPECT_EQ(run_cli("", dir).exit_code, 2);
  EXPECT_EQ(run_cli("viz --data", dir).exit_code, 2);
  EXPECT_EQ(run_cli("summarize --data /no/such/file.csv", dir).exit_code, 2);

  auto r = run_cli(replay("cars.json") + " viz --data '" + tu::corpus("penguins.csv").string() + "'", dir);
  EXPECT_EQ(r.exit_code, exit_code_for(ErrorCode::CassetteMiss));
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"]["class"], "CassetteMiss");

  tu::write_file(dir / "bad.csv", "a,b\n1\n");
  r = run_cli("summarize --condition schema --data '" + (dir / "bad.csv").string() + "'", dir);
  EXPECT_EQ(r.exit_code, exit_code_for(ErrorCode::ParseError));

  r = run_cli("--provider replay summarize --data '" + tu::corpus("cars.csv").string() + "'", dir);
  EXPECT_EQ(r.exit_code, exit_code_for(ErrorCode::ConfigError));
}
