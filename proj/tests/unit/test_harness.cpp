#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "test_support.hpp"
#include "vizpipe/error.hpp"
#include "vizpipe/bench/harness.hpp"
#include "vizpipe/fixtures/synthetic_model.hpp"
#include "vizpipe/llm/cassette.hpp"

using namespace vizpipe;
using namespace vizpipe::bench;
namespace tu = vizpipe::testutil;

namespace {

const std::vector<std::string> kNames = {"cars", "gapminder", "penguins", "stocks", "weather"};

std::vector<std::filesystem::path> corpus_paths() {
  std::vector<std::filesystem::path> out;
  for (const auto& n : kNames) out.push_back(tu::corpus(n + ".csv"));
  return out;
}

std::vector<std::string> condition_names() {
  std::vector<std::string> out;
  for (auto c : summary::all_conditions()) out.push_back(summary::to_string(c));
  return out;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no vizpipe::Error thrown";
  return ErrorCode::ConfigError;
}

BenchmarkConfig ablation_config() {
  BenchmarkConfig c;
  c.datasets = corpus_paths();
  c.compute_sevq = true;
  return c;
}

}  // namespace

TEST(Ver, FormulaOnAPropertySweep) {
  std::mt19937_64 rng(8);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 200000; ++i) {
    const long long t = 1 + static_cast<long long>(rng() % 10000);
    const long long e = static_cast<long long>(rng() % static_cast<std::uint64_t>(t + 1));
    EXPECT_NEAR(compute_ver(e, t), 100.0 * static_cast<double>(e) / static_cast<double>(t), 1e-9);
  }
  for (long long t = 1; t <= 10000; t += 37) {
    EXPECT_EQ(compute_ver(0, t), 0.0);
    EXPECT_EQ(compute_ver(t, t), 100.0);
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 1.0);
}

TEST(Ver, RejectsInvalidCounts) {
  EXPECT_EQ(code_of([] { compute_ver(0, 0); }), ErrorCode::DivisionByZeroTotal);
  EXPECT_EQ(code_of([] { compute_ver(-1, 5); }), ErrorCode::PreconditionViolation);
  EXPECT_EQ(code_of([] { compute_ver(6, 5); }), ErrorCode::PreconditionViolation);
}

TEST(Aggregate, CellsFollowTheRequestedOrder) {
  std::vector<RunOutcome> outcomes;
  outcomes.push_back({"b", "vegalite", summary::SummaryCondition::Enrich, 0, 0, viz::CandidateStatus::CompileError, {}});
  outcomes.push_back({"a", "vegalite", summary::SummaryCondition::Enrich, 0, 0, viz::CandidateStatus::CompiledOk, 6.0});
  outcomes.push_back({"a", "vegalite", summary::SummaryCondition::Enrich, 1, 0, viz::CandidateStatus::CompiledOk, 8.0});
  const auto r = aggregate(outcomes, {"a", "b"}, {"vegalite"},
                           {summary::SummaryCondition::Enrich, summary::SummaryCondition::Schema});
  EXPECT_EQ(r.T, 3);
  EXPECT_EQ(r.E, 1);
  EXPECT_NEAR(r.ver, 100.0 / 3.0, 1e-9);
  ASSERT_EQ(r.cells.size(), 4u);
  EXPECT_EQ(r.cells[0].dataset, "a");
  EXPECT_EQ(r.cells[0].T, 2);
  EXPECT_DOUBLE_EQ(*r.cells[0].mean_sevq, 7.0);
  EXPECT_EQ(r.cells[1].condition, summary::SummaryCondition::Schema);
  EXPECT_EQ(r.cells[1].T, 0);
  EXPECT_EQ(r.cells[2].ver, 100.0);
  ASSERT_EQ(r.breakdown.size(), 2u);
  EXPECT_EQ(r.breakdown[0].T, 3);
  EXPECT_EQ(code_of([] { aggregate({}, {"a"}, {"vegalite"}, {summary::SummaryCondition::Enrich}); }),
            ErrorCode::DivisionByZeroTotal);
}

TEST(Config, Validation) {
  BenchmarkConfig c;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::ConfigError);  // no datasets
  c.datasets = corpus_paths();
  EXPECT_NO_THROW(c.validate());
  c.grammars.clear();
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::ConfigError);
  c = BenchmarkConfig{};
  c.datasets = corpus_paths();
  c.n_goals_per_dataset = 0;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::ConfigError);
}

class FaultInjection : public ::testing::TestWithParam<int> {};

TEST_P(FaultInjection, VerEqualsTheNumberOfBrokenRuns) {
  const int k = GetParam();
  auto model = fixtures::SyntheticModel::for_corpus(tu::source_dir() / "data" / "corpus",
                                                    fixtures::exact_faults(kNames, condition_names(), 5, k));
  BenchmarkConfig config;
  config.datasets = corpus_paths();
  const auto start = std::chrono::steady_clock::now();
  const auto report = run_benchmark(config, *model.provider());
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(report.T, 100);
  EXPECT_EQ(report.E, k);
  EXPECT_DOUBLE_EQ(report.ver, static_cast<double>(k));
  EXPECT_TRUE(report.skipped.empty());
  EXPECT_LT(elapsed, 60.0);
}

INSTANTIATE_TEST_SUITE_P(K, FaultInjection, ::testing::Values(0, 3, 10));

TEST(FaultSchedule, ExactFaultsBreaksExactlyK) {
  for (int k : {0, 1, 7, 100}) {
    const auto f = fixtures::exact_faults(kNames, condition_names(), 5, k);
    int broken = 0;
    for (const auto& d : kNames)
      for (const auto& c : condition_names())
        for (int g = 0; g < 5; ++g) broken += f(d, c, g, "vegalite") != fixtures::Fault::None;
    EXPECT_EQ(broken, k);
  }
}

TEST(Ablation, ReplayedMatrixHasTwentyCellsAndIsDeterministic) {
  const auto cassette = llm::Cassette::load(tu::cassette("ablation.json"));
  llm::ReplayProvider a(cassette);
  llm::ReplayProvider b(cassette);
  const auto first = run_benchmark(ablation_config(), a);
  const auto second = run_benchmark(ablation_config(), b);
  EXPECT_EQ(first.cells.size(), 20u);
  EXPECT_EQ(first.breakdown.size(), 4u);
  EXPECT_EQ(emit_report(first, ReportFormat::Json), emit_report(second, ReportFormat::Json));
  EXPECT_EQ(first.T, 100);
  for (const auto& c : first.cells) EXPECT_EQ(c.T, 5) << c.dataset << "/" << summary::to_string(c.condition);

  // Less context about the data, more errors.
  std::map<summary::SummaryCondition, double> by;
  for (const auto& c : first.breakdown) by[c.condition] = c.ver;
  using SC = summary::SummaryCondition;
  EXPECT_LE(by[SC::Enrich], by[SC::NoEnrich]);
  EXPECT_LT(by[SC::NoEnrich], by[SC::Schema]);
  EXPECT_LT(by[SC::Schema], by[SC::NoSummary]);
  ASSERT_TRUE(first.mean_sevq.has_value());
  EXPECT_GE(*first.mean_sevq, 1.0);
  EXPECT_LE(*first.mean_sevq, 10.0);
}

TEST(Ablation, ProviderErrorsPropagate) {
  EXPECT_EQ(code_of([] {
              llm::ReplayProvider p(llm::Cassette{});
              run_benchmark(ablation_config(), p);
            }),
            ErrorCode::CassetteMiss);
}

TEST(Reports, FormatsAndJsonRoundTrip) {
  const auto cassette = llm::Cassette::load(tu::cassette("ablation.json"));
  llm::ReplayProvider p(cassette);
  const auto r = run_benchmark(ablation_config(), p);
  EXPECT_EQ(nlohmann::json::parse(emit_report(r, ReportFormat::Json)).get<MetricsReport>(), r);
  const auto csv = emit_report(r, ReportFormat::Csv);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 25);  // header, 4 condition rows, 20 cells
  EXPECT_NE(csv.find("\ncars,vegalite,no_summary,"), std::string::npos);
  const auto md = emit_report(r, ReportFormat::MarkdownTable);
  EXPECT_NE(md.find("| cars"), std::string::npos);
  EXPECT_EQ(report_format_from_string("markdown"), ReportFormat::MarkdownTable);
  EXPECT_THROW(report_format_from_string("xml"), Error);
}
