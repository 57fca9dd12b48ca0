#include <benchmark/benchmark.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "vizpipe/bench/harness.hpp"
#include "vizpipe/fixtures/synthetic_model.hpp"
#include "vizpipe/llm/cassette.hpp"
#include "vizpipe/summary/summarizer.hpp"
#include "vizpipe/viz/filters.hpp"
#include "vizpipe/viz/scaffold.hpp"

using namespace vizpipe;
namespace fs = std::filesystem;

namespace {

const fs::path kCorpus = fs::path(VIZPIPE_SOURCE_DIR) / "data" / "corpus";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string python_program(int lines) {
  std::string code = "import matplotlib.pyplot as plt\n\ndef plot(data):\n";
  for (int i = 0; i < lines; ++i)
    code += "    ax.bar( data['origin'] ,data[ 'mpg' ] )   # note " + std::to_string(i) + "\n\n";
  return code + "    return plt\n";
}

void BM_NormalizePython(benchmark::State& state) {
  const auto code = python_program(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(viz::normalize_code(code, "python"));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * code.size()));
}
BENCHMARK(BM_NormalizePython)->Arg(10)->Arg(100)->Arg(1000);

void BM_Fingerprint(benchmark::State& state) {
  llm::PromptRequest r;
  r.system = "You are a visualization assistant.";
  r.messages.push_back({"user", std::string(static_cast<std::size_t>(state.range(0)), 'x')});
  r.metadata = {{"task", "codegen"}, {"dataset", "cars"}, {"grammar", "vegalite"}};
  const llm::GenerationConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(llm::fingerprint(r, config));
}
BENCHMARK(BM_Fingerprint)->Arg(256)->Arg(4096)->Arg(65536);

void BM_BaseSummary(benchmark::State& state) {
  const auto original = slurp(kCorpus / "cars.csv");
  const auto header_end = original.find('\n') + 1;
  std::string csv = original.substr(0, header_end);
  for (int i = 0; i < state.range(0); ++i) csv += original.substr(header_end);
  for (auto _ : state) {
    const auto table = summary::parse_csv(csv, "cars");
    benchmark::DoNotOptimize(summary::build_base_summary(table));
  }
  state.SetItemsProcessed(state.iterations() * 40 * state.range(0));  // 40 rows per copy
}
BENCHMARK(BM_BaseSummary)->Arg(1)->Arg(25)->Arg(250)->Unit(benchmark::kMicrosecond);

void BM_RenderSummary(benchmark::State& state) {
  const auto s = summary::build_base_summary(summary::ingest(kCorpus / "weather.csv"));
  for (auto _ : state) benchmark::DoNotOptimize(summary::render_summary(s, summary::SummaryCondition::NoEnrich));
}
BENCHMARK(BM_RenderSummary);

void BM_VegaliteSchemaValidation(benchmark::State& state) {
  const auto& schema = *viz::ScaffoldLibrary::bundled().get("vegalite").schema;
  const auto spec = nlohmann::json::parse(R"({
    "$schema": "https://vega.github.io/schema/vega-lite/v5.json",
    "data": {"url": "cars.csv"},
    "transform": [{"filter": "datum.mpg > 20"}],
    "mark": {"type": "bar", "color": "orange"},
    "encoding": {
      "x": {"field": "origin", "type": "nominal", "sort": "-y"},
      "y": {"field": "mpg", "type": "quantitative", "aggregate": "mean"},
      "tooltip": [{"field": "origin"}, {"field": "mpg", "aggregate": "mean"}]
    },
    "title": "Average mpg by origin"})");
  for (auto _ : state) benchmark::DoNotOptimize(schema.validate(spec));
}
BENCHMARK(BM_VegaliteSchemaValidation);

void BM_SelectByConsistency(benchmark::State& state) {
  std::mt19937 rng(3);
  std::vector<viz::CandidateProgram> candidates;
  for (int i = 0; i < state.range(0); ++i) {
    viz::CandidateProgram c;
    c.candidate_index = i;
    c.status = viz::CandidateStatus::CompiledOk;
    c.assembled_code = python_program(20 + static_cast<int>(rng() % 3));
    candidates.push_back(c);
  }
  for (auto _ : state) benchmark::DoNotOptimize(viz::select_by_consistency(candidates, "python"));
}
BENCHMARK(BM_SelectByConsistency)->Arg(3)->Arg(10)->Arg(50);

// Full ablation replay: 100 declarative runs plus six evaluation calls each.
void BM_AblationReplay(benchmark::State& state) {
  bench::BenchmarkConfig config;
  for (const auto* n : {"cars", "gapminder", "penguins", "stocks", "weather"})
    config.datasets.push_back(kCorpus / (std::string(n) + ".csv"));
  config.compute_sevq = true;
  const auto cassette = llm::Cassette::load(fs::path(VIZPIPE_SOURCE_DIR) / "data" / "cassettes" / "ablation.json");
  for (auto _ : state) {
    llm::ReplayProvider provider(cassette);
    benchmark::DoNotOptimize(bench::run_benchmark(config, provider));
  }
}
BENCHMARK(BM_AblationReplay)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
