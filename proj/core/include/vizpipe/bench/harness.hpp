#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizpipe/llm/provider.hpp"
#include "vizpipe/summary/summarizer.hpp"
#include "vizpipe/viz/sandbox.hpp"

namespace vizpipe::bench {

/// Visualization error rate in percent: E / T * 100. Throws
/// DivisionByZeroTotal when T < 1 and PreconditionViolation unless
/// 0 <= E <= T.
double compute_ver(long long errors, long long total);

struct BenchmarkConfig {
  std::vector<std::filesystem::path> datasets;
  int n_goals_per_dataset = 5;
  int visualizations_per_goal = 1;
  std::vector<std::string> grammars = {"vegalite"};
  std::vector<summary::SummaryCondition> conditions = summary::all_conditions();
  llm::GenerationConfig generation = llm::GenerationConfig::benchmark_preset();
  bool single_try = true;
  // Score every compiled visualization on the six dimensions (6 extra
  // calls per run).
  bool compute_sevq = false;
  viz::ExecutionLimits limits;
  std::uint64_t sample_seed = 0;

  /// Throws ConfigError.
  void validate() const;
};

struct RunOutcome {
  std::string dataset;
  std::string grammar;
  summary::SummaryCondition condition = summary::SummaryCondition::Enrich;
  int goal_index = 0;
  int visualization_index = 0;
  viz::CandidateStatus status = viz::CandidateStatus::CompiledOk;
  std::optional<double> sevq;
  bool operator==(const RunOutcome&) const = default;
};

struct CellReport {
  std::string dataset;  // empty for grammar x condition cells
  std::string grammar;
  summary::SummaryCondition condition = summary::SummaryCondition::Enrich;
  long long E = 0;
  long long T = 0;
  double ver = 0.0;
  std::optional<double> mean_sevq;
  bool operator==(const CellReport&) const = default;
};

/// Dataset whose goal generation failed; it contributes no outcomes.
struct SkippedDataset {
  std::string dataset;
  summary::SummaryCondition condition = summary::SummaryCondition::Enrich;
  std::string reason;
  bool operator==(const SkippedDataset&) const = default;
};

struct MetricsReport {
  long long E = 0;
  long long T = 0;
  double ver = 0.0;
  std::optional<double> mean_sevq;
  std::vector<CellReport> breakdown;  // grammar x condition
  std::vector<CellReport> cells;      // dataset x grammar x condition
  std::vector<RunOutcome> outcomes;
  std::vector<SkippedDataset> skipped;
  bool operator==(const MetricsReport&) const = default;
};

/// Pure reduction of outcomes into a report. Cells follow the order of
/// `datasets`, `grammars` and `conditions`; combinations with no outcomes
/// are reported with T = 0 and ver 0. Throws DivisionByZeroTotal when
/// there are no outcomes at all.
MetricsReport aggregate(std::vector<RunOutcome> outcomes, const std::vector<std::string>& datasets,
                        const std::vector<std::string>& grammars,
                        const std::vector<summary::SummaryCondition>& conditions,
                        std::vector<SkippedDataset> skipped = {});

/// For each dataset and condition: summarize (enriching once per dataset
/// when the enrich condition is requested), generate goals under the
/// condition, then generate and execute each goal's visualization in every
/// grammar. Visualization failures become outcomes; provider errors
/// propagate. `evaluator` scores SEVQ when config.compute_sevq is set
/// (defaults to `provider`).
MetricsReport run_benchmark(const BenchmarkConfig& config, llm::TextProvider& provider,
                            llm::TextProvider* evaluator = nullptr,
                            const viz::Sandbox& sandbox = viz::Sandbox::shared());

enum class ReportFormat { Json, MarkdownTable, Csv };
ReportFormat report_format_from_string(const std::string& s);

std::string emit_report(const MetricsReport& report, ReportFormat format);

void to_json(nlohmann::json& j, const RunOutcome& o);
void from_json(const nlohmann::json& j, RunOutcome& o);
void to_json(nlohmann::json& j, const CellReport& c);
void from_json(const nlohmann::json& j, CellReport& c);
void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);

}  // namespace vizpipe::bench
