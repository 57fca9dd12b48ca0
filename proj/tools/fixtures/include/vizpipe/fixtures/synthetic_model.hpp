#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vizpipe/goals/goal_explorer.hpp"
#include "vizpipe/llm/scripted.hpp"
#include "vizpipe/summary/summarizer.hpp"

// A deterministic stand-in for a language model. It answers every prompt
// the pipeline issues (enrichment, goals, code, scores, refinement, repair,
// explanation, recommendation) from knowledge of the bundled datasets, so
// the pipeline can be exercised and cassettes recorded without a live model.
namespace vizpipe::fixtures {

enum class Fault { None, Syntax, UnknownField };

/// Decides whether the code written for one run is broken.
using FaultSchedule = std::function<Fault(const std::string& dataset, const std::string& condition, int goal_index,
                                          const std::string& grammar)>;

enum class ChartKind { Bar, Count, Pie, Scatter, Line, Histogram };

std::string to_string(ChartKind k);

/// What the model intends to draw. Field names are exact dataset fields.
struct ChartPlan {
  ChartKind kind = ChartKind::Bar;
  std::string x;
  std::string y;  // empty for Count, Pie and Histogram
  std::optional<std::string> color;
  std::string title;
  bool x_temporal = false;
  bool x_quantitative = false;
};

/// Derives a plan from goal text. Throws PreconditionViolation when the text
/// names no usable field of `summary`.
ChartPlan plan_chart(const std::string& question, const std::string& visualization,
                     const summary::DatasetSummary& summary);

/// Goals the model proposes for a dataset.
std::vector<goals::Goal> propose_goals(const summary::DatasetSummary& summary, int n);

/// The stub the model writes for `plan` in `grammar_id`.
std::string render_stub(const ChartPlan& plan, const std::string& grammar_id, Fault fault = Fault::None);

struct SyntheticModelOptions {
  // Base summaries of the datasets the model "knows", keyed by name.
  std::map<std::string, summary::DatasetSummary> datasets;
  FaultSchedule faults;  // null: never broken
};

class SyntheticModel {
 public:
  explicit SyntheticModel(SyntheticModelOptions options);

  /// Loads every CSV/JSON file in `corpus_dir` as a known dataset.
  static SyntheticModel for_corpus(const std::filesystem::path& corpus_dir, FaultSchedule faults = nullptr);

  std::vector<std::string> reply(const llm::PromptRequest& request, const llm::GenerationConfig& config) const;

  /// A provider answering with reply().
  llm::ProviderPtr provider() const;

  const summary::DatasetSummary* dataset(const std::string& name) const;

 private:
  std::string enrich(const llm::PromptRequest& r) const;
  std::string goals(const llm::PromptRequest& r, int n) const;
  std::vector<std::string> codegen(const llm::PromptRequest& r, int n) const;
  std::string score(const llm::PromptRequest& r) const;
  std::string evaluate(const llm::PromptRequest& r, const std::string& dimension) const;
  std::string refine(const llm::PromptRequest& r) const;
  std::string repair(const llm::PromptRequest& r) const;
  std::string explain(const llm::PromptRequest& r) const;
  std::string recommend(const llm::PromptRequest& r) const;
  const summary::DatasetSummary* guess_dataset(const std::string& text) const;

  SyntheticModelOptions options_;
};

/// Breaks exactly `k` of the runs of a datasets x conditions x goals grid,
/// chosen by a seeded shuffle.
FaultSchedule exact_faults(const std::vector<std::string>& datasets, const std::vector<std::string>& conditions,
                           int goals_per_dataset, int k, unsigned seed = 7);

/// Condition-dependent error pattern used for the recorded ablation: the
/// less the prompt says about the data, the more runs reference fields the
/// data does not have.
FaultSchedule ablation_faults(const std::vector<std::string>& datasets);

}  // namespace vizpipe::fixtures
