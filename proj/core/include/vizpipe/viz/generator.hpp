#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizpipe/goals/goal_explorer.hpp"
#include "vizpipe/llm/provider.hpp"
#include "vizpipe/summary/summarizer.hpp"
#include "vizpipe/viz/sandbox.hpp"
#include "vizpipe/viz/scaffold.hpp"

namespace vizpipe::viz {

enum class FilterKind { CompileDiscard, SelfConsistency, CorrectnessProbability };

std::string to_string(FilterKind k);
FilterKind filter_kind_from_string(const std::string& s);

inline constexpr double kDiscardTemperature = 0.7;

struct FilterPolicy {
  FilterKind kind = FilterKind::CompileDiscard;
  int n_candidates = 1;
  std::optional<double> temperature_override;

  /// Throws PreconditionViolation (n < 1, or n < 2 for the consensus and
  /// correctness policies).
  void validate() const;
  /// Sampling temperature for this policy given the configured one.
  double temperature(double configured) const;
};

void to_json(nlohmann::json& j, const FilterPolicy& p);
void from_json(const nlohmann::json& j, FilterPolicy& p);

struct VisualizationResult {
  CandidateProgram selected;
  std::vector<CandidateProgram> candidates;
  std::string summary_text;
  std::string grammar_id;
  llm::PromptRequest prompt;
};

struct VisualizationRequest {
  const summary::DatasetSummary* summary = nullptr;
  summary::SummaryCondition condition = summary::SummaryCondition::Enrich;
  goals::Goal goal;
  std::string grammar_id;
  FilterPolicy policy;
  ExecutionLimits limits;
  // Extra metadata tags merged into the code-generation request.
  std::map<std::string, std::string> tags;
};

/// prompt -> n stubs -> assemble -> execute -> filter. Throws
/// NoViableCandidate (details list every candidate's status), UnknownGrammar
/// and provider errors.
VisualizationResult generate_visualization_detailed(const VisualizationRequest& request, llm::TextProvider& provider,
                                                    const llm::GenerationConfig& config,
                                                    const ScaffoldLibrary& library = ScaffoldLibrary::bundled(),
                                                    const Sandbox& sandbox = Sandbox::shared());

CandidateProgram generate_visualization(const summary::DatasetSummary& summary, summary::SummaryCondition condition,
                                        const goals::Goal& goal, const std::string& grammar_id,
                                        const FilterPolicy& policy, llm::TextProvider& provider,
                                        const llm::GenerationConfig& config, const ExecutionLimits& limits = {});

/// Assembles `stub` into the grammar's scaffold and executes it. Used by
/// the self-test and by refinement/repair.
CandidateProgram run_stub(const Scaffold& scaffold, const std::string& stub, const std::filesystem::path& dataset_path,
                          const ExecutionLimits& limits, const Sandbox& sandbox = Sandbox::shared(), int goal_index = 0);

}  // namespace vizpipe::viz
