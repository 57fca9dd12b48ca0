#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizpipe/goals/goal_explorer.hpp"
#include "vizpipe/llm/provider.hpp"
#include "vizpipe/ops/evaluate.hpp"
#include "vizpipe/summary/summarizer.hpp"
#include "vizpipe/viz/sandbox.hpp"
#include "vizpipe/viz/scaffold.hpp"

namespace vizpipe::ops {

inline constexpr std::size_t kHistoryWindow = 4;

struct RefinementTurn {
  std::string instruction;
  std::string before_code;
  std::string after_code;
  viz::CandidateStatus executed = viz::CandidateStatus::Unexecuted;
  std::optional<std::string> error_detail;
  bool no_op = false;
  bool operator==(const RefinementTurn&) const = default;
};

void to_json(nlohmann::json& j, const RefinementTurn& t);
void from_json(const nlohmann::json& j, RefinementTurn& t);

/// Prompt for one refinement step. The last kHistoryWindow turns of
/// `history` are replayed as conversation before the new instruction.
llm::PromptRequest build_refine_prompt(const viz::CandidateProgram& current, const std::string& instruction,
                                       const viz::Scaffold& scaffold, const std::vector<RefinementTurn>& history);

struct RefineResult {
  RefinementTurn turn;
  viz::CandidateProgram candidate;  // executed refinement
};

/// Stateless refinement step: prompt, re-assemble, re-execute. The caller
/// decides whether to keep the candidate. Requires `current` compiled_ok.
RefineResult refine(const viz::CandidateProgram& current, const std::string& instruction,
                    const viz::Scaffold& scaffold, const std::vector<RefinementTurn>& history,
                    llm::TextProvider& provider, const llm::GenerationConfig& config,
                    const std::filesystem::path& dataset_path, const viz::ExecutionLimits& limits = {},
                    const viz::Sandbox& sandbox = viz::Sandbox::shared());

/// Single-writer conversational refinement over one visualization. A turn
/// issued while another is in flight throws Conflict; a turn whose code
/// fails is recorded and throws NoViableCandidate, leaving current() as it
/// was.
class RefinementSession {
 public:
  RefinementSession(viz::CandidateProgram initial, std::filesystem::path dataset_path);

  RefinementTurn refine(const std::string& instruction, const viz::Scaffold& scaffold, llm::TextProvider& provider,
                        const llm::GenerationConfig& config, const viz::ExecutionLimits& limits = {},
                        const viz::Sandbox& sandbox = viz::Sandbox::shared());

  /// Replaces the current program (e.g. after a repair). Throws Conflict
  /// while a turn is in flight.
  void replace(viz::CandidateProgram candidate);

  /// Reinstates turns loaded from a snapshot.
  void restore_history(std::vector<RefinementTurn> turns);

  viz::CandidateProgram current() const;
  std::vector<RefinementTurn> history() const;
  nlohmann::json transcript() const;

 private:
  std::filesystem::path dataset_path_;
  mutable std::mutex state_mu_;
  std::mutex writer_mu_;
  viz::CandidateProgram current_;
  std::vector<RefinementTurn> history_;
};

struct Explanation {
  std::string code_walkthrough;
  std::string accessibility_description;
  bool operator==(const Explanation&) const = default;
};

void to_json(nlohmann::json& j, const Explanation& e);

llm::PromptRequest build_explain_prompt(const std::string& code);
/// Reads the "Code Walkthrough" and "Accessibility Description" markdown
/// sections. Throws ExplanationParseFailure with the raw text in details.
Explanation parse_explanation(const std::string& raw);
Explanation explain(const std::string& code, llm::TextProvider& provider, const llm::GenerationConfig& config);

struct RepairOptions {
  int max_depth = 2;          // depth d allows d+1 attempts
  int score_threshold = 7;    // dimensions scoring below this are quoted
  viz::ExecutionLimits limits;
  std::optional<goals::Goal> goal;
};

struct RepairOutcome {
  viz::CandidateProgram candidate;
  std::vector<viz::CandidateProgram> attempts;
};

llm::PromptRequest build_repair_prompt(const std::string& code, const EvaluationReport& report,
                                       const viz::Scaffold& scaffold, const RepairOptions& options,
                                       const std::vector<viz::CandidateProgram>& failed_attempts);

/// Asks for a corrected stub that addresses the low-scoring dimensions and
/// executes it; a failing attempt is fed back into the next one. Throws
/// NoViableCandidate after max_depth + 1 attempts, with every attempt in
/// the details.
RepairOutcome repair(const std::string& code, const EvaluationReport& report, const viz::Scaffold& scaffold,
                     llm::TextProvider& provider, const llm::GenerationConfig& config,
                     const std::filesystem::path& dataset_path, const RepairOptions& options = {},
                     const viz::Sandbox& sandbox = viz::Sandbox::shared());

struct RecommendContext {
  const summary::DatasetSummary* summary = nullptr;
  std::optional<goals::Goal> goal;
  std::optional<std::string> code;
};

llm::PromptRequest build_recommend_prompt(const RecommendContext& context, int k);

/// Up to k new goals that pass the hallucination filter and differ from
/// the context goal. Throws NoParsableJSON or AllGoalsRejected.
std::vector<goals::Goal> recommend(const RecommendContext& context, int k, llm::TextProvider& provider,
                                   const llm::GenerationConfig& config);

}  // namespace vizpipe::ops
