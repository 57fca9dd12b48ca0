#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizpipe/llm/provider.hpp"
#include "vizpipe/summary/summarizer.hpp"

namespace vizpipe::goals {

struct Goal {
  int index = 0;
  std::string question;
  std::string visualization;  // short directive naming chart type and fields
  std::string rationale;
  bool operator==(const Goal&) const = default;
};

struct GoalRequest {
  std::string summary_text;  // may be empty (no_summary ablation)
  int n_goals = 5;
  std::optional<std::string> persona_hint;
};

llm::PromptRequest build_goal_prompt(const GoalRequest& request);

/// Fields of `field_names` that `visualization` mentions (case-insensitive,
/// whole-token), in field order.
std::vector<std::string> referenced_fields(const std::string& visualization,
                                           const std::vector<std::string>& field_names);

/// Backtick-delimited symbols in `visualization` that are not field names.
std::vector<std::string> unknown_symbols(const std::string& visualization,
                                         const std::vector<std::string>& field_names);

/// A visualization is grounded when it names at least one known field and
/// every backtick-delimited symbol is a known field.
bool is_grounded(const std::string& visualization, const std::vector<std::string>& field_names);

struct GoalParseResult {
  std::vector<Goal> goals;
  int rejected_malformed = 0;
  int rejected_hallucinated = 0;
};

/// Strips fences, parses the JSON records, drops malformed and ungrounded
/// records, truncates to `max_goals` when given and re-indexes 0..k-1.
/// Throws NoParsableJSON or AllGoalsRejected.
GoalParseResult parse_goals_detailed(const std::string& raw, const summary::DatasetSummary& summary,
                                     std::optional<int> max_goals = std::nullopt);
std::vector<Goal> parse_goals(const std::string& raw, const summary::DatasetSummary& summary,
                              std::optional<int> max_goals = std::nullopt);

/// render_summary -> build_goal_prompt -> generate -> parse_goals.
std::vector<Goal> explore_goals(const summary::DatasetSummary& summary, summary::SummaryCondition condition,
                                int n_goals, llm::TextProvider& provider, const llm::GenerationConfig& config,
                                std::optional<std::string> persona_hint = std::nullopt);

/// Wraps user-provided goal text as a goal (semi-automated mode).
Goal user_goal(const std::string& text, int index);

void to_json(nlohmann::json& j, const Goal& g);
void from_json(const nlohmann::json& j, Goal& g);

}  // namespace vizpipe::goals
