#pragma once

#include <array>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizpipe/goals/goal_explorer.hpp"
#include "vizpipe/llm/provider.hpp"

namespace vizpipe::ops {

enum class Dimension { CodeAccuracy, DataTransformation, GoalCompliance, VisualizationType, DataEncoding, Aesthetics };

inline constexpr std::size_t kDimensionCount = 6;
const std::array<Dimension, kDimensionCount>& all_dimensions();
std::string to_string(Dimension d);
Dimension dimension_from_string(const std::string& s);

/// The bundled question for a dimension, byte for byte.
const std::string& dimension_prompt(Dimension d);

struct DimensionScore {
  Dimension dimension = Dimension::CodeAccuracy;
  int score = 1;  // 1..10
  std::string rationale;
  bool operator==(const DimensionScore&) const = default;
};

struct EvaluationReport {
  std::vector<DimensionScore> scores;
  double sevq = 0.0;
  // Set when some dimensions could not be scored; sevq then covers the
  // parsed dimensions only.
  bool partial = false;
  std::vector<std::string> failed_dimensions;

  bool complete() const { return !partial && scores.size() == kDimensionCount; }
  bool operator==(const EvaluationReport&) const = default;
};

/// Arithmetic mean of the scores. Throws PreconditionViolation when empty
/// or when a score lies outside 1..10.
double compute_sevq(const std::vector<DimensionScore>& scores);

/// Builds a report from parsed scores, computing sevq.
EvaluationReport make_report(std::vector<DimensionScore> scores, std::vector<std::string> failed = {});

/// First integer in 1..10 in the reply; the text after it (minus a leading
/// ':' or '-') is the rationale. Throws ScoreParseFailure.
DimensionScore parse_dimension_score(Dimension d, const std::string& reply);

llm::PromptRequest build_evaluation_prompt(Dimension d, const std::string& code, const goals::Goal& goal);

/// One provider call per dimension, issued concurrently. A dimension whose
/// reply does not parse is left out and the report is flagged partial; if
/// none parse, ScoreParseFailure is thrown.
EvaluationReport evaluate(const std::string& code, const goals::Goal& goal, llm::TextProvider& provider,
                          const llm::GenerationConfig& config);

void to_json(nlohmann::json& j, const DimensionScore& s);
void from_json(const nlohmann::json& j, DimensionScore& s);
void to_json(nlohmann::json& j, const EvaluationReport& r);
void from_json(const nlohmann::json& j, EvaluationReport& r);

}  // namespace vizpipe::ops
