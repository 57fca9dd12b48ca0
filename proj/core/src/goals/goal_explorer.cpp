#include "vizpipe/goals/goal_explorer.hpp"

#include <algorithm>
#include <cctype>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vizpipe/error.hpp"
#include "vizpipe/text.hpp"

namespace vizpipe::goals {

namespace {

constexpr const char* kGoalSystem =
    "You are a seasoned visualization specialist and data analyst. Given a summary of a "
    "dataset, you propose insightful data exploration goals. Each goal has a question, a visualization that "
    "answers it, and a rationale explaining which fields are used and what the visualization reveals. "
    "Apply visualization best practices: avoid pie charts, prefer bar charts for comparing quantities, "
    "and choose encodings that suit the field types.";

constexpr const char* kGoalExample =
    "Example output for a dataset with fields `X` and `Y` (field names are always written in backticks, "
    "exactly as they appear in the summary):\n"
    "```json\n"
    "[{\"question\": \"How are `X` and `Y` related?\", "
    "\"visualization\": \"scatter plot of `X` vs `Y`\", "
    "\"rationale\": \"Plotting `X` against `Y` shows whether larger `X` values come with larger `Y` values.\"}]\n"
    "```";

bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool contains_token(const std::string& haystack_lower, const std::string& needle_lower) {
  if (needle_lower.empty()) return false;
  std::size_t pos = 0;
  while ((pos = haystack_lower.find(needle_lower, pos)) != std::string::npos) {
    const bool left_ok = pos == 0 || !is_ident(haystack_lower[pos - 1]) || !is_ident(needle_lower.front());
    const auto end = pos + needle_lower.size();
    const bool right_ok =
        end >= haystack_lower.size() || !is_ident(haystack_lower[end]) || !is_ident(needle_lower.back());
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

std::vector<std::string> backtick_symbols(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = s.find('`', pos)) != std::string::npos) {
    const auto end = s.find('`', pos + 1);
    if (end == std::string::npos) break;
    out.push_back(s.substr(pos + 1, end - pos - 1));
    pos = end + 1;
  }
  return out;
}

bool non_empty_string(const nlohmann::json& j, const char* key) {
  return j.contains(key) && j[key].is_string() && !text::trim(j[key].get<std::string>()).empty();
}

}  // namespace

llm::PromptRequest build_goal_prompt(const GoalRequest& request) {
  if (request.n_goals < 1) raise(ErrorCode::PreconditionViolation, "n_goals must be >= 1");
  llm::PromptRequest req;
  req.system = kGoalSystem;
  std::string user;
  user += "Dataset summary:\n";
  user += request.summary_text.empty() ? std::string("(no summary available)\n") : request.summary_text;
  if (request.persona_hint) user += "\nPersona: " + *request.persona_hint + "\n";
  user += fmt::format(
      "\nGenerate exactly {} goals. Reference only fields that exist in the summary and write every field "
      "name in backticks.\n\n",
      request.n_goals);
  user += kGoalExample;
  user +=
      "\n\nRespond with a JSON array of objects with the keys \"question\", \"visualization\" and "
      "\"rationale\", and nothing else.";
  req.messages.push_back({"user", std::move(user)});
  req.metadata["task"] = "goals";
  return req;
}

std::vector<std::string> referenced_fields(const std::string& visualization,
                                           const std::vector<std::string>& field_names) {
  const auto lower = text::to_lower(visualization);
  std::vector<std::string> out;
  for (const auto& f : field_names)
    if (contains_token(lower, text::to_lower(f))) out.push_back(f);
  return out;
}

std::vector<std::string> unknown_symbols(const std::string& visualization,
                                         const std::vector<std::string>& field_names) {
  std::vector<std::string> out;
  for (const auto& sym : backtick_symbols(visualization)) {
    const auto lower = text::to_lower(sym);
    const bool known = std::any_of(field_names.begin(), field_names.end(),
                                   [&](const std::string& f) { return text::to_lower(f) == lower; });
    if (!known) out.push_back(sym);
  }
  return out;
}

bool is_grounded(const std::string& visualization, const std::vector<std::string>& field_names) {
  return unknown_symbols(visualization, field_names).empty() && !referenced_fields(visualization, field_names).empty();
}

GoalParseResult parse_goals_detailed(const std::string& raw, const summary::DatasetSummary& summary,
                                     std::optional<int> max_goals) {
  auto parsed = text::extract_json(raw);
  if (!parsed) raise(ErrorCode::NoParsableJSON, "goal reply contains no JSON", {{"raw", raw}});

  nlohmann::json records;
  if (parsed->is_array()) {
    records = *parsed;
  } else if (parsed->is_object() && parsed->contains("goals") && (*parsed)["goals"].is_array()) {
    records = (*parsed)["goals"];
  } else if (parsed->is_object()) {
    records = nlohmann::json::array({*parsed});
  } else {
    raise(ErrorCode::NoParsableJSON, "goal reply is not a JSON array", {{"raw", raw}});
  }

  const auto fields = summary.field_names();
  GoalParseResult result;
  for (const auto& r : records) {
    if (!r.is_object() || !non_empty_string(r, "question") || !non_empty_string(r, "visualization") ||
        !non_empty_string(r, "rationale")) {
      ++result.rejected_malformed;
      continue;
    }
    Goal g;
    g.question = r["question"].get<std::string>();
    g.visualization = r["visualization"].get<std::string>();
    g.rationale = r["rationale"].get<std::string>();
    if (!is_grounded(g.visualization, fields)) {
      ++result.rejected_hallucinated;
      continue;
    }
    result.goals.push_back(std::move(g));
  }
  if (result.goals.empty())
    raise(ErrorCode::AllGoalsRejected, "every goal record was rejected",
          {{"malformed", result.rejected_malformed}, {"hallucinated", result.rejected_hallucinated}});
  if (max_goals && static_cast<int>(result.goals.size()) > *max_goals) result.goals.resize(*max_goals);
  for (std::size_t i = 0; i < result.goals.size(); ++i) result.goals[i].index = static_cast<int>(i);
  if (result.rejected_hallucinated > 0)
    spdlog::info("dropped {} goal(s) referencing unknown fields", result.rejected_hallucinated);
  return result;
}

std::vector<Goal> parse_goals(const std::string& raw, const summary::DatasetSummary& summary,
                              std::optional<int> max_goals) {
  return parse_goals_detailed(raw, summary, max_goals).goals;
}

std::vector<Goal> explore_goals(const summary::DatasetSummary& summary, summary::SummaryCondition condition,
                                int n_goals, llm::TextProvider& provider, const llm::GenerationConfig& config,
                                std::optional<std::string> persona_hint) {
  GoalRequest request{summary::render_summary(summary, condition), n_goals, std::move(persona_hint)};
  auto prompt = build_goal_prompt(request);
  prompt.metadata["dataset"] = summary.name;
  prompt.metadata["condition"] = summary::to_string(condition);
  llm::GenerationConfig single = config;
  single.n_candidates = 1;
  const auto response = provider.generate(prompt, single);
  if (response.candidates.empty()) raise(ErrorCode::NoParsableJSON, "empty goal reply");
  return parse_goals(response.candidates.front(), summary, n_goals);
}

Goal user_goal(const std::string& text, int index) {
  if (text::trim(text).empty()) raise(ErrorCode::PreconditionViolation, "goal text is empty");
  return Goal{index, text, text, "user-provided"};
}

void to_json(nlohmann::json& j, const Goal& g) {
  j = {{"index", g.index}, {"question", g.question}, {"visualization", g.visualization}, {"rationale", g.rationale}};
}

void from_json(const nlohmann::json& j, Goal& g) {
  g.index = j.value("index", 0);
  g.question = j.at("question").get<std::string>();
  g.visualization = j.at("visualization").get<std::string>();
  g.rationale = j.at("rationale").get<std::string>();
}

}  // namespace vizpipe::goals
