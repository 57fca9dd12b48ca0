#include "vizpipe/ops/viz_ops.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vizpipe/error.hpp"
#include "vizpipe/text.hpp"
#include "vizpipe/viz/codegen.hpp"
#include "vizpipe/viz/generator.hpp"

namespace vizpipe::ops {

namespace {

constexpr const char* kRefineSystem =
    "You edit visualization code on request. You are given a program scaffold with a hole marked <stub> and "
    "the code currently filling it. Apply the instruction and return only the complete new code for <stub>, "
    "without the surrounding scaffold and without explanations.";

constexpr const char* kExplainSystem =
    "You explain visualization code to a reader who cannot see the chart. Reply in markdown with exactly two "
    "sections: \"## Code Walkthrough\" describing step by step what the code does, and "
    "\"## Accessibility Description\" describing the resulting chart for a screen-reader user.";

constexpr const char* kRepairSystem =
    "You fix visualization code. You are given a program scaffold with a hole marked <stub>, the current code "
    "for <stub>, and a critique. Return only the corrected code for <stub>, addressing every point raised, "
    "without the surrounding scaffold and without explanations.";

constexpr const char* kRecommendSystem =
    "You are a seasoned visualization specialist. Given a dataset summary and a visualization the user is "
    "looking at, you suggest further visualizations that complement it, for example for comparison. "
    "Write field names in backticks exactly as they appear in the summary.";

std::string scaffold_context(const viz::Scaffold& scaffold) {
  std::string s = fmt::format("Scaffold ({}):\n{}\n", scaffold.grammar_id, scaffold.template_text());
  if (!scaffold.prompt_hint.empty()) s += "\n" + scaffold.prompt_hint + "\n";
  return s;
}

// The stub a program was built from; falls back to the whole program when
// it does not carry one.
std::string stub_of(const viz::CandidateProgram& c) { return c.stub.empty() ? c.assembled_code : c.stub; }

llm::PromptRequest fim_request(const viz::Scaffold& scaffold, const char* system, std::string task) {
  llm::PromptRequest req;
  req.system = system;
  req.mode = llm::PromptMode::FillInMiddle;
  req.fim_prefix = scaffold.preamble;
  req.fim_suffix = scaffold.postamble;
  req.metadata["task"] = std::move(task);
  req.metadata["grammar"] = scaffold.grammar_id;
  return req;
}

// Builds and executes a candidate from a raw reply. Empty stubs become
// compile errors rather than exceptions.
viz::CandidateProgram candidate_from_reply(const viz::Scaffold& scaffold, const std::string& reply, int goal_index,
                                           const std::filesystem::path& dataset, const viz::ExecutionLimits& limits,
                                           const viz::Sandbox& sandbox) {
  const auto stub = viz::prepare_stub(scaffold, reply);
  if (text::trim(stub).empty()) {
    viz::CandidateProgram c;
    c.goal_index = goal_index;
    c.scaffold_ref = scaffold.grammar_id;
    c.assembled_code = scaffold.template_text();
    c.status = viz::CandidateStatus::CompileError;
    c.error_detail = "empty stub after post-processing";
    return c;
  }
  return viz::run_stub(scaffold, stub, dataset, limits, sandbox, goal_index);
}

std::string first_reply(const llm::ProviderResponse& r) { return r.candidates.empty() ? std::string() : r.candidates.front(); }

}  // namespace

void to_json(nlohmann::json& j, const RefinementTurn& t) {
  j = {{"instruction", t.instruction}, {"before_code", t.before_code}, {"after_code", t.after_code},
       {"executed", viz::to_string(t.executed)}, {"no_op", t.no_op}};
  j["error_detail"] = t.error_detail ? nlohmann::json(*t.error_detail) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, RefinementTurn& t) {
  t.instruction = j.at("instruction").get<std::string>();
  t.before_code = j.value("before_code", "");
  t.after_code = j.value("after_code", "");
  t.executed = viz::candidate_status_from_string(j.value("executed", "unexecuted"));
  t.no_op = j.value("no_op", false);
  t.error_detail.reset();
  if (j.contains("error_detail") && j["error_detail"].is_string()) t.error_detail = j["error_detail"].get<std::string>();
}

llm::PromptRequest build_refine_prompt(const viz::CandidateProgram& current, const std::string& instruction,
                                       const viz::Scaffold& scaffold, const std::vector<RefinementTurn>& history) {
  auto req = fim_request(scaffold, kRefineSystem, "refine");
  req.messages.push_back({"user", scaffold_context(scaffold)});
  const auto first = history.size() > kHistoryWindow ? history.size() - kHistoryWindow : 0;
  for (std::size_t i = first; i < history.size(); ++i) {
    req.messages.push_back({"user", history[i].instruction});
    req.messages.push_back({"assistant", history[i].executed == viz::CandidateStatus::CompiledOk
                                             ? history[i].after_code
                                             : "(that change failed to run and was discarded)"});
  }
  req.messages.push_back(
      {"user", fmt::format("Current code for <stub>:\n```\n{}\n```\n\nInstruction: {}", stub_of(current), instruction)});
  return req;
}

RefineResult refine(const viz::CandidateProgram& current, const std::string& instruction,
                    const viz::Scaffold& scaffold, const std::vector<RefinementTurn>& history,
                    llm::TextProvider& provider, const llm::GenerationConfig& config,
                    const std::filesystem::path& dataset_path, const viz::ExecutionLimits& limits,
                    const viz::Sandbox& sandbox) {
  if (current.status != viz::CandidateStatus::CompiledOk)
    raise(ErrorCode::PreconditionViolation, "refinement starts from a compiled_ok program");
  if (text::trim(instruction).empty()) raise(ErrorCode::PreconditionViolation, "instruction is empty");
  llm::GenerationConfig single = config;
  single.n_candidates = 1;
  const auto reply = first_reply(provider.generate(build_refine_prompt(current, instruction, scaffold, history), single));

  RefineResult out;
  out.candidate = candidate_from_reply(scaffold, reply, current.goal_index, dataset_path, limits, sandbox);
  out.turn.instruction = instruction;
  out.turn.before_code = current.assembled_code;
  out.turn.after_code = out.candidate.assembled_code;
  out.turn.executed = out.candidate.status;
  out.turn.error_detail = out.candidate.error_detail;
  out.turn.no_op = out.turn.after_code == out.turn.before_code;
  return out;
}

RefinementSession::RefinementSession(viz::CandidateProgram initial, std::filesystem::path dataset_path)
    : dataset_path_(std::move(dataset_path)), current_(std::move(initial)) {}

RefinementTurn RefinementSession::refine(const std::string& instruction, const viz::Scaffold& scaffold,
                                         llm::TextProvider& provider, const llm::GenerationConfig& config,
                                         const viz::ExecutionLimits& limits, const viz::Sandbox& sandbox) {
  std::unique_lock writer(writer_mu_, std::try_to_lock);
  if (!writer.owns_lock()) raise(ErrorCode::Conflict, "another refinement is in progress for this visualization");
  const auto snapshot = current();
  const auto past = history();
  auto result = ops::refine(snapshot, instruction, scaffold, past, provider, config, dataset_path_, limits, sandbox);
  {
    std::lock_guard lock(state_mu_);
    history_.push_back(result.turn);
    if (result.candidate.status == viz::CandidateStatus::CompiledOk) current_ = result.candidate;
  }
  if (result.candidate.status != viz::CandidateStatus::CompiledOk)
    raise(ErrorCode::NoViableCandidate, "refined code failed to run; the previous version is kept",
          {{"turn", result.turn}});
  return result.turn;
}

void RefinementSession::replace(viz::CandidateProgram candidate) {
  std::unique_lock writer(writer_mu_, std::try_to_lock);
  if (!writer.owns_lock()) raise(ErrorCode::Conflict, "another refinement is in progress for this visualization");
  std::lock_guard lock(state_mu_);
  current_ = std::move(candidate);
}

void RefinementSession::restore_history(std::vector<RefinementTurn> turns) {
  std::lock_guard lock(state_mu_);
  history_ = std::move(turns);
}

viz::CandidateProgram RefinementSession::current() const {
  std::lock_guard lock(state_mu_);
  return current_;
}

std::vector<RefinementTurn> RefinementSession::history() const {
  std::lock_guard lock(state_mu_);
  return history_;
}

nlohmann::json RefinementSession::transcript() const {
  std::lock_guard lock(state_mu_);
  return {{"turns", history_}, {"current", current_}};
}

void to_json(nlohmann::json& j, const Explanation& e) {
  j = {{"code_walkthrough", e.code_walkthrough}, {"accessibility_description", e.accessibility_description}};
}

llm::PromptRequest build_explain_prompt(const std::string& code) {
  llm::PromptRequest req;
  req.system = kExplainSystem;
  req.messages.push_back({"user", "Code:\n```\n" + code + "\n```"});
  req.metadata["task"] = "explain";
  return req;
}

Explanation parse_explanation(const std::string& raw) {
  // heading (lower-cased) -> body
  std::map<std::string, std::string> sections;
  std::string heading;
  for (const auto& line : text::split_lines(raw)) {
    const auto t = text::trim(line);
    if (t.rfind("#", 0) == 0) {
      heading = text::to_lower(text::trim(t.substr(t.find_first_not_of('#'))));
      sections[heading];
      continue;
    }
    if (!heading.empty()) sections[heading] += line + "\n";
  }
  Explanation e;
  for (const auto& [h, body] : sections) {
    if (h.find("walkthrough") != std::string::npos) e.code_walkthrough = text::trim(body);
    if (h.find("accessibility") != std::string::npos) e.accessibility_description = text::trim(body);
  }
  if (e.code_walkthrough.empty() || e.accessibility_description.empty())
    raise(ErrorCode::ExplanationParseFailure, "reply lacks the walkthrough or accessibility section", {{"raw", raw}});
  return e;
}

Explanation explain(const std::string& code, llm::TextProvider& provider, const llm::GenerationConfig& config) {
  if (text::trim(code).empty()) raise(ErrorCode::PreconditionViolation, "explain requires non-empty code");
  llm::GenerationConfig single = config;
  single.n_candidates = 1;
  return parse_explanation(first_reply(provider.generate(build_explain_prompt(code), single)));
}

llm::PromptRequest build_repair_prompt(const std::string& code, const EvaluationReport& report,
                                       const viz::Scaffold& scaffold, const RepairOptions& options,
                                       const std::vector<viz::CandidateProgram>& failed_attempts) {
  auto req = fim_request(scaffold, kRepairSystem, "repair");
  req.metadata["attempt"] = std::to_string(failed_attempts.size());
  std::vector<DimensionScore> low;
  for (const auto& s : report.scores)
    if (s.score < options.score_threshold) low.push_back(s);
  if (low.empty() && !report.scores.empty())
    low.push_back(*std::min_element(report.scores.begin(), report.scores.end(),
                                    [](const auto& a, const auto& b) { return a.score < b.score; }));
  std::string critique;
  for (const auto& s : low) critique += fmt::format("- {} ({}/10): {}\n", to_string(s.dimension), s.score, s.rationale);

  std::string user = scaffold_context(scaffold);
  if (options.goal)
    user += fmt::format("\nGoal: {}\nVisualization: {}\n", options.goal->question, options.goal->visualization);
  user += fmt::format("\nCurrent code for <stub>:\n```\n{}\n```\n\nCritique:\n{}", code, critique);
  for (const auto& a : failed_attempts)
    user += fmt::format("\nA previous fix failed with {}:\n{}\n", viz::to_string(a.status), a.error_detail.value_or(""));
  req.messages.push_back({"user", std::move(user)});
  return req;
}

RepairOutcome repair(const std::string& code, const EvaluationReport& report, const viz::Scaffold& scaffold,
                     llm::TextProvider& provider, const llm::GenerationConfig& config,
                     const std::filesystem::path& dataset_path, const RepairOptions& options,
                     const viz::Sandbox& sandbox) {
  if (options.max_depth < 0) raise(ErrorCode::PreconditionViolation, "repair depth must be >= 0");
  if (report.scores.empty()) raise(ErrorCode::PreconditionViolation, "repair requires an evaluation report");
  llm::GenerationConfig single = config;
  single.n_candidates = 1;
  const int goal_index = options.goal ? options.goal->index : 0;
  RepairOutcome out;
  for (int attempt = 0; attempt <= options.max_depth; ++attempt) {
    const auto req = build_repair_prompt(code, report, scaffold, options, out.attempts);
    auto c = candidate_from_reply(scaffold, first_reply(provider.generate(req, single)), goal_index, dataset_path,
                                  options.limits, sandbox);
    out.attempts.push_back(c);
    if (c.status == viz::CandidateStatus::CompiledOk) {
      out.candidate = std::move(c);
      return out;
    }
    spdlog::info("repair attempt {} ended with {}", attempt, viz::to_string(c.status));
  }
  raise(ErrorCode::NoViableCandidate, fmt::format("repair failed after {} attempt(s)", out.attempts.size()),
        {{"attempts", out.attempts}});
}

llm::PromptRequest build_recommend_prompt(const RecommendContext& context, int k) {
  if (!context.summary) raise(ErrorCode::PreconditionViolation, "recommend requires a summary");
  llm::PromptRequest req;
  req.system = kRecommendSystem;
  std::string user = "Dataset summary:\n" + summary::render_summary(*context.summary, summary::SummaryCondition::Enrich);
  if (context.goal)
    user += fmt::format("\nCurrent goal: {}\nCurrent visualization: {}\n", context.goal->question,
                        context.goal->visualization);
  if (context.code) user += "\nCurrent code:\n```\n" + *context.code + "\n```\n";
  user += fmt::format(
      "\nSuggest {} additional visualizations. Respond with a JSON array of objects with the keys \"question\", "
      "\"visualization\" and \"rationale\", and nothing else.",
      k);
  req.messages.push_back({"user", std::move(user)});
  req.metadata["task"] = "recommend";
  req.metadata["dataset"] = context.summary->name;
  return req;
}

std::vector<goals::Goal> recommend(const RecommendContext& context, int k, llm::TextProvider& provider,
                                   const llm::GenerationConfig& config) {
  if (k < 1) raise(ErrorCode::PreconditionViolation, "k must be >= 1");
  llm::GenerationConfig single = config;
  single.n_candidates = 1;
  const auto reply = first_reply(provider.generate(build_recommend_prompt(context, k), single));
  auto parsed = goals::parse_goals_detailed(reply, *context.summary);

  std::set<std::string> seen;
  if (context.goal) seen.insert(text::to_lower(text::trim(context.goal->visualization)));
  std::vector<goals::Goal> out;
  for (auto& g : parsed.goals) {
    if (!seen.insert(text::to_lower(text::trim(g.visualization))).second) continue;
    g.index = static_cast<int>(out.size());
    out.push_back(std::move(g));
    if (static_cast<int>(out.size()) == k) break;
  }
  return out;
}

}  // namespace vizpipe::ops
