#include "vizpipe/viz/generator.hpp"

#include <fmt/format.h>

#include "vizpipe/error.hpp"
#include "vizpipe/viz/codegen.hpp"
#include "vizpipe/viz/filters.hpp"

namespace vizpipe::viz {

std::string to_string(FilterKind k) {
  switch (k) {
    case FilterKind::CompileDiscard: return "compile_discard";
    case FilterKind::SelfConsistency: return "self_consistency";
    case FilterKind::CorrectnessProbability: return "correctness_probability";
  }
  return "compile_discard";
}

FilterKind filter_kind_from_string(const std::string& s) {
  for (auto k : {FilterKind::CompileDiscard, FilterKind::SelfConsistency, FilterKind::CorrectnessProbability})
    if (to_string(k) == s) return k;
  raise(ErrorCode::PreconditionViolation, "unknown filter policy: " + s);
}

void FilterPolicy::validate() const {
  if (n_candidates < 1) raise(ErrorCode::PreconditionViolation, "n_candidates must be >= 1");
  if (kind != FilterKind::CompileDiscard && n_candidates < 2)
    raise(ErrorCode::PreconditionViolation, to_string(kind) + " requires n_candidates >= 2",
          {{"policy", to_string(kind)}, {"n_candidates", n_candidates}});
  if (temperature_override && (*temperature_override < 0.0 || *temperature_override > 2.0))
    raise(ErrorCode::PreconditionViolation, "temperature_override must lie in [0, 2]");
}

double FilterPolicy::temperature(double configured) const {
  if (temperature_override) return *temperature_override;
  if (kind == FilterKind::CompileDiscard && n_candidates > 1) return kDiscardTemperature;
  return configured;
}

void to_json(nlohmann::json& j, const FilterPolicy& p) {
  j = {{"kind", to_string(p.kind)}, {"n_candidates", p.n_candidates}};
  j["temperature_override"] = p.temperature_override ? nlohmann::json(*p.temperature_override) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, FilterPolicy& p) {
  p.kind = filter_kind_from_string(j.value("kind", "compile_discard"));
  p.n_candidates = j.value("n_candidates", 1);
  p.temperature_override.reset();
  if (j.contains("temperature_override") && j["temperature_override"].is_number())
    p.temperature_override = j["temperature_override"].get<double>();
}

CandidateProgram run_stub(const Scaffold& scaffold, const std::string& stub, const std::filesystem::path& dataset_path,
                          const ExecutionLimits& limits, const Sandbox& sandbox, int goal_index) {
  CandidateProgram c;
  c.goal_index = goal_index;
  c.scaffold_ref = scaffold.grammar_id;
  c.stub = stub;
  c.assembled_code = assemble(scaffold, stub);
  return sandbox.execute(std::move(c), dataset_path, limits);
}

VisualizationResult generate_visualization_detailed(const VisualizationRequest& request, llm::TextProvider& provider,
                                                    const llm::GenerationConfig& config,
                                                    const ScaffoldLibrary& library, const Sandbox& sandbox) {
  if (!request.summary) raise(ErrorCode::PreconditionViolation, "summary is required");
  if (request.summary->source_path.empty())
    raise(ErrorCode::PreconditionViolation, "summary has no source dataset path");
  request.policy.validate();
  const auto& scaffold = library.get(request.grammar_id);

  VisualizationResult result;
  result.grammar_id = request.grammar_id;
  result.summary_text = summary::render_summary(*request.summary, request.condition);
  result.prompt = build_codegen_prompt(result.summary_text, request.goal, scaffold);
  result.prompt.metadata["dataset"] = request.summary->name;
  result.prompt.metadata["condition"] = summary::to_string(request.condition);
  for (const auto& [k, v] : request.tags) result.prompt.metadata[k] = v;

  llm::GenerationConfig sampling = config;
  sampling.n_candidates = request.policy.n_candidates;
  sampling.temperature = request.policy.temperature(config.temperature);
  const auto response = provider.generate(result.prompt, sampling);

  for (std::size_t i = 0; i < response.candidates.size(); ++i) {
    CandidateProgram c;
    c.goal_index = request.goal.index;
    c.candidate_index = static_cast<int>(i);
    c.scaffold_ref = scaffold.grammar_id;
    c.stub = prepare_stub(scaffold, response.candidates[i]);
    if (c.stub.empty() || c.stub.find_first_not_of(" \t\n") == std::string::npos) {
      c.status = CandidateStatus::CompileError;
      c.error_detail = "empty stub after post-processing";
      c.assembled_code = scaffold.template_text();
    } else {
      c.assembled_code = assemble(scaffold, c.stub);
    }
    result.candidates.push_back(std::move(c));
  }
  result.candidates = sandbox.execute_all(std::move(result.candidates), request.summary->source_path, request.limits);

  auto statuses = nlohmann::json::array();
  for (const auto& c : result.candidates)
    statuses.push_back({{"candidate_index", c.candidate_index},
                        {"status", to_string(c.status)},
                        {"error_detail", c.error_detail.value_or("")}});
  try {
    switch (request.policy.kind) {
      case FilterKind::CompileDiscard:
        result.selected = select_first_compiled(result.candidates);
        break;
      case FilterKind::SelfConsistency:
        result.selected = select_by_consistency(result.candidates, scaffold.language_id);
        break;
      case FilterKind::CorrectnessProbability: {
        llm::GenerationConfig scoring = config;
        scoring.n_candidates = 1;
        result.selected = select_by_correctness(result.candidates, provider, scoring,
                                                request.goal.question + "\n" + request.goal.visualization);
        break;
      }
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoViableCandidate) throw;
    raise(ErrorCode::NoViableCandidate,
          fmt::format("none of {} candidate(s) for grammar {} executed cleanly", result.candidates.size(),
                      request.grammar_id),
          {{"candidates", statuses}});
  }
  return result;
}

CandidateProgram generate_visualization(const summary::DatasetSummary& summary, summary::SummaryCondition condition,
                                        const goals::Goal& goal, const std::string& grammar_id,
                                        const FilterPolicy& policy, llm::TextProvider& provider,
                                        const llm::GenerationConfig& config, const ExecutionLimits& limits) {
  VisualizationRequest request;
  request.summary = &summary;
  request.condition = condition;
  request.goal = goal;
  request.grammar_id = grammar_id;
  request.policy = policy;
  request.limits = limits;
  return generate_visualization_detailed(request, provider, config).selected;
}

}  // namespace vizpipe::viz
