#include "vizpipe/ops/evaluate.hpp"

#include <future>
#include <map>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vizpipe/error.hpp"
#include "vizpipe/resources.hpp"
#include "vizpipe/text.hpp"

namespace vizpipe::ops {

namespace {

constexpr const char* kEvaluationSystem =
    "You are an experienced visualization reviewer. You assess visualization code against one quality "
    "dimension at a time, applying visualization best practices. Reply on a single line in the form "
    "\"<score>: <rationale>\" where <score> is an integer from 1 (poor) to 10 (excellent).";

}  // namespace

const std::array<Dimension, kDimensionCount>& all_dimensions() {
  static const std::array<Dimension, kDimensionCount> dims = {
      Dimension::CodeAccuracy,      Dimension::DataTransformation, Dimension::GoalCompliance,
      Dimension::VisualizationType, Dimension::DataEncoding,       Dimension::Aesthetics};
  return dims;
}

std::string to_string(Dimension d) {
  switch (d) {
    case Dimension::CodeAccuracy: return "code_accuracy";
    case Dimension::DataTransformation: return "data_transformation";
    case Dimension::GoalCompliance: return "goal_compliance";
    case Dimension::VisualizationType: return "visualization_type";
    case Dimension::DataEncoding: return "data_encoding";
    case Dimension::Aesthetics: return "aesthetics";
  }
  return "code_accuracy";
}

Dimension dimension_from_string(const std::string& s) {
  for (auto d : all_dimensions())
    if (to_string(d) == s) return d;
  raise(ErrorCode::ParseError, "unknown evaluation dimension: " + s);
}

const std::string& dimension_prompt(Dimension d) {
  static const std::map<Dimension, std::string> prompts = [] {
    std::map<Dimension, std::string> m;
    for (auto dim : all_dimensions()) m[dim] = read_resource("prompts/evaluation/" + to_string(dim) + ".txt");
    return m;
  }();
  return prompts.at(d);
}

double compute_sevq(const std::vector<DimensionScore>& scores) {
  if (scores.empty()) raise(ErrorCode::PreconditionViolation, "sevq needs at least one score");
  long long sum = 0;
  for (const auto& s : scores) {
    if (s.score < 1 || s.score > 10)
      raise(ErrorCode::PreconditionViolation, fmt::format("score {} outside 1..10", s.score));
    sum += s.score;
  }
  return static_cast<double>(sum) / static_cast<double>(scores.size());
}

EvaluationReport make_report(std::vector<DimensionScore> scores, std::vector<std::string> failed) {
  EvaluationReport r;
  r.sevq = compute_sevq(scores);
  r.scores = std::move(scores);
  r.failed_dimensions = std::move(failed);
  r.partial = !r.failed_dimensions.empty() || r.scores.size() != kDimensionCount;
  return r;
}

DimensionScore parse_dimension_score(Dimension d, const std::string& reply) {
  auto m = text::first_integer(reply);
  if (!m || m->value < 1 || m->value > 10)
    raise(ErrorCode::ScoreParseFailure, "no score in 1..10 for " + to_string(d),
          {{"dimension", to_string(d)}, {"reply", reply}});
  auto rest = text::trim(m->rest);
  if (!rest.empty() && (rest.front() == ':' || rest.front() == '-' || rest.front() == '.')) rest = text::trim(rest.substr(1));
  if (rest.rfind("/10", 0) == 0) rest = text::trim(rest.substr(3));
  return DimensionScore{d, static_cast<int>(m->value), rest};
}

llm::PromptRequest build_evaluation_prompt(Dimension d, const std::string& code, const goals::Goal& goal) {
  llm::PromptRequest req;
  req.system = kEvaluationSystem;
  req.messages.push_back(
      {"user", fmt::format("Visualization goal: {}\nIntended visualization: {}\n\nCode:\n```\n{}\n```\n\n"
                           "Dimension: {}\nQuestion: {}\n\nAnswer as \"<score>: <rationale>\".",
                           goal.question, goal.visualization, code, to_string(d), dimension_prompt(d))});
  req.metadata["task"] = "evaluate/" + to_string(d);
  return req;
}

EvaluationReport evaluate(const std::string& code, const goals::Goal& goal, llm::TextProvider& provider,
                          const llm::GenerationConfig& config) {
  llm::GenerationConfig single = config;
  single.n_candidates = 1;
  std::vector<std::future<llm::ProviderResponse>> replies;
  for (auto d : all_dimensions()) {
    auto req = build_evaluation_prompt(d, code, goal);
    replies.push_back(std::async(std::launch::async, [&provider, single, req = std::move(req)] {
      return provider.generate(req, single);
    }));
  }
  std::vector<DimensionScore> scores;
  std::vector<std::string> failed;
  std::exception_ptr provider_error;
  for (std::size_t i = 0; i < replies.size(); ++i) {
    const auto d = all_dimensions()[i];
    try {
      const auto resp = replies[i].get();
      scores.push_back(parse_dimension_score(d, resp.candidates.empty() ? std::string() : resp.candidates.front()));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ScoreParseFailure) {
        if (!provider_error) provider_error = std::current_exception();
        continue;
      }
      spdlog::warn("{}", e.what());
      failed.push_back(to_string(d));
    }
  }
  if (provider_error) std::rethrow_exception(provider_error);
  if (scores.empty()) raise(ErrorCode::ScoreParseFailure, "no dimension could be scored", {{"dimensions", failed}});
  return make_report(std::move(scores), std::move(failed));
}

void to_json(nlohmann::json& j, const DimensionScore& s) {
  j = {{"dimension", to_string(s.dimension)}, {"score", s.score}, {"rationale", s.rationale}};
}

void from_json(const nlohmann::json& j, DimensionScore& s) {
  s.dimension = dimension_from_string(j.at("dimension").get<std::string>());
  s.score = j.at("score").get<int>();
  s.rationale = j.value("rationale", "");
}

void to_json(nlohmann::json& j, const EvaluationReport& r) {
  j = {{"scores", r.scores}, {"sevq", r.sevq}};
  if (r.partial) {
    j["partial"] = true;
    j["failed_dimensions"] = r.failed_dimensions;
  }
}

void from_json(const nlohmann::json& j, EvaluationReport& r) {
  r.scores = j.at("scores").get<std::vector<DimensionScore>>();
  r.sevq = j.at("sevq").get<double>();
  r.partial = j.value("partial", false);
  r.failed_dimensions = j.value("failed_dimensions", std::vector<std::string>{});
}

}  // namespace vizpipe::ops
