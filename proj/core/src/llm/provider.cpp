#include "vizpipe/llm/provider.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "vizpipe/error.hpp"
#include "vizpipe/text.hpp"

namespace vizpipe::llm {

void check_token_budget(const PromptRequest& request, const GenerationConfig& config,
                        std::size_t context_window) {
  std::size_t prompt = text::estimate_tokens(request.system);
  for (const auto& m : request.messages) prompt += text::estimate_tokens(m.text);
  if (request.fim_prefix) prompt += text::estimate_tokens(*request.fim_prefix);
  if (request.fim_suffix) prompt += text::estimate_tokens(*request.fim_suffix);
  const auto needed = prompt + static_cast<std::size_t>(config.max_tokens);
  if (needed > context_window)
    raise(ErrorCode::TokenBudgetExceeded,
          fmt::format("request needs ~{} tokens, context window is {}", needed, context_window),
          {{"estimated_tokens", needed}, {"context_window", context_window}});
}

ProviderResponse clamp_candidates(ProviderResponse response, const GenerationConfig& config) {
  const auto n = static_cast<std::size_t>(std::max(config.n_candidates, 1));
  if (response.candidates.size() > n) response.candidates.resize(n);
  return response;
}

ProviderResponse CallLog::generate(const PromptRequest& request, const GenerationConfig& config) {
  {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
  }
  return inner_->generate(request, config);
}

std::size_t CallLog::count() const {
  std::lock_guard lock(mu_);
  return requests_.size();
}

std::size_t CallLog::count_task(const std::string& task_prefix) const {
  std::lock_guard lock(mu_);
  return static_cast<std::size_t>(std::count_if(requests_.begin(), requests_.end(), [&](const auto& r) {
    return r.task().rfind(task_prefix, 0) == 0;
  }));
}

std::vector<PromptRequest> CallLog::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

void CallLog::clear() {
  std::lock_guard lock(mu_);
  requests_.clear();
}

namespace {

constexpr const char* kCorrectnessSystem =
    "You are an expert reviewer of visualization code. Estimate the probability that the code "
    "below runs without error and correctly addresses the stated goal. Reply with a single number "
    "between 0 and 1 and nothing else.";

}  // namespace

double parse_probability(const std::string& reply) {
  auto value = text::first_real(reply);
  if (!value) raise(ErrorCode::UnparseableScore, "no number in correctness reply", {{"reply", reply}});
  return std::clamp(*value, 0.0, 1.0);
}

double score_correctness(TextProvider& provider, const std::string& code, const std::string& context,
                         const GenerationConfig& config) {
  if (code.empty()) raise(ErrorCode::PreconditionViolation, "score_correctness requires non-empty code");
  PromptRequest request;
  request.system = kCorrectnessSystem;
  request.messages.push_back({"user", "Context:\n" + context + "\n\nCode:\n" + code + "\n\nProbability:"});
  request.metadata["task"] = "score";
  GenerationConfig single = config;
  single.n_candidates = 1;
  single.temperature = 0.0;
  const auto response = provider.generate(request, single);
  if (response.candidates.empty()) raise(ErrorCode::UnparseableScore, "empty correctness reply");
  return parse_probability(response.candidates.front());
}

}  // namespace vizpipe::llm
