#include "vizpipe/llm/scripted.hpp"

#include "vizpipe/error.hpp"
#include "vizpipe/text.hpp"

namespace vizpipe::llm {

ProviderResponse ScriptedProvider::generate(const PromptRequest& request, const GenerationConfig& config) {
  request.validate();
  config.validate();
  std::vector<std::string> texts;
  {
    std::lock_guard lock(mu_);
    texts = handler_(request, config);
  }
  if (texts.empty()) raise(ErrorCode::ProviderUnavailable, name_ + " returned no candidates");
  ProviderResponse response;
  response.candidates = std::move(texts);
  for (const auto& m : request.messages) response.usage.prompt_tokens += static_cast<int>(text::estimate_tokens(m.text));
  for (const auto& c : response.candidates) response.usage.completion_tokens += static_cast<int>(text::estimate_tokens(c));
  return clamp_candidates(std::move(response), config);
}

ProviderResponse UnavailableProvider::generate(const PromptRequest&, const GenerationConfig&) {
  raise(ErrorCode::ProviderUnavailable, "no provider configured");
}

}  // namespace vizpipe::llm
