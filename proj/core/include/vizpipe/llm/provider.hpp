#pragma once

#include <atomic>
#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "vizpipe/llm/types.hpp"

namespace vizpipe::llm {

/// Port to a text-generation model. Implementations must be safe for
/// concurrent calls.
class TextProvider {
 public:
  virtual ~TextProvider() = default;

  /// Returns at most config.n_candidates texts. Throws vizpipe::Error with
  /// ProviderUnavailable, CassetteMiss or TokenBudgetExceeded.
  virtual ProviderResponse generate(const PromptRequest& request, const GenerationConfig& config) = 0;

  virtual std::string name() const = 0;
};

using ProviderPtr = std::shared_ptr<TextProvider>;

/// Rejects requests whose estimated prompt size plus completion budget
/// exceeds `context_window` tokens.
void check_token_budget(const PromptRequest& request, const GenerationConfig& config,
                        std::size_t context_window);

/// Truncates a response to the requested candidate count.
ProviderResponse clamp_candidates(ProviderResponse response, const GenerationConfig& config);

/// Decorator that records every request routed through it. Used to observe
/// how many calls an operation issues.
class CallLog final : public TextProvider {
 public:
  explicit CallLog(ProviderPtr inner) : inner_(std::move(inner)) {}

  ProviderResponse generate(const PromptRequest& request, const GenerationConfig& config) override;
  std::string name() const override { return inner_->name(); }

  std::size_t count() const;
  std::size_t count_task(const std::string& task_prefix) const;
  std::vector<PromptRequest> requests() const;
  void clear();

 private:
  ProviderPtr inner_;
  mutable std::mutex mu_;
  std::vector<PromptRequest> requests_;
};

/// Ask the provider for the probability that `code` correctly solves the
/// task in `context`. Throws UnparseableScore when the reply has no number;
/// callers treat that as 0.
double score_correctness(TextProvider& provider, const std::string& code, const std::string& context,
                         const GenerationConfig& config);

/// Parsing half of score_correctness: first real number, clamped to [0,1].
double parse_probability(const std::string& reply);

}  // namespace vizpipe::llm
