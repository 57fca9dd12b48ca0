#pragma once

#include <functional>
#include <mutex>

#include "vizpipe/llm/provider.hpp"

namespace vizpipe::llm {

/// Provider backed by a callback. Calls are serialized so handlers may keep
/// state (e.g. a fault-injection schedule keyed on call order).
class ScriptedProvider final : public TextProvider {
 public:
  using Handler = std::function<std::vector<std::string>(const PromptRequest&, const GenerationConfig&)>;

  explicit ScriptedProvider(Handler handler, std::string name = "scripted")
      : handler_(std::move(handler)), name_(std::move(name)) {}

  ProviderResponse generate(const PromptRequest& request, const GenerationConfig& config) override;
  std::string name() const override { return name_; }

 private:
  Handler handler_;
  std::string name_;
  std::mutex mu_;
};

/// Always fails with ProviderUnavailable.
class UnavailableProvider final : public TextProvider {
 public:
  ProviderResponse generate(const PromptRequest&, const GenerationConfig&) override;
  std::string name() const override { return "unavailable"; }
};

}  // namespace vizpipe::llm
