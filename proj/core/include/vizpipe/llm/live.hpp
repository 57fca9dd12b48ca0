#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>

#include "vizpipe/llm/cassette.hpp"
#include "vizpipe/llm/provider.hpp"

namespace vizpipe::llm {

struct LiveProviderOptions {
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  std::string model_id;  // overrides GenerationConfig::model_id when set
  std::size_t context_window = 16384;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds request_timeout{120};

  /// Reads VIZPIPE_API_KEY, VIZPIPE_BASE_URL and VIZPIPE_MODEL.
  static LiveProviderOptions from_env();
};

/// OpenAI-compatible chat-completions client. Fill-in-the-middle requests are
/// rendered as an instruction carrying the prefix and suffix around a hole.
class LiveProvider final : public TextProvider {
 public:
  explicit LiveProvider(LiveProviderOptions options) : options_(std::move(options)) {}

  ProviderResponse generate(const PromptRequest& request, const GenerationConfig& config) override;
  std::string name() const override { return "live"; }

  /// The chat-completions body sent for `request`.
  nlohmann::json build_body(const PromptRequest& request, const GenerationConfig& config) const;

 private:
  LiveProviderOptions options_;
};

enum class ProviderMode { Live, Replay, Hybrid };

ProviderMode provider_mode_from_string(const std::string& s);

struct ProviderSetup {
  ProviderMode mode = ProviderMode::Replay;
  std::optional<std::filesystem::path> cassette;
  LiveProviderOptions live = LiveProviderOptions::from_env();
};

/// Builds the provider selected by `setup`. Replay requires a cassette path;
/// hybrid replays what it can and sends misses to the live provider.
ProviderPtr make_provider(const ProviderSetup& setup);

}  // namespace vizpipe::llm
