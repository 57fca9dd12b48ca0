#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vizpipe::llm {

struct GenerationConfig {
  double temperature = 0.0;
  int n_candidates = 1;
  int max_tokens = 1024;
  std::string model_id = "gpt-3.5-turbo";
  std::optional<std::int64_t> seed;

  /// temperature=0, n=1: the reproducible setting used for benchmarks.
  static GenerationConfig benchmark_preset();

  /// Throws PreconditionViolation when a field is out of range.
  void validate() const;
};

enum class PromptMode { Completion, FillInMiddle };

struct Message {
  std::string role;
  std::string text;
  bool operator==(const Message&) const = default;
};

struct PromptRequest {
  std::string system;
  std::vector<Message> messages;
  PromptMode mode = PromptMode::Completion;
  // Present iff mode == FillInMiddle.
  std::optional<std::string> fim_prefix;
  std::optional<std::string> fim_suffix;
  // Routing and tracing tags (task, dataset, grammar, ...). Order-insensitive.
  std::map<std::string, std::string> metadata;

  /// Throws PreconditionViolation unless the FIM fields match the mode.
  void validate() const;
  std::string task() const;
};

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
  bool operator==(const Usage&) const = default;
};

struct ProviderResponse {
  std::vector<std::string> candidates;
  Usage usage;
  nlohmann::json provider_meta = nlohmann::json::object();
};

std::string to_string(PromptMode mode);
PromptMode prompt_mode_from_string(const std::string& s);

void to_json(nlohmann::json& j, const GenerationConfig& c);
void from_json(const nlohmann::json& j, GenerationConfig& c);
void to_json(nlohmann::json& j, const PromptRequest& r);
void from_json(const nlohmann::json& j, PromptRequest& r);
void to_json(nlohmann::json& j, const Usage& u);
void from_json(const nlohmann::json& j, Usage& u);

}  // namespace vizpipe::llm
