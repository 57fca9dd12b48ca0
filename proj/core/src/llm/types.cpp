#include "vizpipe/llm/types.hpp"

#include "vizpipe/error.hpp"

namespace vizpipe::llm {

GenerationConfig GenerationConfig::benchmark_preset() {
  GenerationConfig c;
  c.temperature = 0.0;
  c.n_candidates = 1;
  return c;
}

void GenerationConfig::validate() const {
  if (!(temperature >= 0.0 && temperature <= 2.0))
    raise(ErrorCode::PreconditionViolation, "temperature must lie in [0, 2]");
  if (n_candidates < 1) raise(ErrorCode::PreconditionViolation, "n_candidates must be >= 1");
  if (max_tokens < 1) raise(ErrorCode::PreconditionViolation, "max_tokens must be >= 1");
}

void PromptRequest::validate() const {
  const bool fim = mode == PromptMode::FillInMiddle;
  if (fim != fim_prefix.has_value() || fim != fim_suffix.has_value())
    raise(ErrorCode::PreconditionViolation, "fim_prefix/fim_suffix must be present iff mode is fill_in_middle");
}

std::string PromptRequest::task() const {
  auto it = metadata.find("task");
  return it == metadata.end() ? std::string() : it->second;
}

std::string to_string(PromptMode mode) {
  return mode == PromptMode::FillInMiddle ? "fill_in_middle" : "completion";
}

PromptMode prompt_mode_from_string(const std::string& s) {
  if (s == "fill_in_middle") return PromptMode::FillInMiddle;
  if (s == "completion") return PromptMode::Completion;
  raise(ErrorCode::ParseError, "unknown prompt mode: " + s);
}

void to_json(nlohmann::json& j, const GenerationConfig& c) {
  j = {{"temperature", c.temperature},
       {"n_candidates", c.n_candidates},
       {"max_tokens", c.max_tokens},
       {"model_id", c.model_id},
       {"seed", c.seed ? nlohmann::json(*c.seed) : nlohmann::json(nullptr)}};
}

void from_json(const nlohmann::json& j, GenerationConfig& c) {
  c = GenerationConfig{};
  c.temperature = j.value("temperature", c.temperature);
  c.n_candidates = j.value("n_candidates", c.n_candidates);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.model_id = j.value("model_id", c.model_id);
  if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::int64_t>();
}

void to_json(nlohmann::json& j, const PromptRequest& r) {
  auto messages = nlohmann::json::array();
  for (const auto& m : r.messages) messages.push_back({{"role", m.role}, {"text", m.text}});
  j = {{"system", r.system},
       {"messages", std::move(messages)},
       {"mode", to_string(r.mode)},
       {"metadata", r.metadata}};
  j["fim_prefix"] = r.fim_prefix ? nlohmann::json(*r.fim_prefix) : nlohmann::json(nullptr);
  j["fim_suffix"] = r.fim_suffix ? nlohmann::json(*r.fim_suffix) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, PromptRequest& r) {
  r = PromptRequest{};
  r.system = j.value("system", "");
  for (const auto& m : j.value("messages", nlohmann::json::array()))
    r.messages.push_back({m.at("role").get<std::string>(), m.at("text").get<std::string>()});
  r.mode = prompt_mode_from_string(j.value("mode", "completion"));
  if (j.contains("fim_prefix") && !j["fim_prefix"].is_null()) r.fim_prefix = j["fim_prefix"].get<std::string>();
  if (j.contains("fim_suffix") && !j["fim_suffix"].is_null()) r.fim_suffix = j["fim_suffix"].get<std::string>();
  if (j.contains("metadata"))
    for (const auto& [k, v] : j["metadata"].items()) r.metadata[k] = v.get<std::string>();
}

void to_json(nlohmann::json& j, const Usage& u) {
  j = {{"prompt_tokens", u.prompt_tokens}, {"completion_tokens", u.completion_tokens}};
}

void from_json(const nlohmann::json& j, Usage& u) {
  u.prompt_tokens = j.value("prompt_tokens", 0);
  u.completion_tokens = j.value("completion_tokens", 0);
}

}  // namespace vizpipe::llm
