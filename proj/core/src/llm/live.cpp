#include "vizpipe/llm/live.hpp"

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "vizpipe/error.hpp"

namespace vizpipe::llm {

namespace {

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : std::move(fallback);
}

// Splits "https://host:port/v1" into ("https://host:port", "/v1").
std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string path = url.substr(path_start);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, path_start), path};
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

LiveProviderOptions LiveProviderOptions::from_env() {
  LiveProviderOptions o;
  o.api_key = env_or("VIZPIPE_API_KEY", "");
  o.base_url = env_or("VIZPIPE_BASE_URL", o.base_url);
  o.model_id = env_or("VIZPIPE_MODEL", "");
  return o;
}

nlohmann::json LiveProvider::build_body(const PromptRequest& request, const GenerationConfig& config) const {
  auto messages = nlohmann::json::array();
  if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.text}});
  if (request.mode == PromptMode::FillInMiddle) {
    std::string hole =
        "Fill in the hole marked <FILL> in the program below. Reply with only the code that replaces "
        "<FILL>; do not repeat the surrounding code.\n\n";
    hole += *request.fim_prefix + "<FILL>" + *request.fim_suffix;
    messages.push_back({{"role", "user"}, {"content", hole}});
  }
  nlohmann::json body = {{"model", options_.model_id.empty() ? config.model_id : options_.model_id},
                         {"messages", std::move(messages)},
                         {"temperature", config.temperature},
                         {"n", config.n_candidates},
                         {"max_tokens", config.max_tokens}};
  if (config.seed) body["seed"] = *config.seed;
  return body;
}

ProviderResponse LiveProvider::generate(const PromptRequest& request, const GenerationConfig& config) {
  request.validate();
  config.validate();
  check_token_budget(request, config, options_.context_window);

  const auto [host, prefix] = split_base_url(options_.base_url);
  httplib::Client client(host);
  client.set_read_timeout(options_.request_timeout);
  client.set_connection_timeout(std::chrono::seconds(10));
  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);
  const std::string body = build_body(request, config).dump();

  auto backoff = options_.initial_backoff;
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto res = client.Post(prefix + "/chat/completions", headers, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      if (retryable(res->status)) continue;
      break;
    }
    auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices")) {
      last_error = "malformed completion body";
      break;
    }
    ProviderResponse out;
    for (const auto& choice : j["choices"]) out.candidates.push_back(choice.at("message").value("content", ""));
    if (j.contains("usage")) {
      out.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0);
      out.usage.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
    out.provider_meta = {{"model", j.value("model", "")}, {"id", j.value("id", "")}};
    if (out.candidates.empty()) {
      last_error = "no choices returned";
      break;
    }
    return clamp_candidates(std::move(out), config);
  }
  spdlog::warn("live provider failed: {}", last_error);
  raise(ErrorCode::ProviderUnavailable, "live provider failed: " + last_error);
}

ProviderMode provider_mode_from_string(const std::string& s) {
  if (s == "live") return ProviderMode::Live;
  if (s == "replay") return ProviderMode::Replay;
  if (s == "hybrid") return ProviderMode::Hybrid;
  raise(ErrorCode::ConfigError, "unknown provider mode: " + s);
}

ProviderPtr make_provider(const ProviderSetup& setup) {
  switch (setup.mode) {
    case ProviderMode::Live:
      return std::make_shared<LiveProvider>(setup.live);
    case ProviderMode::Replay:
      if (!setup.cassette) raise(ErrorCode::ConfigError, "replay mode requires a cassette");
      return std::make_shared<ReplayProvider>(Cassette::load(*setup.cassette), setup.live.context_window);
    case ProviderMode::Hybrid: {
      Cassette seed;
      if (setup.cassette && std::filesystem::exists(*setup.cassette)) seed = Cassette::load(*setup.cassette);
      return std::make_shared<RecordingProvider>(std::make_shared<LiveProvider>(setup.live), std::move(seed),
                                                 /*replay_first=*/true);
    }
  }
  raise(ErrorCode::ConfigError, "unhandled provider mode");
}

}  // namespace vizpipe::llm
