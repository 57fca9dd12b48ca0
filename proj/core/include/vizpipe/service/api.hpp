#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "vizpipe/error.hpp"
#include "vizpipe/info/infographer.hpp"
#include "vizpipe/llm/provider.hpp"
#include "vizpipe/service/events.hpp"
#include "vizpipe/service/session.hpp"
#include "vizpipe/viz/generator.hpp"

namespace vizpipe::service {

inline constexpr std::size_t kDefaultUploadCap = 20u * 1024u * 1024u;

struct ApiConfig {
  llm::ProviderPtr provider;
  info::IgmPtr igm;  // null disables infographics (502)
  // Uploads, sandbox runs and infographics live below this directory and
  // are served under /artifacts.
  std::filesystem::path work_root;
  std::optional<std::filesystem::path> persist_dir;
  std::chrono::seconds session_ttl{3600};
  std::size_t max_upload_bytes = kDefaultUploadCap;
  int n_goals = 5;
  summary::SummaryCondition condition = summary::SummaryCondition::Enrich;
  std::string default_grammar = "vegalite";
  llm::GenerationConfig generation = llm::GenerationConfig::benchmark_preset();
  viz::ExecutionLimits limits;
  int repair_depth = 2;
  std::uint64_t sample_seed = 0;
  std::optional<std::filesystem::path> styles_file;  // bundled library when unset
  SessionStore::Now clock = [] { return Clock::now(); };
};

/// JSON bodies shared by the HTTP API and the CLI.
namespace body {
nlohmann::json summary(const summary::DatasetSummary& s);
nlohmann::json goals(const std::vector<goals::Goal>& g);
/// Candidate with an artifact_url relative to `artifact_root` when the
/// artifact lives below it.
nlohmann::json candidate(const viz::CandidateProgram& c, const std::filesystem::path& artifact_root);
nlohmann::json visualization(int index, const goals::Goal& goal, const viz::VisualizationResult& r,
                             const std::filesystem::path& artifact_root);
nlohmann::json error(const Error& e);
}  // namespace body

/// HTTP status for an error class: 404 unknown session or index, 409
/// concurrent mutation, 413 oversized upload, 502 provider failure, 422
/// other validation failures, 500 I/O.
int http_status(ErrorCode code);

/// Transport-independent implementation of every endpoint. Methods throw
/// vizpipe::Error; the server maps them with http_status().
class Api {
 public:
  explicit Api(ApiConfig config);

  /// Upload runs summarization and goal generation; the session becomes
  /// visible only after both succeed. `session_id` may be supplied by the
  /// client so it can subscribe to events before uploading.
  nlohmann::json upload(const std::string& filename, const std::string& content,
                        const std::optional<std::string>& session_id, const nlohmann::json& options);
  nlohmann::json get_session(const std::string& id);
  nlohmann::json refine_summary(const std::string& id, const nlohmann::json& edits);
  nlohmann::json visualize(const std::string& id, const nlohmann::json& request);
  nlohmann::json refine(const std::string& id, int index, const nlohmann::json& request);
  nlohmann::json explain(const std::string& id, int index);
  nlohmann::json evaluate(const std::string& id, int index);
  nlohmann::json repair(const std::string& id, int index, const nlohmann::json& request);
  nlohmann::json recommend(const std::string& id, int index, const nlohmann::json& request);
  nlohmann::json infographic(const std::string& id, int index, const nlohmann::json& request);
  nlohmann::json transcript(const std::string& id, int index);
  nlohmann::json grammars() const;
  nlohmann::json styles() const;

  /// File below work_root for an /artifacts/<relative> request, or nullopt
  /// when the path escapes it or does not exist.
  std::optional<std::filesystem::path> artifact_file(const std::string& relative) const;

  EventBus& events() { return events_; }
  SessionStore& sessions() { return sessions_; }
  const ApiConfig& config() const { return config_; }
  const viz::Sandbox& sandbox() const { return sandbox_; }

 private:
  void touch(Session& s);
  llm::TextProvider& provider() const;

  ApiConfig config_;
  SessionStore sessions_;
  EventBus events_;
  viz::Sandbox sandbox_;
  info::StyleLibrary styles_;
  std::mutex styles_mu_;
};

}  // namespace vizpipe::service
