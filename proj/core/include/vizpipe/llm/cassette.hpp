#pragma once

#include <filesystem>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "vizpipe/llm/provider.hpp"

namespace vizpipe::llm {

/// Canonical JSON identity of a request: metadata keys sorted, message text
/// byte-for-byte, all GenerationConfig fields included.
nlohmann::json canonical_form(const PromptRequest& request, const GenerationConfig& config);

/// Lowercase hex SHA-256 of the compact dump of canonical_form().
std::string fingerprint(const PromptRequest& request, const GenerationConfig& config);

/// Short human-readable description stored next to each cassette entry.
std::string request_summary(const PromptRequest& request);

struct CassetteEntry {
  std::string fingerprint;
  std::string request_summary;
  ProviderResponse response;
};

/// Recorded request/response pairs. Fingerprints are unique.
class Cassette {
 public:
  Cassette() = default;

  static Cassette load(const std::filesystem::path& path);
  static Cassette from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void save(const std::filesystem::path& path) const;

  const ProviderResponse* find(const std::string& fingerprint) const;
  /// Inserts or replaces the entry with the same fingerprint.
  void put(CassetteEntry entry);
  const std::vector<CassetteEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<CassetteEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Exact-match replay. Read-only after construction.
class ReplayProvider final : public TextProvider {
 public:
  explicit ReplayProvider(Cassette cassette, std::size_t context_window = 16384)
      : cassette_(std::move(cassette)), context_window_(context_window) {}

  ProviderResponse generate(const PromptRequest& request, const GenerationConfig& config) override;
  std::string name() const override { return "replay"; }
  const Cassette& cassette() const { return cassette_; }

 private:
  Cassette cassette_;
  std::size_t context_window_;
};

/// Passes every call to `inner` and records the exchange. In hybrid mode a
/// cassette is consulted first and only misses reach `inner`.
class RecordingProvider final : public TextProvider {
 public:
  RecordingProvider(ProviderPtr inner, Cassette seed = {}, bool replay_first = false)
      : inner_(std::move(inner)), cassette_(std::move(seed)), replay_first_(replay_first) {}

  ProviderResponse generate(const PromptRequest& request, const GenerationConfig& config) override;
  std::string name() const override { return replay_first_ ? "hybrid" : "recording"; }

  Cassette snapshot() const;
  void save(const std::filesystem::path& path) const;

 private:
  ProviderPtr inner_;
  mutable std::shared_mutex mu_;
  Cassette cassette_;
  bool replay_first_;
};

}  // namespace vizpipe::llm
