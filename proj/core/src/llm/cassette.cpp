#include "vizpipe/llm/cassette.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "vizpipe/error.hpp"
#include "vizpipe/hash.hpp"

namespace vizpipe::llm {

nlohmann::json canonical_form(const PromptRequest& request, const GenerationConfig& config) {
  // nlohmann::json objects are std::map backed, so keys serialize sorted.
  nlohmann::json cfg = config;
  nlohmann::json req = request;
  return {{"config", std::move(cfg)}, {"request", std::move(req)}};
}

std::string fingerprint(const PromptRequest& request, const GenerationConfig& config) {
  return sha256_hex(canonical_form(request, config).dump());
}

std::string request_summary(const PromptRequest& request) {
  std::string tags;
  for (const auto& [k, v] : request.metadata) tags += fmt::format("{}={} ", k, v);
  std::string last = request.messages.empty() ? std::string() : request.messages.back().text;
  if (last.size() > 80) last = last.substr(0, 80) + "...";
  for (auto& c : last)
    if (c == '\n') c = ' ';
  return fmt::format("[{}] {}{}", to_string(request.mode), tags, last);
}

Cassette Cassette::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open cassette " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) raise(ErrorCode::ParseError, "cassette is not valid JSON: " + path.string());
  return from_json(j);
}

Cassette Cassette::from_json(const nlohmann::json& j) {
  if (!j.is_array()) raise(ErrorCode::ParseError, "cassette must be a JSON array");
  Cassette c;
  for (const auto& e : j) {
    CassetteEntry entry;
    entry.fingerprint = e.at("fingerprint").get<std::string>();
    entry.request_summary = e.value("request_summary", "");
    const auto& resp = e.at("response");
    entry.response.candidates = resp.at("candidates").get<std::vector<std::string>>();
    if (resp.contains("usage")) entry.response.usage = resp["usage"].get<Usage>();
    if (c.index_.count(entry.fingerprint))
      raise(ErrorCode::ParseError, "duplicate fingerprint in cassette: " + entry.fingerprint);
    c.put(std::move(entry));
  }
  return c;
}

nlohmann::json Cassette::to_json() const {
  // Sorted so concurrent recording still yields a stable file.
  std::vector<const CassetteEntry*> sorted;
  for (const auto& e : entries_) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(),
            [](const CassetteEntry* a, const CassetteEntry* b) { return a->fingerprint < b->fingerprint; });
  auto out = nlohmann::json::array();
  for (const auto* p : sorted) {
    const auto& e = *p;
    out.push_back({{"fingerprint", e.fingerprint},
                   {"request_summary", e.request_summary},
                   {"response", {{"candidates", e.response.candidates}, {"usage", e.response.usage}}}});
  }
  return out;
}

void Cassette::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write cassette " + path.string());
  out << to_json().dump(2) << '\n';
}

const ProviderResponse* Cassette::find(const std::string& fp) const {
  auto it = index_.find(fp);
  return it == index_.end() ? nullptr : &entries_[it->second].response;
}

void Cassette::put(CassetteEntry entry) {
  if (auto it = index_.find(entry.fingerprint); it != index_.end()) {
    entries_[it->second] = std::move(entry);
    return;
  }
  index_.emplace(entry.fingerprint, entries_.size());
  entries_.push_back(std::move(entry));
}

ProviderResponse ReplayProvider::generate(const PromptRequest& request, const GenerationConfig& config) {
  request.validate();
  config.validate();
  check_token_budget(request, config, context_window_);
  const auto fp = fingerprint(request, config);
  const auto* hit = cassette_.find(fp);
  if (!hit)
    raise(ErrorCode::CassetteMiss, "no recorded response for " + request_summary(request),
          {{"fingerprint", fp}});
  return clamp_candidates(*hit, config);
}

ProviderResponse RecordingProvider::generate(const PromptRequest& request, const GenerationConfig& config) {
  const auto fp = fingerprint(request, config);
  if (replay_first_) {
    std::shared_lock lock(mu_);
    if (const auto* hit = cassette_.find(fp)) return clamp_candidates(*hit, config);
  }
  auto response = inner_->generate(request, config);
  {
    std::unique_lock lock(mu_);
    cassette_.put({fp, request_summary(request), response});
  }
  return response;
}

Cassette RecordingProvider::snapshot() const {
  std::shared_lock lock(mu_);
  return cassette_;
}

void RecordingProvider::save(const std::filesystem::path& path) const { snapshot().save(path); }

}  // namespace vizpipe::llm
