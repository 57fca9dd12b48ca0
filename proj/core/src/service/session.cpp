#include "vizpipe/service/session.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vizpipe/error.hpp"

namespace vizpipe::service {

namespace fs = std::filesystem;

namespace {

long long to_epoch_ms(Clock::time_point t) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

Clock::time_point from_epoch_ms(long long ms) { return Clock::time_point(std::chrono::milliseconds(ms)); }

}  // namespace

std::shared_ptr<VisualizationEntry> Session::visualization(int index) const {
  std::shared_lock lock(mu);
  if (index < 0 || index >= static_cast<int>(visualizations.size()))
    raise(ErrorCode::IndexNotFound, fmt::format("session {} has no visualization {}", id, index));
  return visualizations[static_cast<std::size_t>(index)];
}

nlohmann::json Session::to_json() const {
  std::shared_lock lock(mu);
  auto vis = nlohmann::json::array();
  for (const auto& v : visualizations) {
    nlohmann::json entry = {{"goal", v->goal}, {"grammar_id", v->grammar_id}, {"transcript", v->refinement.transcript()}};
    std::lock_guard report_lock(v->report_mu);
    entry["report"] = v->report ? nlohmann::json(*v->report) : nlohmann::json(nullptr);
    vis.push_back(std::move(entry));
  }
  return {{"session_id", id},
          {"dataset_path", dataset_path.string()},
          {"summary", summary},
          {"goals", goals},
          {"visualizations", vis},
          {"created_at_ms", to_epoch_ms(created_at)},
          {"last_active_ms", to_epoch_ms(last_active)}};
}

SessionStore::SessionStore(std::chrono::seconds ttl, std::optional<fs::path> persist_dir, Now now)
    : ttl_(ttl), persist_dir_(std::move(persist_dir)), now_(std::move(now)) {
  if (persist_dir_) fs::create_directories(*persist_dir_);
}

std::string SessionStore::new_id() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mu);
  return fmt::format("{:016x}{:016x}", rng(), rng());
}

bool SessionStore::valid_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) return false;
  return true;
}

bool SessionStore::expired(const Session& s) const {
  std::shared_lock lock(s.mu);
  return now_() - s.last_active > ttl_;
}

void SessionStore::insert(SessionPtr session) {
  {
    std::lock_guard lock(mu_);
    if (sessions_.count(session->id)) raise(ErrorCode::Conflict, "session id already in use: " + session->id);
    sessions_[session->id] = session;
  }
  persist(*session);
}

SessionPtr SessionStore::get(const std::string& id) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) raise(ErrorCode::SessionNotFound, "unknown session: " + id);
  if (expired(*it->second)) {
    sessions_.erase(it);
    raise(ErrorCode::SessionNotFound, "session expired: " + id);
  }
  {
    std::unique_lock session_lock(it->second->mu);
    it->second->last_active = now_();
  }
  return it->second;
}

bool SessionStore::contains(const std::string& id) const {
  std::lock_guard lock(mu_);
  return sessions_.count(id) != 0;
}

std::vector<std::string> SessionStore::expire() {
  std::lock_guard lock(mu_);
  std::vector<std::string> gone;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    if (expired(*it->second)) {
      gone.push_back(it->first);
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
  return gone;
}

std::size_t SessionStore::size() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

void SessionStore::persist(const Session& session) const {
  if (!persist_dir_) return;
  const auto tmp = *persist_dir_ / (session.id + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    out << session.to_json().dump(2) << "\n";
    if (!out) {
      spdlog::warn("could not write session snapshot {}", tmp.string());
      return;
    }
  }
  std::error_code ec;
  fs::rename(tmp, *persist_dir_ / (session.id + ".json"), ec);
  if (ec) spdlog::warn("could not publish session snapshot: {}", ec.message());
}

std::size_t SessionStore::restore() {
  if (!persist_dir_) return 0;
  std::size_t restored = 0;
  for (const auto& entry : fs::directory_iterator(*persist_dir_)) {
    if (entry.path().extension() != ".json") continue;
    try {
      std::ifstream in(entry.path(), std::ios::binary);
      const auto j = nlohmann::json::parse(in);
      auto s = std::make_shared<Session>();
      s->id = j.at("session_id").get<std::string>();
      s->dataset_path = j.at("dataset_path").get<std::string>();
      s->summary = j.at("summary").get<summary::DatasetSummary>();
      s->goals = j.at("goals").get<std::vector<goals::Goal>>();
      s->created_at = from_epoch_ms(j.at("created_at_ms").get<long long>());
      s->last_active = from_epoch_ms(j.at("last_active_ms").get<long long>());
      for (const auto& v : j.at("visualizations")) {
        const auto& t = v.at("transcript");
        auto e = std::make_shared<VisualizationEntry>(v.at("goal").get<goals::Goal>(),
                                                      v.at("grammar_id").get<std::string>(),
                                                      t.at("current").get<viz::CandidateProgram>(), s->dataset_path);
        if (v.contains("report") && v["report"].is_object()) e->report = v["report"].get<ops::EvaluationReport>();
        e->refinement.restore_history(t.at("turns").get<std::vector<ops::RefinementTurn>>());
        s->visualizations.push_back(std::move(e));
      }
      if (expired(*s)) continue;
      std::lock_guard lock(mu_);
      sessions_[s->id] = std::move(s);
      ++restored;
    } catch (const std::exception& e) {
      spdlog::warn("skipping unreadable session snapshot {}: {}", entry.path().string(), e.what());
    }
  }
  return restored;
}

}  // namespace vizpipe::service
