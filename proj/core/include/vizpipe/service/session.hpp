#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vizpipe/goals/goal_explorer.hpp"
#include "vizpipe/ops/evaluate.hpp"
#include "vizpipe/ops/viz_ops.hpp"
#include "vizpipe/summary/summarizer.hpp"

namespace vizpipe::service {

using Clock = std::chrono::system_clock;

/// One generated visualization and its refinement state.
struct VisualizationEntry {
  VisualizationEntry(goals::Goal g, std::string grammar, viz::CandidateProgram initial,
                     std::filesystem::path dataset)
      : goal(std::move(g)), grammar_id(std::move(grammar)), refinement(std::move(initial), std::move(dataset)) {}

  goals::Goal goal;
  std::string grammar_id;
  ops::RefinementSession refinement;
  std::mutex report_mu;
  std::optional<ops::EvaluationReport> report;
};

struct Session {
  std::string id;
  std::filesystem::path dataset_path;
  Clock::time_point created_at;

  // Guards the fields below. Mutations hold it exclusively.
  mutable std::shared_mutex mu;
  summary::DatasetSummary summary;
  std::vector<goals::Goal> goals;
  std::vector<std::shared_ptr<VisualizationEntry>> visualizations;
  Clock::time_point last_active;

  /// Throws IndexNotFound.
  std::shared_ptr<VisualizationEntry> visualization(int index) const;
  nlohmann::json to_json() const;
};

using SessionPtr = std::shared_ptr<Session>;

/// In-memory sessions with idle expiry and optional JSON snapshots (one
/// file per session).
class SessionStore {
 public:
  using Now = std::function<Clock::time_point()>;

  explicit SessionStore(std::chrono::seconds ttl, std::optional<std::filesystem::path> persist_dir = std::nullopt,
                        Now now = [] { return Clock::now(); });

  /// Fresh random id (32 hex characters).
  static std::string new_id();
  static bool valid_id(const std::string& id);

  /// Publishes a fully built session. Throws Conflict when the id exists.
  void insert(SessionPtr session);
  /// Throws SessionNotFound for unknown or expired sessions; refreshes
  /// last_active.
  SessionPtr get(const std::string& id);
  bool contains(const std::string& id) const;
  /// Drops idle sessions; returns their ids.
  std::vector<std::string> expire();
  void persist(const Session& session) const;
  /// Restores snapshots from the persistence directory.
  std::size_t restore();
  std::size_t size() const;

 private:
  bool expired(const Session& s) const;

  std::chrono::seconds ttl_;
  std::optional<std::filesystem::path> persist_dir_;
  Now now_;
  mutable std::mutex mu_;
  std::map<std::string, SessionPtr> sessions_;
};

}  // namespace vizpipe::service
