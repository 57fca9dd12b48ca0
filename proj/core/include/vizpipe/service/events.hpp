#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vizpipe::service {

/// Pipeline stages in the order they occur.
inline constexpr const char* kStageSummarize = "summarize";
inline constexpr const char* kStageGoals = "goals";
inline constexpr const char* kStageGenerate = "generate";
inline constexpr const char* kStageExecute = "execute";
inline constexpr const char* kStageFilter = "filter";

struct Event {
  std::uint64_t seq = 0;  // per-session, starting at 1
  std::string stage;
  std::string status;  // started | completed | failed
  nlohmann::json payload = nlohmann::json::object();
};

nlohmann::json to_json_value(const Event& e);

/// Per-session publish/subscribe with a bounded backlog so subscribers that
/// attach late still see the events of the current operation.
class EventBus {
 public:
  using Callback = std::function<void(const Event&)>;

  explicit EventBus(std::size_t backlog = 64) : backlog_limit_(backlog) {}

  void publish(const std::string& session_id, std::string stage, std::string status,
               nlohmann::json payload = nlohmann::json::object());

  /// Delivers the backlog, then live events, in sequence order. Callbacks
  /// run under the bus lock, so they must only enqueue. Returns a token
  /// for unsubscribe.
  std::uint64_t subscribe(const std::string& session_id, Callback cb);
  void unsubscribe(std::uint64_t token);

  std::vector<Event> backlog(const std::string& session_id) const;
  void forget(const std::string& session_id);

 private:
  struct Subscriber {
    std::string session_id;
    Callback cb;
  };
  std::size_t backlog_limit_;
  mutable std::mutex mu_;
  std::uint64_t next_token_ = 1;
  std::map<std::uint64_t, Subscriber> subscribers_;
  std::map<std::string, std::deque<Event>> backlog_;
  std::map<std::string, std::uint64_t> seq_;
};

}  // namespace vizpipe::service
