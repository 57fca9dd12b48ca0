#include "vizpipe/service/events.hpp"

namespace vizpipe::service {

nlohmann::json to_json_value(const Event& e) {
  return {{"seq", e.seq}, {"stage", e.stage}, {"status", e.status}, {"payload", e.payload}};
}

void EventBus::publish(const std::string& session_id, std::string stage, std::string status, nlohmann::json payload) {
  std::lock_guard lock(mu_);
  Event e{++seq_[session_id], std::move(stage), std::move(status), std::move(payload)};
  auto& q = backlog_[session_id];
  q.push_back(e);
  while (q.size() > backlog_limit_) q.pop_front();
  for (const auto& [_, sub] : subscribers_)
    if (sub.session_id == session_id) sub.cb(e);
}

std::uint64_t EventBus::subscribe(const std::string& session_id, Callback cb) {
  std::lock_guard lock(mu_);
  const auto token = next_token_++;
  if (auto it = backlog_.find(session_id); it != backlog_.end())
    for (const auto& e : it->second) cb(e);
  subscribers_[token] = Subscriber{session_id, std::move(cb)};
  return token;
}

void EventBus::unsubscribe(std::uint64_t token) {
  std::lock_guard lock(mu_);
  subscribers_.erase(token);
}

std::vector<Event> EventBus::backlog(const std::string& session_id) const {
  std::lock_guard lock(mu_);
  auto it = backlog_.find(session_id);
  return it == backlog_.end() ? std::vector<Event>{} : std::vector<Event>(it->second.begin(), it->second.end());
}

void EventBus::forget(const std::string& session_id) {
  std::lock_guard lock(mu_);
  backlog_.erase(session_id);
  seq_.erase(session_id);
}

}  // namespace vizpipe::service
