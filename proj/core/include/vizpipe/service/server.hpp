#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "vizpipe/service/api.hpp"

namespace vizpipe::service {

struct ServerOptions {
  std::string host = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  std::optional<std::filesystem::path> static_dir;  // built UI assets
  std::chrono::seconds ws_ping_interval{15};
  std::chrono::seconds reap_interval{30};
};

/// A part of a multipart/form-data body.
struct FormPart {
  std::string name;
  std::optional<std::string> filename;
  std::string content_type;
  std::string data;
};

/// Splits a multipart/form-data body. Throws PreconditionViolation when the
/// content type has no boundary or the body is malformed.
std::vector<FormPart> parse_multipart(const std::string& content_type, const std::string& body);

/// HTTP + WebSocket front end over Api, one thread per connection.
class Server {
 public:
  Server(Api& api, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts accepting. Returns the bound port.
  unsigned short start();
  /// Stops accepting, closes open connections and joins every thread.
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

  unsigned short port() const { return port_; }

 private:
  void accept_loop();
  void reap_loop();
  void serve_connection(int fd);

  Api& api_;
  ServerOptions options_;
  unsigned short port_ = 0;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::thread reaper_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<int, std::thread::id> open_fds_;
  std::size_t active_ = 0;
};

}  // namespace vizpipe::service
