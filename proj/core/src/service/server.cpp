#include "vizpipe/service/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <charconv>
#include <deque>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/asio/post.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "vizpipe/error.hpp"
#include "vizpipe/text.hpp"

namespace vizpipe::service {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace fs = std::filesystem;
using tcp = asio::ip::tcp;
using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

namespace {

std::vector<std::string> split_path(std::string_view target) {
  const auto q = target.find('?');
  if (q != std::string_view::npos) target = target.substr(0, q);
  std::vector<std::string> parts;
  std::string cur;
  for (char c : target) {
    if (c == '/') {
      if (!cur.empty()) parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(std::move(cur));
  return parts;
}

std::string mime_type(const fs::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".json") return "application/json";
  if (ext == ".html") return "text/html; charset=utf-8";
  if (ext == ".js") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".svg") return "image/svg+xml";
  return "application/octet-stream";
}

Response make_response(const Request& req, http::status status, std::string body, const std::string& type) {
  Response res{status, req.version()};
  res.set(http::field::server, "vizpipe");
  res.set(http::field::content_type, type);
  res.set(http::field::access_control_allow_origin, "*");
  res.keep_alive(req.keep_alive());
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

Response json_response(const Request& req, int status, const nlohmann::json& j) {
  return make_response(req, static_cast<http::status>(status), j.dump(), "application/json");
}

Response error_response(const Request& req, int status, const std::string& cls, const std::string& message) {
  return json_response(req, status, {{"error", {{"class", cls}, {"message", message}, {"details", nullptr}}}});
}

std::optional<Response> file_response(const Request& req, const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return make_response(req, http::status::ok, ss.str(), mime_type(file));
}

nlohmann::json json_body(const Request& req) {
  if (req.body().empty()) return nlohmann::json::object();
  auto j = nlohmann::json::parse(req.body(), nullptr, false);
  if (j.is_discarded()) raise(ErrorCode::ParseError, "request body is not valid JSON");
  return j;
}

int parse_index(const std::string& s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) raise(ErrorCode::IndexNotFound, "bad visualization index: " + s);
  return v;
}

Response upload(Api& api, const Request& req) {
  const auto parts = parse_multipart(std::string(req[http::field::content_type]), req.body());
  const FormPart* file = nullptr;
  std::optional<std::string> session_id;
  nlohmann::json options = nlohmann::json::object();
  for (const auto& p : parts) {
    if (p.name == "file") {
      file = &p;
    } else if (p.name == "session_id") {
      session_id = text::trim(p.data);
    } else if (p.name == "n_goals") {
      const auto v = text::first_integer(p.data);
      if (!v) raise(ErrorCode::PreconditionViolation, "n_goals must be an integer");
      options["n_goals"] = v->value;
    } else if (p.name == "condition" || p.name == "persona") {
      options[p.name] = text::trim(p.data);
    }
  }
  if (!file) raise(ErrorCode::PreconditionViolation, "multipart field \"file\" is required");
  return json_response(req, 200, api.upload(file->filename.value_or("data.csv"), file->data, session_id, options));
}

Response route(Api& api, const ServerOptions& options, const Request& req) {
  const auto parts = split_path(std::string(req.target()));
  const auto method = req.method();
  const bool get = method == http::verb::get;
  const bool post = method == http::verb::post;

  if (method == http::verb::options) {
    auto res = make_response(req, http::status::no_content, "", "text/plain");
    res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
    res.set(http::field::access_control_allow_headers, "Content-Type");
    return res;
  }
  if (parts.size() == 1 && parts[0] == "health" && get) return json_response(req, 200, {{"status", "ok"}});
  if (parts.size() == 1 && parts[0] == "grammars" && get) return json_response(req, 200, api.grammars());
  if (parts.size() == 1 && parts[0] == "styles" && get) return json_response(req, 200, api.styles());
  if (parts.size() == 1 && parts[0] == "datasets" && post) return upload(api, req);
  if (!parts.empty() && parts[0] == "artifacts" && get) {
    std::string rel;
    for (std::size_t i = 1; i < parts.size(); ++i) rel += (i > 1 ? "/" : "") + parts[i];
    if (auto file = api.artifact_file(rel))
      if (auto res = file_response(req, *file)) return *res;
    return error_response(req, 404, "NotFound", "no such artifact");
  }
  if (parts.size() >= 2 && parts[0] == "sessions") {
    const auto& id = parts[1];
    if (parts.size() == 2 && get) return json_response(req, 200, api.get_session(id));
    if (parts.size() == 4 && parts[2] == "summary" && parts[3] == "refine" && post)
      return json_response(req, 200, api.refine_summary(id, json_body(req)));
    if (parts.size() == 3 && parts[2] == "visualize" && post)
      return json_response(req, 200, api.visualize(id, json_body(req)));
    if (parts.size() == 5 && parts[2] == "visualizations") {
      const int k = parse_index(parts[3]);
      const auto& op = parts[4];
      if (get && op == "transcript") return json_response(req, 200, api.transcript(id, k));
      if (post) {
        if (op == "refine") return json_response(req, 200, api.refine(id, k, json_body(req)));
        if (op == "explain") return json_response(req, 200, api.explain(id, k));
        if (op == "evaluate") return json_response(req, 200, api.evaluate(id, k));
        if (op == "repair") return json_response(req, 200, api.repair(id, k, json_body(req)));
        if (op == "recommend") return json_response(req, 200, api.recommend(id, k, json_body(req)));
        if (op == "infographic") return json_response(req, 200, api.infographic(id, k, json_body(req)));
      }
    }
  }
  if (get && options.static_dir) {
    fs::path rel;
    for (const auto& p : parts) {
      if (p == "..") return error_response(req, 404, "NotFound", "not found");
      rel /= p;
    }
    if (rel.empty()) rel = "index.html";
    if (auto res = file_response(req, *options.static_dir / rel)) return *res;
  }
  return error_response(req, 404, "NotFound", fmt::format("no route for {} {}", std::string(req.method_string()),
                                                          std::string(req.target())));
}

Response handle(Api& api, const ServerOptions& options, const Request& req) {
  try {
    return route(api, options, req);
  } catch (const Error& e) {
    return json_response(req, http_status(e.code()), body::error(e));
  } catch (const nlohmann::json::exception& e) {
    return error_response(req, 422, "ParseError", e.what());
  } catch (const std::exception& e) {
    spdlog::error("{} {}: {}", std::string(req.method_string()), std::string(req.target()), e.what());
    return error_response(req, 500, "InternalError", e.what());
  }
}

}  // namespace

std::vector<FormPart> parse_multipart(const std::string& content_type, const std::string& body) {
  const auto b = content_type.find("boundary=");
  if (content_type.find("multipart/form-data") == std::string::npos || b == std::string::npos)
    raise(ErrorCode::PreconditionViolation, "expected multipart/form-data with a boundary");
  std::string boundary = content_type.substr(b + 9);
  if (const auto semi = boundary.find(';'); semi != std::string::npos) boundary.resize(semi);
  boundary = text::trim(boundary);
  if (boundary.size() >= 2 && boundary.front() == '"' && boundary.back() == '"')
    boundary = boundary.substr(1, boundary.size() - 2);
  const std::string delim = "--" + boundary;

  std::vector<FormPart> parts;
  auto pos = body.find(delim);
  if (pos == std::string::npos) raise(ErrorCode::PreconditionViolation, "multipart body has no boundary");
  while (true) {
    pos += delim.size();
    if (body.compare(pos, 2, "--") == 0) break;
    if (body.compare(pos, 2, "\r\n") != 0) raise(ErrorCode::PreconditionViolation, "malformed multipart boundary line");
    pos += 2;
    const auto header_end = body.find("\r\n\r\n", pos);
    if (header_end == std::string::npos) raise(ErrorCode::PreconditionViolation, "multipart part without headers");
    FormPart part;
    std::istringstream headers(body.substr(pos, header_end - pos));
    std::string line;
    while (std::getline(headers, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      const auto key = text::to_lower(text::trim(line.substr(0, colon)));
      const auto value = text::trim(line.substr(colon + 1));
      if (key == "content-type") part.content_type = value;
      if (key != "content-disposition") continue;
      auto attr = [&](const std::string& name) -> std::optional<std::string> {
        const auto needle = name + "=\"";
        auto at = value.find(needle);
        while (at != std::string::npos && at > 0 && value[at - 1] != ' ' && value[at - 1] != ';')
          at = value.find(needle, at + 1);
        if (at == std::string::npos) return std::nullopt;
        const auto start = at + needle.size();
        const auto end = value.find('"', start);
        if (end == std::string::npos) return std::nullopt;
        return value.substr(start, end - start);
      };
      part.name = attr("name").value_or("");
      part.filename = attr("filename");
    }
    const auto data_start = header_end + 4;
    const auto next = body.find("\r\n" + delim, data_start);
    if (next == std::string::npos) raise(ErrorCode::PreconditionViolation, "unterminated multipart part");
    part.data = body.substr(data_start, next - data_start);
    parts.push_back(std::move(part));
    pos = next + 2;
  }
  return parts;
}

namespace {

using EventStream = websocket::stream<tcp::socket>;

// Pushes session events to one client until either side closes or the server
// stops. A read stays outstanding so close and ping frames from the client
// are answered; writes go out one at a time.
void stream_events(Api& api, const ServerOptions& options, const std::atomic<bool>& stopping, asio::io_context& ioc,
                   EventStream& ws, const std::string& session_id) {
  std::deque<std::string> outbox;
  bool writing = false;
  bool closing = false;
  bool closed = false;
  beast::flat_buffer inbound;

  std::function<void()> write_next = [&] {
    if (writing || closing || closed || outbox.empty()) return;
    writing = true;
    ws.text(true);
    ws.async_write(asio::buffer(outbox.front()), [&](beast::error_code ec, std::size_t) {
      writing = false;
      if (ec) {
        closed = true;
        return;
      }
      outbox.pop_front();
      write_next();
    });
  };
  std::function<void()> read_next = [&] {
    ws.async_read(inbound, [&](beast::error_code ec, std::size_t) {
      if (ec) {
        closed = true;
        return;
      }
      inbound.consume(inbound.size());  // clients have nothing to say
      read_next();
    });
  };

  // Runs on the publisher's thread; the bus guarantees no calls after unsubscribe.
  const auto token = api.events().subscribe(session_id, [&](const Event& e) {
    asio::post(ioc, [&, msg = to_json_value(e).dump()]() mutable {
      outbox.push_back(std::move(msg));
      write_next();
    });
  });
  read_next();
  auto last_ping = std::chrono::steady_clock::now();
  while (!closed) {
    ioc.run_for(std::chrono::milliseconds(100));
    if (ioc.stopped()) ioc.restart();
    if (closed || writing) continue;
    if (stopping && !closing) {
      closing = true;
      ws.async_close(websocket::close_code::going_away, [&](beast::error_code) { closed = true; });
    } else if (!closing && std::chrono::steady_clock::now() - last_ping > options.ws_ping_interval) {
      last_ping = std::chrono::steady_clock::now();
      writing = true;
      ws.async_ping({}, [&](beast::error_code ec) {
        writing = false;
        if (ec) closed = true;
        write_next();
      });
    }
  }
  api.events().unsubscribe(token);
}

}  // namespace

Server::Server(Api& api, ServerOptions options) : api_(api), options_(std::move(options)) {}

Server::~Server() { stop(); }

unsigned short Server::start() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (listen_fd_ < 0) raise(ErrorCode::IoError, "cannot create socket");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(options_.port);
  if (::inet_pton(AF_INET, options_.host == "localhost" ? "127.0.0.1" : options_.host.c_str(), &addr.sin_addr) != 1)
    raise(ErrorCode::ConfigError, "invalid listen address: " + options_.host);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 64) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    raise(ErrorCode::IoError, fmt::format("cannot listen on {}:{}", options_.host, options_.port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  stopping_ = false;
  acceptor_ = std::thread([this] { accept_loop(); });
  reaper_ = std::thread([this] { reap_loop(); });
  spdlog::info("listening on http://{}:{}", options_.host, port_);
  return port_;
}

void Server::accept_loop() {
  while (!stopping_) {
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (stopping_) break;
      if (errno == EINTR || errno == ECONNABORTED) continue;
      break;
    }
    std::lock_guard lock(mu_);
    ++active_;
    open_fds_[fd] = {};
    std::thread([this, fd] {
      serve_connection(fd);
      std::lock_guard inner(mu_);
      open_fds_.erase(fd);
      --active_;
      cv_.notify_all();
    }).detach();
  }
}

void Server::reap_loop() {
  std::unique_lock lock(mu_);
  while (!stopping_) {
    cv_.wait_for(lock, options_.reap_interval, [this] { return stopping_.load(); });
    if (stopping_) break;
    lock.unlock();
    for (const auto& id : api_.sessions().expire()) {
      api_.events().forget(id);
      spdlog::info("session {} expired", id);
    }
    lock.lock();
  }
}

void Server::serve_connection(int fd) {
  asio::io_context ioc;
  tcp::socket socket(ioc);
  beast::error_code ec;
  socket.assign(tcp::v4(), fd, ec);
  if (ec) {
    ::close(fd);
    return;
  }
  beast::flat_buffer buffer;
  while (!stopping_) {
    http::request_parser<http::string_body> parser;
    parser.body_limit(api_.config().max_upload_bytes + 1024 * 1024);
    http::read(socket, buffer, parser, ec);
    if (ec == http::error::body_limit) {
      Request stub;
      stub.version(11);
      auto res = error_response(stub, 413, "PayloadTooLarge", "request body exceeds the upload limit");
      res.keep_alive(false);
      http::write(socket, res, ec);
      break;
    }
    if (ec) break;
    auto req = parser.release();

    if (websocket::is_upgrade(req)) {
      const auto parts = split_path(std::string(req.target()));
      if (parts.size() != 3 || parts[0] != "sessions" || parts[2] != "events") {
        auto res = error_response(req, 404, "NotFound", "websocket endpoint is /sessions/{id}/events");
        http::write(socket, res, ec);
        break;
      }
      websocket::stream<tcp::socket> ws(std::move(socket));
      ws.accept(req, ec);
      if (ec) return;
      stream_events(api_, options_, stopping_, ioc, ws, parts[1]);
      return;
    }

    auto res = handle(api_, options_, req);
    http::write(socket, res, ec);
    if (ec || !req.keep_alive()) break;
  }
  socket.shutdown(tcp::socket::shutdown_both, ec);
}

void Server::stop() {
  if (listen_fd_ < 0) return;
  stopping_ = true;
  ::shutdown(listen_fd_, SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;
  {
    std::unique_lock lock(mu_);
    cv_.notify_all();
    // Event streams notice stopping_ and send a going-away frame; idle
    // keep-alive readers only leave once their socket is shut down.
    cv_.wait_for(lock, std::chrono::seconds(1), [this] { return active_ == 0; });
    for (const auto& [fd, _] : open_fds_) ::shutdown(fd, SHUT_RDWR);
    cv_.wait(lock, [this] { return active_ == 0; });
  }
  if (reaper_.joinable()) reaper_.join();
}

void Server::wait() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return stopping_.load(); });
}

}  // namespace vizpipe::service
