#include "lenia/server.hpp"

#include "lenia/error.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace lenia {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

void parse_bind(const std::string& bind, ServerConfig& config) {
  const auto colon = bind.rfind(':');
  std::string host = colon == std::string::npos ? "" : bind.substr(0, colon);
  const std::string port = colon == std::string::npos ? bind : bind.substr(colon + 1);
  try {
    std::size_t used = 0;
    const int p = std::stoi(port, &used);
    if (used != port.size() || p < 0 || p > 65535) {
      throw std::out_of_range("port");
    }
    config.port = static_cast<unsigned short>(p);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "bad bind address \"" + bind + "\" (expected host:port)");
  }
  if (!host.empty()) {
    boost::system::error_code ec;
    net::ip::make_address(host, ec);
    if (ec) {
      throw Error(ErrorCode::InvalidArgument, "bad bind host \"" + host + "\"");
    }
    config.address = host;
  }
}

namespace {

std::string_view mime_type(const fs::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".png") return "image/png";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".wasm") return "application/wasm";
  return "application/octet-stream";
}

/// Maps a request target onto a file under `root`; empty when it escapes the root.
fs::path resolve_asset(const fs::path& root, std::string_view target) {
  std::string path(target.substr(0, target.find_first_of("?#")));
  if (path.empty() || path.front() != '/') {
    return {};
  }
  fs::path rel = fs::path(path.substr(1)).lexically_normal();
  if (rel.empty() || rel == ".") {
    rel = "index.html";
  }
  if (rel.is_absolute() || *rel.begin() == "..") {
    return {};
  }
  return root / rel;
}

}  // namespace

// Per-session stepping threads.

class Clocks {
 public:
  explicit Clocks(SessionHub& hub) : hub_(hub) {}
  ~Clocks() { stop_all(); }

  void start(const std::string& id) {
    std::lock_guard lock(mutex_);
    if (threads_.contains(id)) {
      return;
    }
    threads_.emplace(id, std::jthread([this, id](std::stop_token stop) { loop(id, stop); }));
  }

  void stop(const std::string& id) {
    std::jthread t;
    {
      std::lock_guard lock(mutex_);
      auto it = threads_.find(id);
      if (it == threads_.end()) {
        return;
      }
      t = std::move(it->second);
      threads_.erase(it);
    }
    t.request_stop();
    wake_.notify_all();
  }

  void stop_all() {
    std::map<std::string, std::jthread> threads;
    {
      std::lock_guard lock(mutex_);
      threads.swap(threads_);
    }
    for (auto& [id, t] : threads) {
      t.request_stop();
    }
    wake_.notify_all();
  }

 private:
  void loop(const std::string& id, std::stop_token stop) {
    using clock = std::chrono::steady_clock;
    auto next = clock::now();
    while (!stop.stop_requested()) {
      auto session = hub_.find(id);
      if (!session) {
        return;
      }
      hub_.advance(id);
      next += std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / session->steps_per_second()));
      // A slow step resets the schedule instead of bursting to catch up.
      if (next < clock::now()) {
        next = clock::now();
      }
      std::unique_lock lock(sleep_mutex_);
      wake_.wait_until(lock, next, [&] { return stop.stop_requested(); });
    }
  }

  SessionHub& hub_;
  std::mutex mutex_;
  std::map<std::string, std::jthread> threads_;
  std::mutex sleep_mutex_;
  std::condition_variable wake_;
};

// Websocket connection. All socket work runs on the I/O thread; clock threads hand frames
// over through post(). Only the newest undelivered frame is kept.

class WsConnection : public FrameSink, public std::enable_shared_from_this<WsConnection> {
 public:
  WsConnection(tcp::socket socket, SessionHub& hub, Clocks& clocks)
      : ws_(std::move(socket)), hub_(hub), clocks_(clocks) {}

  void start(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (!ec) {
        self->read();
      }
    });
  }

  void send_frame(std::shared_ptr<const std::string> frame) override {
    net::post(ws_.get_executor(), [self = shared_from_this(), frame = std::move(frame)] {
      self->pending_frame_ = frame;
      self->flush();
    });
  }

 private:
  struct Outgoing {
    std::shared_ptr<const std::string> bytes;
    bool binary;
  };

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->hub_.disconnect(self.get());
        return;
      }
      self->on_message();
      self->read();
    });
  }

  void on_message() {
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    Json reply;
    if (!ws_.got_text()) {
      reply = Json{{"type", "error"}, {"code", to_string(ErrorCode::InvalidArgument)}, {"message", "control messages are JSON text"},
                   {"session", nullptr}};
    } else {
      reply = hub_.dispatch_text(text, shared_from_this());
    }
    const std::string type = reply.value("type", "");
    if (type == "created") {
      clocks_.start(reply["session"]);
    } else if (type == "destroyed") {
      clocks_.stop(reply["session"]);
    }
    replies_.push_back({std::make_shared<const std::string>(reply.dump()), false});
    flush();
  }

  void flush() {
    if (writing_) {
      return;
    }
    Outgoing next;
    if (!replies_.empty()) {
      next = std::move(replies_.front());
      replies_.pop_front();
    } else if (pending_frame_) {
      next = {std::move(pending_frame_), true};
      pending_frame_.reset();
    } else {
      return;
    }
    writing_ = true;
    ws_.binary(next.binary);
    ws_.async_write(net::buffer(*next.bytes), [self = shared_from_this(), keep = next.bytes](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) {
        self->hub_.disconnect(self.get());
        return;
      }
      self->flush();
    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  SessionHub& hub_;
  Clocks& clocks_;
  beast::flat_buffer buffer_;
  std::deque<Outgoing> replies_;
  std::shared_ptr<const std::string> pending_frame_;
  bool writing_ = false;
};

// Plain HTTP: static assets, or an upgrade to a websocket.

class HttpConnection : public std::enable_shared_from_this<HttpConnection> {
 public:
  HttpConnection(tcp::socket socket, const ServerConfig& config, SessionHub& hub, Clocks& clocks)
      : stream_(std::move(socket)), config_(config), hub_(hub), clocks_(clocks) {}

  void start() { read(); }

 private:
  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (!ec) {
        self->on_request();
      }
    });
  }

  void on_request() {
    if (websocket::is_upgrade(req_)) {
      stream_.expires_never();
      std::make_shared<WsConnection>(stream_.release_socket(), hub_, clocks_)->start(std::move(req_));
      return;
    }
    auto res = std::make_shared<http::response<http::string_body>>(respond());
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (!ec && res->keep_alive()) {
        self->read();
      } else {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
      }
    });
  }

  http::response<http::string_body> respond() {
    auto reply = [&](http::status status, std::string_view type, std::string body) {
      http::response<http::string_body> res{status, req_.version()};
      res.set(http::field::content_type, std::string(type));
      res.keep_alive(req_.keep_alive());
      res.body() = std::move(body);
      res.prepare_payload();
      return res;
    };
    if (req_.method() != http::verb::get && req_.method() != http::verb::head) {
      return reply(http::status::method_not_allowed, "text/plain", "GET only\n");
    }
    const fs::path file = config_.asset_dir.empty() ? fs::path{} : resolve_asset(config_.asset_dir, std::string_view(req_.target().data(), req_.target().size()));
    std::error_code ec;
    if (file.empty() || !fs::is_regular_file(file, ec)) {
      return reply(http::status::not_found, "text/plain", "not found\n");
    }
    std::ifstream in(file, std::ios::binary);
    std::ostringstream body;
    body << in.rdbuf();
    auto res = reply(http::status::ok, mime_type(file), body.str());
    if (req_.method() == http::verb::head) {
      res.body().clear();
    }
    return res;
  }

  beast::tcp_stream stream_;
  const ServerConfig& config_;
  SessionHub& hub_;
  Clocks& clocks_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

struct Server::Impl {
  explicit Impl(ServerConfig c)
      : config(std::move(c)), hub(config.params_dir), clocks(hub), acceptor(io) {
    beast::error_code ec;
    const tcp::endpoint endpoint{net::ip::make_address(config.address, ec), config.port};
    if (ec) {
      throw Error(ErrorCode::InvalidArgument, "bad bind host \"" + config.address + "\"");
    }
    acceptor.open(endpoint.protocol());
    acceptor.set_option(net::socket_base::reuse_address(true));
    acceptor.bind(endpoint, ec);
    if (ec) {
      throw Error(ErrorCode::Io, "cannot bind " + config.address + ":" + std::to_string(config.port) + ": " +
                                     ec.message());
    }
    acceptor.listen();
  }

  void accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        return;  // acceptor closed
      }
      std::make_shared<HttpConnection>(std::move(socket), config, hub, clocks)->start();
      accept();
    });
  }

  ServerConfig config;
  SessionHub hub;
  Clocks clocks;
  net::io_context io{1};
  tcp::acceptor acceptor;
};

Server::Server(ServerConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Server::~Server() {
  stop();
  impl_->clocks.stop_all();
}

unsigned short Server::port() const { return impl_->acceptor.local_endpoint().port(); }

SessionHub& Server::hub() { return impl_->hub; }

void Server::run() {
  net::signal_set signals(impl_->io);
  if (impl_->config.handle_signals) {
    signals.add(SIGINT);
    signals.add(SIGTERM);
    signals.async_wait([this](beast::error_code ec, int) {
      if (!ec) {
        stop();
      }
    });
  }
  impl_->accept();
  impl_->io.run();
}

void Server::stop() {
  net::post(impl_->io, [impl = impl_.get()] {
    beast::error_code ignored;
    impl->acceptor.close(ignored);
  });
  impl_->io.stop();
}

}  // namespace lenia
