#pragma once

// Live steering service.
//
// One io_context thread owns the Session: it runs the wall-clock paced tick
// timer, the socket reads and all writes, so controller state is only ever
// touched from that thread. Inbound input messages are queued in arrival
// order and stamped with the next tick to run; that stamping is the only
// nondeterministic step, and everything after it is a replayable Session.
//
// A single listening port speaks two transports carrying the same JSON
// messages: raw TCP with one message per line, and WebSocket (one message
// per text frame) for browsers. The first bytes of a connection pick the
// transport: an HTTP "GET" starts the WebSocket handshake.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include "ler/scene.hpp"
#include "ler/session.hpp"

namespace ler {

namespace net {
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
}  // namespace net

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 7500;  // 0 picks an ephemeral port
  SessionConfig session;
  std::optional<Scene> scene;
  std::chrono::microseconds tick_period{10'000};
  bool record = false;
  bool handle_signals = false;  // stop on SIGINT/SIGTERM
  std::size_t max_pending_writes = 4096;
  std::size_t max_message_bytes = 64 * 1024;
};

// Structured reply helpers shared with tests and the CLI.
inline std::string error_message(std::string_view code, std::string_view detail) {
  nlohmann::ordered_json j;
  j["type"] = "error";
  j["code"] = code;
  j["detail"] = detail;
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

inline std::string ack_message(std::int64_t tick, CommandToken token, bool debounced) {
  nlohmann::ordered_json j;
  j["type"] = "ack";
  j["tick"] = tick;
  j["token"] = to_string(token);
  j["status"] = debounced ? "debounced" : "applied";
  return j.dump();
}

inline std::string input_message(InputSource source, std::string_view line) {
  nlohmann::ordered_json j;
  j["type"] = "input";
  j["source"] = to_string(source);
  j["line"] = line;
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

// Reply sent to the client whose input was just processed.
inline std::string outcome_message(const InputOutcome& o) {
  using S = InputOutcome::Status;
  switch (o.status) {
    case S::Applied: return ack_message(o.tick, *o.token, false);
    case S::Debounced: return ack_message(o.tick, *o.token, true);
    case S::UnknownPhrase: return error_message("UnknownPhrase", o.text);
    case S::Rejected:
      switch (*o.error) {
        case ControllerError::RejectedFault: return error_message("CommandRejected", "FAULT");
        case ControllerError::RejectedManual: return error_message("CommandRejected", "MANUAL");
        case ControllerError::FaultNotClearable:
          return error_message("FaultNotClearable", "motor still above the reset threshold");
        case ControllerError::NotInManualMode: return error_message("NotInManualMode", "");
      }
  }
  return error_message("Internal", "");
}

class Server {
 public:
  explicit Server(ServerOptions opts)
      : opts_(std::move(opts)),
        session_(opts_.session, opts_.record),
        acceptor_(ioc_),
        timer_(ioc_),
        signals_(ioc_) {
    const auto addr = net::asio::ip::make_address(opts_.address);
    const net::tcp::endpoint ep(addr, opts_.port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::asio::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  [[nodiscard]] unsigned short port() const { return acceptor_.local_endpoint().port(); }

  // Blocks until stop() or, with handle_signals, SIGINT/SIGTERM.
  void run() {
    if (opts_.handle_signals) {
      signals_.add(SIGINT);
      signals_.add(SIGTERM);
      signals_.async_wait([this](const boost::system::error_code& ec, int) {
        if (!ec) shutdown();
      });
    }
    do_accept();
    next_deadline_ = std::chrono::steady_clock::now() + opts_.tick_period;
    arm_timer();
    running_ = true;
    ioc_.run();
    running_ = false;
  }

  // Safe to call from any thread.
  void stop() {
    net::asio::post(ioc_, [this] { shutdown(); });
  }

  [[nodiscard]] bool running() const noexcept { return running_; }

  // Only valid once run() has returned.
  [[nodiscard]] const SessionLog& log() const noexcept { return session_.log(); }
  [[nodiscard]] const SessionConfig& config() const noexcept { return session_.config(); }

  // Connection count as seen by the io thread; test helper.
  [[nodiscard]] std::size_t client_count() const noexcept { return client_count_.load(); }

 private:
  class Client;
  class PlainClient;
  class WsClient;
  class Detector;

  struct Pending {
    std::weak_ptr<Client> origin;
    InputSource source;
    std::string line;
  };

  void do_accept() {
    acceptor_.async_accept([this](const boost::system::error_code& ec, net::tcp::socket sock) {
      if (ec) return;  // acceptor closed
      std::make_shared<Detector>(*this, std::move(sock))->start();
      do_accept();
    });
  }

  void arm_timer() {
    timer_.expires_at(next_deadline_);
    timer_.async_wait([this](const boost::system::error_code& ec) {
      if (ec || stopping_) return;
      // Catch up after a stall, but never spin unboundedly.
      const auto now = std::chrono::steady_clock::now();
      int budget = 100;
      while (next_deadline_ <= now && budget-- > 0) {
        run_tick();
        next_deadline_ += opts_.tick_period;
      }
      if (next_deadline_ <= now) next_deadline_ = now + opts_.tick_period;
      arm_timer();
    });
  }

  void run_tick() {
    std::deque<Pending> batch;
    batch.swap(pending_);
    for (auto& p : batch) {
      const InputOutcome outcome = session_.input(p.source, p.line);
      if (auto origin = p.origin.lock()) origin->send(outcome_message(outcome));
    }
    if (auto frame = session_.advance()) broadcast(to_wire(*frame));
  }

  void broadcast(const std::string& msg) {
    auto shared = std::make_shared<const std::string>(msg);
    for (const auto& c : std::vector<std::shared_ptr<Client>>(clients_.begin(), clients_.end())) c->send(shared);
  }

  void on_message(const std::shared_ptr<Client>& from, std::string_view text) {
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      from->send(error_message("MalformedMessage", "not a JSON object"));
      return;
    }
    if (!j.contains("type") || j["type"] != "input") {
      from->send(error_message("MalformedMessage", "expected type \"input\""));
      return;
    }
    if (!j.contains("line") || !j["line"].is_string()) {
      from->send(error_message("MalformedMessage", "missing string field \"line\""));
      return;
    }
    InputSource source = InputSource::Voice;
    if (j.contains("source")) {
      const auto src = j["source"].is_string() ? source_from_string(j["source"].get<std::string>()) : std::nullopt;
      if (!src) {
        from->send(error_message("MalformedMessage", "source must be VOICE, KEYPAD or PEDAL"));
        return;
      }
      source = *src;
    }
    pending_.push_back({from, source, j["line"].get<std::string>()});
  }

  void on_open(const std::shared_ptr<Client>& c) {
    clients_.insert(c);
    client_count_ = clients_.size();
    c->send(session_.log().header);
    if (opts_.scene) {
      nlohmann::ordered_json j;
      j["type"] = "scene";
      j["scene"] = scene_to_json(*opts_.scene);
      c->send(j.dump());
    }
  }

  void on_close(const std::shared_ptr<Client>& c) {
    clients_.erase(c);
    client_count_ = clients_.size();
  }

  void shutdown() {
    if (stopping_) return;
    stopping_ = true;
    boost::system::error_code ignored;
    acceptor_.close(ignored);
    timer_.cancel();
    signals_.cancel(ignored);
    for (const auto& c : std::vector<std::shared_ptr<Client>>(clients_.begin(), clients_.end())) c->close();
    clients_.clear();
    client_count_ = 0;
    // Connections still mid-handshake would otherwise keep run() alive.
    ioc_.stop();
  }

  // --- connections ----------------------------------------------------------

  class Client : public std::enable_shared_from_this<Client> {
   public:
    explicit Client(Server& server) : server_(server) {}
    virtual ~Client() = default;

    void send(std::string msg) { send(std::make_shared<const std::string>(std::move(msg))); }
    void send(std::shared_ptr<const std::string> msg) {
      if (closed_) return;
      if (queue_.size() >= server_.opts_.max_pending_writes) {
        fail();  // slow consumer
        return;
      }
      queue_.push_back(std::move(msg));
      if (queue_.size() == 1) write_next();
    }

    virtual void close() = 0;

   protected:
    virtual void write_next() = 0;

    void wrote(const boost::system::error_code& ec) {
      if (ec) {
        fail();
        return;
      }
      queue_.pop_front();
      if (!queue_.empty()) write_next();
    }

    void fail() {
      if (closed_) return;
      closed_ = true;
      queue_.clear();
      close();
      server_.on_close(shared_from_this());
    }

    Server& server_;
    std::deque<std::shared_ptr<const std::string>> queue_;
    bool closed_ = false;
  };

  class PlainClient final : public Client {
   public:
    PlainClient(Server& server, net::beast::tcp_stream stream, std::string leftover)
        : Client(server), stream_(std::move(stream)), inbuf_(std::move(leftover)) {}

    void start() {
      server_.on_open(shared_from_this());
      read_next();
    }

    void close() override {
      boost::system::error_code ignored;
      stream_.socket().shutdown(net::tcp::socket::shutdown_both, ignored);
      stream_.socket().close(ignored);
    }

   private:
    void read_next() {
      auto self = std::static_pointer_cast<PlainClient>(shared_from_this());
      net::asio::async_read_until(stream_, net::asio::dynamic_buffer(inbuf_, server_.opts_.max_message_bytes), '\n',
                                  [self](const boost::system::error_code& ec, std::size_t n) {
                                    if (ec) {
                                      self->fail();
                                      return;
                                    }
                                    std::string line = self->inbuf_.substr(0, n - 1);
                                    self->inbuf_.erase(0, n);
                                    if (!line.empty() && line.back() == '\r') line.pop_back();
                                    if (line.find_first_not_of(" \t") != std::string::npos)
                                      self->server_.on_message(self, line);
                                    if (!self->closed_) self->read_next();
                                  });
    }

    void write_next() override {
      auto self = std::static_pointer_cast<PlainClient>(shared_from_this());
      auto msg = queue_.front();
      std::array<net::asio::const_buffer, 2> bufs{net::asio::buffer(*msg), net::asio::buffer("\n", 1)};
      net::asio::async_write(stream_, bufs, [self, msg](const boost::system::error_code& ec, std::size_t) {
        self->wrote(ec);
      });
    }

    net::beast::tcp_stream stream_;
    std::string inbuf_;
  };

  class WsClient final : public Client {
   public:
    WsClient(Server& server, net::beast::tcp_stream stream) : Client(server), ws_(std::move(stream)) {}

    void start(net::http::request<net::http::string_body> req) {
      auto self = std::static_pointer_cast<WsClient>(shared_from_this());
      ws_.set_option(net::websocket::stream_base::timeout::suggested(net::beast::role_type::server));
      ws_.read_message_max(server_.opts_.max_message_bytes);
      ws_.text(true);
      ws_.async_accept(req, [self](const boost::system::error_code& ec) {
        if (ec) return;
        self->server_.on_open(self);
        self->read_next();
      });
    }

    void close() override {
      boost::system::error_code ignored;
      net::beast::get_lowest_layer(ws_).socket().shutdown(net::tcp::socket::shutdown_both, ignored);
      net::beast::get_lowest_layer(ws_).socket().close(ignored);
    }

   private:
    void read_next() {
      auto self = std::static_pointer_cast<WsClient>(shared_from_this());
      ws_.async_read(buffer_, [self](const boost::system::error_code& ec, std::size_t) {
        if (ec) {
          self->fail();
          return;
        }
        const std::string text = net::beast::buffers_to_string(self->buffer_.data());
        self->buffer_.consume(self->buffer_.size());
        self->server_.on_message(self, text);
        if (!self->closed_) self->read_next();
      });
    }

    void write_next() override {
      auto self = std::static_pointer_cast<WsClient>(shared_from_this());
      auto msg = queue_.front();
      ws_.async_write(net::asio::buffer(*msg), [self, msg](const boost::system::error_code& ec, std::size_t) {
        self->wrote(ec);
      });
    }

    net::websocket::stream<net::beast::tcp_stream> ws_;
    net::beast::flat_buffer buffer_;
  };

  // Reads just enough of a new connection to choose the transport.
  class Detector : public std::enable_shared_from_this<Detector> {
   public:
    Detector(Server& server, net::tcp::socket sock)
        : server_(server), stream_(std::move(sock)), sniff_(stream_.get_executor()) {}

    // A WebSocket client speaks first (the upgrade request); a plain client
    // may wait for the header. Silence for kSniffWindow therefore means plain.
    void start() {
      auto self = shared_from_this();
      sniff_.expires_after(kSniffWindow);
      sniff_.async_wait([self](const boost::system::error_code& ec) {
        if (ec || self->buffer_.size() != 0) return;
        self->silent_ = true;
        boost::system::error_code ignored;
        self->stream_.socket().cancel(ignored);
      });
      read_more();
    }

   private:
    static constexpr std::string_view kGet = "GET";
    static constexpr std::chrono::milliseconds kSniffWindow{150};

    void read_more() {
      auto self = shared_from_this();
      stream_.async_read_some(buffer_.prepare(512), [self](const boost::system::error_code& ec, std::size_t n) {
        if (ec == net::asio::error::operation_aborted && self->silent_) {
          std::make_shared<PlainClient>(self->server_, std::move(self->stream_), std::string())->start();
          return;
        }
        if (ec) {
          self->sniff_.cancel();
          return;
        }
        self->buffer_.commit(n);
        self->decide();
      });
    }

    void decide() {
      const std::string head = net::beast::buffers_to_string(buffer_.data());
      const auto probe = std::string_view(head).substr(0, kGet.size());
      if (head.size() < kGet.size() && kGet.starts_with(probe)) {
        read_more();
        return;
      }
      sniff_.cancel();
      if (probe == kGet) {
        read_http();
        return;
      }
      std::make_shared<PlainClient>(server_, std::move(stream_), head)->start();
    }

    void read_http() {
      auto self = shared_from_this();
      net::http::async_read(stream_, buffer_, req_, [self](const boost::system::error_code& ec, std::size_t) {
        if (ec) return;
        if (net::websocket::is_upgrade(self->req_)) {
          std::make_shared<WsClient>(self->server_, std::move(self->stream_))->start(std::move(self->req_));
          return;
        }
        auto res = std::make_shared<net::http::response<net::http::string_body>>(net::http::status::upgrade_required,
                                                                                 self->req_.version());
        res->set(net::http::field::content_type, "text/plain");
        res->set(net::http::field::upgrade, "websocket");
        res->body() = "connect with a WebSocket upgrade or a raw TCP stream\n";
        res->prepare_payload();
        net::http::async_write(self->stream_, *res, [self, res](const boost::system::error_code&, std::size_t) {
          boost::system::error_code ignored;
          self->stream_.socket().shutdown(net::tcp::socket::shutdown_both, ignored);
        });
      });
    }

    Server& server_;
    net::beast::tcp_stream stream_;
    net::beast::flat_buffer buffer_;
    net::http::request<net::http::string_body> req_;
    net::asio::steady_timer sniff_;
    bool silent_ = false;
  };

  ServerOptions opts_;
  Session session_;
  net::asio::io_context ioc_{1};
  net::tcp::acceptor acceptor_;
  net::asio::steady_timer timer_;
  net::asio::signal_set signals_;
  std::chrono::steady_clock::time_point next_deadline_;
  std::deque<Pending> pending_;
  std::set<std::shared_ptr<Client>> clients_;
  std::atomic<std::size_t> client_count_{0};
  std::atomic<bool> running_{false};
  bool stopping_ = false;
};

}  // namespace ler
