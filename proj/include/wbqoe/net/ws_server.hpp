#pragma once

// WebSocket front end for the relay. Each binary message carries one or more
// length-prefixed frames. The first envelope on a connection must be a
// JoinSession whose session id is the pair code; participants sharing a code
// form a pair. Plain HTTP GET /templates.json serves the template set.

#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "wbqoe/net/asio_scheduler.hpp"
#include "wbqoe/orchestrator.hpp"
#include "wbqoe/protocol.hpp"
#include "wbqoe/schedule.hpp"

namespace wbqoe::net {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct ServerOptions {
  ExperimentConfig config;
  TemplateSet templates = default_templates();
  SessionOptions session;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> log_dir;
  std::optional<Micros> deadlock_after;
  std::ostream* diagnostics = &std::cerr;
};

class RelayServer {
 public:
  RelayServer(asio::io_context& io, Scheduler& sched, ServerOptions options, const tcp::endpoint& endpoint)
      : io_(io), sched_(sched), opts_(std::move(options)), acceptor_(io) {
    opts_.config.validate();
    validate(opts_.templates);
    acceptor_.open(endpoint.protocol());
    acceptor_.set_option(asio::socket_base::reuse_address(true));
    acceptor_.bind(endpoint);
    acceptor_.listen();
  }

  RelayServer(const RelayServer&) = delete;
  RelayServer& operator=(const RelayServer&) = delete;

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void start() { accept(); }

  void stop() {
    boost::system::error_code ec;
    acceptor_.close(ec);
    for (auto& [key, conn] : by_participant_)
      if (auto c = conn.lock()) c->close();
    for (auto& [code, run] : runs_) export_pair(code);
  }

  std::size_t finished_pairs() const { return finished_; }
  const PairRun* pair(const std::string& code) const {
    auto it = runs_.find(code);
    return it == runs_.end() ? nullptr : it->second.get();
  }

  std::function<void(const std::string&)> on_pair_finished;

 private:
  class Connection : public std::enable_shared_from_this<Connection> {
   public:
    Connection(RelayServer& server, tcp::socket socket) : server_(server), stream_(std::move(socket)) {}

    void start() {
      http::async_read(stream_, buffer_, request_,
                       [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
    }

    void send(const Envelope& env) {
      if (closing_) return;
      auto bytes = std::make_shared<Bytes>(encode(env));
      outbox_.push_back(std::move(bytes));
      if (outbox_.size() == 1 && ws_) write_next();
    }

    void close() {
      if (!ws_ || closing_) return;
      closing_ = true;
      if (outbox_.empty()) do_close();
    }

   private:
    void do_close() {
      ws_->async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
    }

    void on_request(beast::error_code ec) {
      if (ec) return;
      if (websocket::is_upgrade(request_)) {
        ws_ = std::make_unique<websocket::stream<beast::tcp_stream>>(std::move(stream_));
        ws_->binary(true);
        ws_->async_accept(request_, [self = shared_from_this()](beast::error_code ec2) {
          if (!ec2) self->read();
        });
        return;
      }
      auto res = std::make_shared<http::response<http::string_body>>();
      res->version(request_.version());
      res->keep_alive(false);
      if (request_.method() == http::verb::get && request_.target() == "/templates.json") {
        res->result(http::status::ok);
        res->set(http::field::content_type, "application/json");
        res->body() = to_json(server_.opts_.templates).dump();
      } else {
        res->result(http::status::not_found);
        res->body() = "not found\n";
      }
      res->prepare_payload();
      http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
      });
    }

    void read() {
      ws_->async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
    }

    void on_read(beast::error_code ec) {
      if (ec) {
        server_.on_close(*this);
        return;
      }
      const auto data = buffer_.cdata();
      reader_.feed({static_cast<const std::uint8_t*>(data.data()), data.size()});
      buffer_.consume(buffer_.size());
      try {
        while (auto env = reader_.next()) server_.on_envelope(*this, std::move(*env));
      } catch (const Error& e) {
        server_.diag() << "dropping connection: " << e.what() << '\n';
        server_.on_close(*this);
        close();
        return;
      }
      read();
    }

    void write_next() {
      ws_->async_write(asio::buffer(*outbox_.front()),
                       [self = shared_from_this()](beast::error_code ec, std::size_t) {
                         if (ec) return;
                         self->outbox_.pop_front();
                         if (!self->outbox_.empty())
                           self->write_next();
                         else if (self->closing_)
                           self->do_close();
                       });
    }

    friend class RelayServer;
    RelayServer& server_;
    beast::tcp_stream stream_;
    std::unique_ptr<websocket::stream<beast::tcp_stream>> ws_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> request_;
    FrameReader reader_;
    std::deque<std::shared_ptr<Bytes>> outbox_;
    bool closing_ = false;
    std::string pair_code_;
    std::string participant_;
  };

  std::ostream& diag() { return opts_.diagnostics ? *opts_.diagnostics : std::cerr; }

  void accept() {
    acceptor_.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<Connection>(*this, std::move(socket))->start();
      accept();
    });
  }

  PairRun& run_for(const std::string& code) {
    auto it = runs_.find(code);
    if (it != runs_.end()) return *it->second;
    PairRunOptions o;
    o.config = opts_.config;
    o.templates = opts_.templates;
    o.session = opts_.session;
    o.deadlock_after = opts_.deadlock_after;
    auto run = std::make_unique<PairRun>(sched_, generate_schedule(code, opts_.config, pair_seed(opts_.seed, code)), o);
    if (opts_.log_dir) {
      const auto dir = *opts_.log_dir / code;
      std::filesystem::create_directories(dir);
      run->log().set_sink(std::make_shared<std::ofstream>(dir / "session.log.jsonl", std::ios::trunc));
    }
    run->on_finished = [this, code] {
      ++finished_;
      export_pair(code);
      if (on_pair_finished) on_pair_finished(code);
    };
    return *runs_.emplace(code, std::move(run)).first->second;
  }

  void export_pair(const std::string& code) {
    if (!opts_.log_dir) return;
    auto& run = *runs_.at(code);
    run.log().set_sink(nullptr);
    try {
      export_run(run.record(), run.log(), *opts_.log_dir / code);
    } catch (const Error& e) {
      diag() << "export failed for " << code << ": " << e.what() << '\n';
    }
  }

  void on_envelope(Connection& c, Envelope env) {
    if (c.participant_.empty()) {
      const auto* ctl = std::get_if<ControlPayload>(&env.payload);
      if (ctl && ctl->kind == ControlKind::ClockProbe) {
        // Calibration clients probe without joining a pair.
        ControlPayload echo;
        echo.kind = ControlKind::ClockEcho;
        echo.probe_id = ctl->probe_id;
        echo.t_probe = ctl->t_probe;
        echo.t_echo = sched_.now();
        c.send({kProtocolVersion, ++probe_seq_, "relay", env.session, sched_.now(), std::move(echo)});
        return;
      }
      if (!ctl || ctl->kind != ControlKind::JoinSession || env.session.empty()) {
        diag() << "first message must be join_session\n";
        c.close();
        return;
      }
      c.pair_code_ = env.session;
      c.participant_ = env.sender;
      auto& run = run_for(c.pair_code_);
      by_participant_[{c.pair_code_, c.participant_}] = c.weak_from_this();
      std::weak_ptr<Connection> weak = c.weak_from_this();
      run.connect(c.participant_, [weak](const Envelope& e) {
        if (auto conn = weak.lock()) conn->send(e);
      });
    }
    runs_.at(c.pair_code_)->receive(c.participant_, env);
  }

  void on_close(Connection& c) {
    if (c.participant_.empty()) return;
    auto it = by_participant_.find({c.pair_code_, c.participant_});
    if (it == by_participant_.end() || it->second.lock().get() != &c) return;
    by_participant_.erase(it);
    runs_.at(c.pair_code_)->disconnect(c.participant_);
  }

  asio::io_context& io_;
  Scheduler& sched_;
  ServerOptions opts_;
  tcp::acceptor acceptor_;
  std::map<std::string, std::unique_ptr<PairRun>> runs_;
  std::map<std::pair<std::string, std::string>, std::weak_ptr<Connection>> by_participant_;
  std::size_t finished_ = 0;
  std::int64_t probe_seq_ = 0;
};

}  // namespace wbqoe::net
