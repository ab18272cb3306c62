#pragma once

// A scripted bot speaking the wire protocol over a WebSocket.

#include <deque>
#include <memory>
#include <string>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "wbqoe/net/asio_scheduler.hpp"
#include "wbqoe/protocol.hpp"
#include "wbqoe/simharness.hpp"

namespace wbqoe::net {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

class WsBotClient : public std::enable_shared_from_this<WsBotClient> {
 public:
  WsBotClient(asio::io_context& io, Scheduler& sched, std::string host, std::string port, sim::BotScript script,
              std::string pair_code, TemplateSet templates = default_templates())
      : resolver_(io), ws_(io), host_(std::move(host)), port_(std::move(port)),
        bot_(sched, std::move(script), std::move(pair_code), std::move(templates)) {}

  void start() {
    auto self = shared_from_this();
    bot_.attach({[this](const Envelope& e) { send(e); }, [this] { close(); }, {}});
    resolver_.async_resolve(host_, port_, [self](beast::error_code ec, tcp::resolver::results_type results) {
      if (ec) return self->fail("resolve", ec);
      beast::get_lowest_layer(self->ws_).async_connect(
          results, [self](beast::error_code ec2, const tcp::endpoint&) {
            if (ec2) return self->fail("connect", ec2);
            self->ws_.async_handshake(self->host_, "/", [self](beast::error_code ec3) {
              if (ec3) return self->fail("handshake", ec3);
              self->ws_.binary(true);
              self->open_ = true;
              self->bot_.join();
              self->read();
            });
          });
    });
  }

  void close() {
    if (!open_) return;
    open_ = false;
    if (!outbox_.empty()) return;  // closes once the outbox drains
    do_close();
  }

  sim::Bot& bot() { return bot_; }
  bool done() const { return bot_.session_complete(); }
  const std::optional<std::string>& error() const { return error_; }

  std::function<void()> on_done;

 private:
  void do_close() {
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {
      if (self->on_done) self->on_done();
    });
  }

  void fail(const char* what, beast::error_code ec) {
    error_ = std::string(what) + ": " + ec.message();
    open_ = false;
    if (on_done) on_done();
  }

  void send(const Envelope& e) {
    if (!open_) return;
    outbox_.push_back(std::make_shared<Bytes>(encode(e)));
    if (outbox_.size() == 1) write_next();
  }

  void write_next() {
    ws_.async_write(asio::buffer(*outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->outbox_.pop_front();
      if (!self->outbox_.empty())
        self->write_next();
      else if (!self->open_)
        self->do_close();
    });
  }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        if (self->open_) self->fail("read", ec);
        return;
      }
      const auto data = self->buffer_.cdata();
      self->reader_.feed({static_cast<const std::uint8_t*>(data.data()), data.size()});
      self->buffer_.consume(self->buffer_.size());
      try {
        while (auto env = self->reader_.next()) self->bot_.on_message(*env);
      } catch (const Error& e) {
        self->error_ = e.what();
        self->close();
        return;
      }
      if (self->bot_.session_complete()) {
        self->close();
        return;
      }
      self->read();
    });
  }

  tcp::resolver resolver_;
  websocket::stream<beast::tcp_stream> ws_;
  std::string host_;
  std::string port_;
  sim::Bot bot_;
  beast::flat_buffer buffer_;
  FrameReader reader_;
  std::deque<std::shared_ptr<Bytes>> outbox_;
  bool open_ = false;
  std::optional<std::string> error_;
};

}  // namespace wbqoe::net
