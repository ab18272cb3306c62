#pragma once

#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wbqoe/protocol.hpp"

namespace wbqoe {

// ingress: received by the relay from `sender`.
// egress:  released by a subscriber's injector queue.
// direct:  sent by the relay without injected delay (verdicts, control).
enum class Direction { Ingress, Egress, Direct };
inline constexpr std::array<std::string_view, 3> kDirectionTokens = {"ingress", "egress", "direct"};

struct SessionLogEntry {
  Micros wall_time{0};
  Direction direction = Direction::Ingress;
  std::string subscriber;  // recipient for egress and direct entries
  Envelope envelope;
  std::optional<Verdict> verdict;
  std::optional<Micros> release_delay;  // egress only
  std::optional<Micros> arrival;        // egress only: relay arrival time Tr
};

inline nlohmann::json to_json(const SessionLogEntry& e) {
  nlohmann::json j = {{"t", to_ms(e.wall_time)},
                      {"dir", kDirectionTokens[static_cast<std::size_t>(e.direction)]},
                      {"env", to_json(e.envelope)}};
  if (!e.subscriber.empty()) j["to"] = e.subscriber;
  if (e.verdict) j["verdict"] = to_json(*e.verdict);
  if (e.release_delay) j["release_delay_ms"] = to_ms(*e.release_delay);
  if (e.arrival) j["arrival"] = to_ms(*e.arrival);
  return j;
}

inline SessionLogEntry log_entry_from_json(const nlohmann::json& j) {
  SessionLogEntry e;
  e.wall_time = from_ms_real(j.at("t").get<double>());
  const auto dir = j.at("dir").get<std::string>();
  for (std::size_t i = 0; i < kDirectionTokens.size(); ++i)
    if (kDirectionTokens[i] == dir) e.direction = static_cast<Direction>(i);
  e.envelope = envelope_from_json(j.at("env"));
  if (j.contains("to")) e.subscriber = j["to"].get<std::string>();
  if (j.contains("verdict")) e.verdict = verdict_from_json(j["verdict"]);
  if (j.contains("release_delay_ms")) e.release_delay = from_ms_real(j["release_delay_ms"].get<double>());
  if (j.contains("arrival")) e.arrival = from_ms_real(j["arrival"].get<double>());
  return e;
}

/// Append-only log, one JSON object per line when written out. Writes are
/// serialized; an optional sink receives each line as it is appended.
class SessionLog {
 public:
  SessionLog() = default;
  // Copies carry the entries only, not the sink.
  SessionLog(const SessionLog& other) : entries_(other.snapshot()) {}
  SessionLog& operator=(const SessionLog& other) {
    if (this != &other) {
      auto copy = other.snapshot();
      std::lock_guard lock(mu_);
      entries_ = std::move(copy);
    }
    return *this;
  }

  std::vector<SessionLogEntry> snapshot() const {
    std::lock_guard lock(mu_);
    return entries_;
  }

  void append(SessionLogEntry e) {
    std::lock_guard lock(mu_);
    if (!entries_.empty() && e.wall_time < entries_.back().wall_time) e.wall_time = entries_.back().wall_time;
    if (sink_) *sink_ << to_json(e).dump() << '\n' << std::flush;
    entries_.push_back(std::move(e));
  }

  void set_sink(std::shared_ptr<std::ostream> sink) {
    std::lock_guard lock(mu_);
    sink_ = std::move(sink);
  }

  const std::vector<SessionLogEntry>& entries() const { return entries_; }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

  std::string to_jsonl() const {
    std::lock_guard lock(mu_);
    std::string out;
    for (const auto& e : entries_) {
      out += to_json(e).dump();
      out += '\n';
    }
    return out;
  }

 private:
  mutable std::mutex mu_;
  std::vector<SessionLogEntry> entries_;
  std::shared_ptr<std::ostream> sink_;
};

}  // namespace wbqoe
