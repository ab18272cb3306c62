#pragma once

// Drives one pair of participants through their condition schedule.
//
// Every message from a participant enters through receive(). Stroke events go
// through the session engine; accepted strokes and all presence updates are
// queued on the partner's injector and released on its drain ticks. The
// sender gets an immediate verdict (ClaimResult) that bypasses the injector.
// A condition ends when the task completes; the next one starts only after
// both participants have rated all four dimensions.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wbqoe/clock.hpp"
#include "wbqoe/error.hpp"
#include "wbqoe/latency_injector.hpp"
#include "wbqoe/protocol.hpp"
#include "wbqoe/ratings.hpp"
#include "wbqoe/schedule.hpp"
#include "wbqoe/session_engine.hpp"
#include "wbqoe/session_log.hpp"
#include "wbqoe/templates.hpp"

namespace wbqoe {

inline constexpr std::size_t kRatingsPerCondition = 2 * kAllDimensions.size();

enum class ConditionStatus { Pending, Running, AwaitingRatings, Completed, Aborted };
inline constexpr std::array<std::string_view, 5> kConditionStatusTokens = {
    "pending", "running", "awaiting_ratings", "completed", "aborted"};

struct ConditionRecord {
  std::size_t index = 0;
  Condition condition;
  ConditionStatus status = ConditionStatus::Pending;
  std::string session_id;
  std::optional<Micros> started;
  std::optional<Micros> task_completed;
  std::optional<Micros> rated;
  std::string abort_reason;

  std::optional<Micros> task_duration() const {
    if (!started || !task_completed) return std::nullopt;
    return *task_completed - *started;
  }
};

struct RunRecord {
  std::string pair_id;
  std::vector<std::string> participants;
  ConditionSchedule schedule;
  std::vector<ConditionRecord> conditions;
  std::vector<RatingRecord> ratings;
  std::optional<Errc> error;
  std::string error_detail;
  bool finished = false;

  std::size_t count(ConditionStatus s) const {
    return static_cast<std::size_t>(
        std::count_if(conditions.begin(), conditions.end(), [s](const auto& c) { return c.status == s; }));
  }
};

struct PairRunOptions {
  ExperimentConfig config;
  TemplateSet templates = default_templates();
  SessionOptions session;
  std::optional<Micros> deadlock_after;  // abort when nothing moves for this long
  std::string relay_id = "relay";
};

class PairRun {
 public:
  using Deliver = std::function<void(const Envelope&)>;

  PairRun(Scheduler& scheduler, ConditionSchedule schedule, PairRunOptions options)
      : sched_(scheduler), opts_(std::move(options)) {
    validate(opts_.templates);
    record_.pair_id = schedule.pair_id;
    for (std::size_t i = 0; i < schedule.conditions.size(); ++i) {
      ConditionRecord c;
      c.index = i;
      c.condition = schedule.conditions[i];
      c.session_id = schedule.pair_id + "#" + std::to_string(i);
      record_.conditions.push_back(std::move(c));
    }
    record_.schedule = std::move(schedule);
  }

  PairRun(const PairRun&) = delete;
  PairRun& operator=(const PairRun&) = delete;

  ~PairRun() {
    for (auto id : timers_) sched_.cancel(id);
  }

  const std::string& pair_id() const { return record_.pair_id; }
  bool finished() const { return record_.finished; }
  const SessionLog& log() const { return log_; }
  SessionLog& log() { return log_; }
  const SessionState* session() const { return session_ ? &*session_ : nullptr; }
  std::optional<std::size_t> active_index() const { return active_; }

  RunRecord record() const {
    RunRecord r = record_;
    r.ratings = store_.records();
    return r;
  }

  std::function<void()> on_finished;

  /// Registers the transport used to reach `participant`.
  void connect(const std::string& participant, Deliver deliver) {
    auto& sub = subscribers_[participant];
    sub.deliver = std::move(deliver);
    sub.connected = true;
  }

  /// Transport loss. An in-progress condition is aborted; the run resumes with
  /// the next condition once both participants have joined again.
  void disconnect(const std::string& participant) {
    auto it = subscribers_.find(participant);
    if (it == subscribers_.end()) return;
    it->second.connected = false;
    it->second.joined = false;
    for (auto s = last_seq_.begin(); s != last_seq_.end();)
      s = s->first.first == participant ? last_seq_.erase(s) : std::next(s);
    if (active_ && !record_.finished) abort_active("participant_disconnected");
  }

  /// Entry point for every message a transport receives from `from`.
  void receive(const std::string& from, const Envelope& env) {
    if (record_.finished) return;
    touch();
    Verdict verdict{env.seq, true, std::nullopt};
    std::vector<std::function<void()>> after;  // effects that follow the ingress log entry
    if (env.sender != from) {
      verdict = reject(env, RejectReason::ActionNotAllowed);
    } else {
      try {
        verdict = route(env, after);
      } catch (const Error& e) {
        verdict = reject(env, e.code() == Errc::SequenceGap ? RejectReason::SequenceGap
                                                            : RejectReason::NoActiveCondition);
      }
    }
    const bool presence = env.msg_type() == MsgType::Presence;
    log_.append({sched_.now(), Direction::Ingress, {}, env, presence ? std::nullopt : std::optional(verdict), {}, {}});
    const bool echo = std::holds_alternative<ControlPayload>(env.payload) &&
                      std::get<ControlPayload>(env.payload).kind == ControlKind::ClockProbe;
    if (!presence && !echo) {
      ControlPayload ack;
      ack.kind = ControlKind::ClaimResult;
      ack.verdict = verdict;
      send_direct(from, std::move(ack), env.session);
    }
    for (auto& f : after) f();
  }

 private:
  struct Subscriber {
    Deliver deliver;
    bool connected = false;
    bool joined = false;
    std::unique_ptr<InjectorQueue<Envelope>> queue;
    std::optional<Scheduler::TaskId> tick_task;
  };

  static Verdict reject(const Envelope& env, RejectReason r) { return {env.seq, false, r}; }

  /// Sequence, session and rule checks for one ingress envelope. Throws
  /// UnknownSession or SequenceGap; queues delivery effects onto `after`.
  Verdict route(const Envelope& env, std::vector<std::function<void()>>& after) {
    const auto* control = std::get_if<ControlPayload>(&env.payload);
    const bool session_free =
        control && (control->kind == ControlKind::JoinSession || control->kind == ControlKind::ClockProbe);
    if (!session_free && (!active_ || env.session != record_.conditions[*active_].session_id))
      throw Error(Errc::UnknownSession, "no active session '" + env.session + "'");

    auto& prev = last_seq_[{env.sender, env.session}];
    switch (check_sequence(prev, env)) {
      case SeqVerdict::Accept:
        prev = env.seq;
        break;
      case SeqVerdict::RejectGap:
        prev = env.seq;
        throw Error(Errc::SequenceGap, "gap before seq " + std::to_string(env.seq));
      case SeqVerdict::RejectDuplicate:
        throw Error(Errc::SequenceGap, "duplicate seq " + std::to_string(env.seq));
    }

    if (const auto* stroke = std::get_if<StrokePayload>(&env.payload)) return route_stroke(env, *stroke, after);
    if (std::holds_alternative<PresencePayload>(env.payload)) {
      if (record_.conditions[*active_].status == ConditionStatus::Running) {
        after.push_back([this, env] { enqueue(partner(env.sender), env); });
      }
      return {env.seq, true, std::nullopt};
    }
    return route_control(env, *control, after);
  }

  Verdict route_stroke(const Envelope& env, const StrokePayload& stroke, std::vector<std::function<void()>>& after) {
    auto& cond = record_.conditions[*active_];
    if (cond.status != ConditionStatus::Running || !session_) return reject(env, RejectReason::SessionComplete);
    const auto outcome = handle_stroke(*session_, env.sender, stroke);
    if (!outcome.accepted()) return reject(env, *outcome.reason);

    const std::string other = partner(env.sender);
    after.push_back([this, env, other] { enqueue(other, env); });
    if (outcome.delta.turn_owner) {
      ControlPayload grant;
      grant.kind = ControlKind::TurnGrant;
      grant.turn_owner = *outcome.delta.turn_owner;
      after.push_back([this, other, grant] { enqueue(other, relay_envelope(grant)); });
    }
    if (outcome.delta.completed) {
      after.push_back([this] { complete_task(); });
    }
    return {env.seq, true, std::nullopt};
  }

  Verdict route_control(const Envelope& env, const ControlPayload& c, std::vector<std::function<void()>>& after) {
    switch (c.kind) {
      case ControlKind::JoinSession: {
        if (!subscribers_.contains(env.sender) || !subscribers_[env.sender].connected)
          return reject(env, RejectReason::ActionNotAllowed);
        if (std::find(record_.participants.begin(), record_.participants.end(), env.sender) ==
            record_.participants.end()) {
          if (record_.participants.size() == 2) return reject(env, RejectReason::ActionNotAllowed);
          record_.participants.push_back(env.sender);
        }
        subscribers_[env.sender].joined = true;
        after.push_back([this] { maybe_start(); });
        return {env.seq, true, std::nullopt};
      }
      case ControlKind::ClockProbe: {
        ControlPayload echo;
        echo.kind = ControlKind::ClockEcho;
        echo.probe_id = c.probe_id;
        echo.t_probe = c.t_probe;
        echo.t_echo = sched_.now();
        after.push_back([this, sender = env.sender, echo, session = env.session] { send_direct(sender, echo, session); });
        return {env.seq, true, std::nullopt};
      }
      case ControlKind::RatingSubmit: {
        auto& cond = record_.conditions[*active_];
        if (cond.status != ConditionStatus::AwaitingRatings) return reject(env, RejectReason::NoActiveCondition);
        const auto& r = *c.rating;
        if (r.pair_id != record_.pair_id || r.participant_id != env.sender || r.condition != cond.condition)
          return reject(env, RejectReason::InvalidRating);
        try {
          store_.add(r);
        } catch (const Error& e) {
          return reject(env, e.code() == Errc::DuplicateRating ? RejectReason::DuplicateRating
                                                               : RejectReason::InvalidRating);
        }
        if (store_.count(record_.pair_id, cond.condition) == kRatingsPerCondition) {
          cond.status = ConditionStatus::Completed;
          cond.rated = sched_.now();
          cancel(rating_timer_);
          after.push_back([this] { close_active(); });
        }
        return {env.seq, true, std::nullopt};
      }
      default:
        return reject(env, RejectReason::ActionNotAllowed);
    }
  }

  std::string partner(const std::string& p) const {
    if (record_.participants.size() != 2) return {};
    return record_.participants[0] == p ? record_.participants[1] : record_.participants[0];
  }

  void maybe_start() {
    if (active_ || record_.finished || record_.participants.size() != 2) return;
    for (const auto& p : record_.participants)
      if (!subscribers_[p].joined) return;
    start_next();
  }

  void start_next() {
    if (next_ >= record_.conditions.size()) {
      finish();
      return;
    }
    const std::size_t k = next_++;
    auto& cond = record_.conditions[k];
    const double inherent = opts_.config.inherent_for(cond.condition.platform);
    const auto target = from_ms(cond.condition.latency_ms);
    for (const auto& p : record_.participants) {
      auto& sub = subscribers_[p];
      cancel(sub.tick_task);
      if (sub.queue && sub.queue->config().inherent_latency == from_ms_real(inherent)) {
        sub.queue->discard();
        sub.queue->set_target(target);
      } else {
        sub.queue = std::make_unique<InjectorQueue<Envelope>>(
            sched_, InjectorConfig{target, from_ms_real(inherent), opts_.config.tick_rate});
      }
    }
    std::array<std::string, 2> pair{record_.participants[0], record_.participants[1]};
    session_ = create_session(pair, cond.condition.mode, opts_.templates, cond.condition, opts_.session);
    active_ = k;
    relay_seq_ = 0;
    cond.status = ConditionStatus::Running;
    cond.started = sched_.now();

    ControlPayload start;
    start.kind = ControlKind::ConditionStart;
    start.condition = cond.condition;
    start.index = static_cast<std::int64_t>(k);
    start.turn_owner = session_->turn_owner;
    start.snapshot = snapshot(*session_);
    for (const auto& p : record_.participants) send_direct(p, start, cond.session_id);
    arm_watchdog();
  }

  void complete_task() {
    auto& cond = record_.conditions[*active_];
    cond.status = ConditionStatus::AwaitingRatings;
    cond.task_completed = sched_.now();
    ControlPayload end;
    end.kind = ControlKind::ConditionEnd;
    end.condition = cond.condition;
    end.index = static_cast<std::int64_t>(cond.index);
    for (const auto& p : record_.participants) enqueue(p, relay_envelope(end));
    rating_timer_ = at(sched_.now() + from_ms(opts_.config.rating_timeout_ms), [this] {
      rating_timer_.reset();
      record_.error = Errc::RatingTimeout;
      record_.error_detail = "ratings incomplete for condition " + std::to_string(*active_);
      abort_active("rating_timeout", false);
      finish();
    });
  }

  void close_active() {
    active_.reset();
    session_.reset();
    maybe_start();
  }

  void abort_active(const std::string& reason, bool resume = true) {
    auto& cond = record_.conditions[*active_];
    cond.status = ConditionStatus::Aborted;
    cond.abort_reason = reason;
    cancel(rating_timer_);
    for (auto& [p, sub] : subscribers_) {
      cancel(sub.tick_task);
      if (sub.queue) sub.queue->discard();
    }
    active_.reset();
    session_.reset();
    if (resume) maybe_start();
  }

  void finish() {
    if (record_.finished) return;
    record_.finished = true;
    cancel(watchdog_);
    cancel(rating_timer_);
    ControlPayload done;
    done.kind = ControlKind::SessionComplete;
    for (const auto& p : record_.participants) send_direct(p, done, record_.pair_id);
    if (on_finished) on_finished();
  }

  // --- delivery

  Envelope relay_envelope(ControlPayload c, std::string session = {}) {
    Envelope e;
    e.seq = ++relay_seq_;
    e.sender = opts_.relay_id;
    e.session = session.empty() && active_ ? record_.conditions[*active_].session_id : std::move(session);
    e.t_sent = sched_.now();
    e.payload = std::move(c);
    return e;
  }

  void send_direct(const std::string& to, ControlPayload c, const std::string& session) {
    auto env = relay_envelope(std::move(c), session);
    log_.append({sched_.now(), Direction::Direct, to, env, {}, {}, {}});
    auto it = subscribers_.find(to);
    if (it != subscribers_.end() && it->second.connected && it->second.deliver) it->second.deliver(env);
  }

  void enqueue(const std::string& to, Envelope env) {
    auto it = subscribers_.find(to);
    if (it == subscribers_.end() || !it->second.queue) return;
    it->second.queue->push(std::move(env));
    arm(to, it->second);
  }

  void arm(const std::string& name, Subscriber& sub) {
    if (sub.tick_task) return;
    const auto when = sub.queue->next_release_tick();
    if (!when) return;
    sub.tick_task = at(*when, [this, name, &sub] {
      sub.tick_task.reset();
      drain(name, sub);
      arm(name, sub);
    });
  }

  void drain(const std::string& name, Subscriber& sub) {
    for (auto& item : sub.queue->drain()) {
      touch();
      const auto now = sched_.now();
      log_.append({now, Direction::Egress, name, item.item, {}, now - item.arrival, item.arrival});
      if (sub.connected && sub.deliver) sub.deliver(item.item);
    }
  }

  // --- timers

  Scheduler::TaskId at(Micros t, std::function<void()> fn) {
    auto id = std::make_shared<Scheduler::TaskId>(0);
    *id = sched_.at(t, [this, id, fn = std::move(fn)] {
      timers_.erase(*id);
      fn();
    });
    timers_.insert(*id);
    return *id;
  }

  void cancel(std::optional<Scheduler::TaskId>& id) {
    if (!id) return;
    sched_.cancel(*id);
    timers_.erase(*id);
    id.reset();
  }

  void touch() { last_activity_ = sched_.now(); }

  void arm_watchdog() {
    if (!opts_.deadlock_after || watchdog_) return;
    watchdog_ = at(last_activity_ + *opts_.deadlock_after, [this] {
      watchdog_.reset();
      if (record_.finished) return;
      if (sched_.now() - last_activity_ >= *opts_.deadlock_after) {
        record_.error = Errc::Deadlock;
        record_.error_detail = "no events for " + std::to_string(to_ms(*opts_.deadlock_after)) + " ms";
        if (active_) {
          const auto& s = record_.conditions[*active_];
          record_.error_detail += " in condition " + std::to_string(s.index) + " (" +
                                  std::string(kConditionStatusTokens[static_cast<std::size_t>(s.status)]) + ")";
          abort_active("deadlock", false);
        }
        finish();
        return;
      }
      arm_watchdog();
    });
  }

  Scheduler& sched_;
  PairRunOptions opts_;
  RunRecord record_;
  RatingStore store_;
  SessionLog log_;
  std::map<std::string, Subscriber> subscribers_;
  std::map<std::pair<std::string, std::string>, std::int64_t> last_seq_;
  std::optional<SessionState> session_;
  std::optional<std::size_t> active_;
  std::size_t next_ = 0;
  std::int64_t relay_seq_ = 0;
  std::set<Scheduler::TaskId> timers_;
  std::optional<Scheduler::TaskId> rating_timer_;
  std::optional<Scheduler::TaskId> watchdog_;
  Micros last_activity_{0};
};

// ---------------------------------------------------------------------------
// Export

inline nlohmann::json to_json(const RunRecord& r) {
  nlohmann::json conds = nlohmann::json::array();
  for (const auto& c : r.conditions) {
    nlohmann::json j = {{"index", c.index},
                        {"condition", to_json(c.condition)},
                        {"status", kConditionStatusTokens[static_cast<std::size_t>(c.status)]},
                        {"session", c.session_id}};
    if (c.started) j["started_ms"] = to_ms(*c.started);
    if (c.task_completed) j["task_completed_ms"] = to_ms(*c.task_completed);
    if (c.rated) j["rated_ms"] = to_ms(*c.rated);
    if (!c.abort_reason.empty()) j["abort_reason"] = c.abort_reason;
    conds.push_back(std::move(j));
  }
  nlohmann::json ratings = nlohmann::json::array();
  for (const auto& x : r.ratings) ratings.push_back(to_json(x));
  nlohmann::json j = {{"pair_id", r.pair_id},     {"participants", r.participants},
                      {"schedule", to_json(r.schedule)}, {"conditions", std::move(conds)},
                      {"ratings", std::move(ratings)},   {"finished", r.finished}};
  if (r.error) {
    j["error"] = to_string(*r.error);
    j["error_detail"] = r.error_detail;
  }
  return j;
}

inline RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord r;
  try {
    r.pair_id = j.at("pair_id").get<std::string>();
    r.participants = j.at("participants").get<std::vector<std::string>>();
    r.schedule = schedule_from_json(j.at("schedule"));
    for (const auto& c : j.at("conditions")) {
      ConditionRecord cr;
      cr.index = c.at("index").get<std::size_t>();
      cr.condition = condition_from_json(c.at("condition"));
      const auto st = c.at("status").get<std::string>();
      for (std::size_t i = 0; i < kConditionStatusTokens.size(); ++i)
        if (kConditionStatusTokens[i] == st) cr.status = static_cast<ConditionStatus>(i);
      cr.session_id = c.at("session").get<std::string>();
      if (c.contains("started_ms")) cr.started = from_ms_real(c["started_ms"].get<double>());
      if (c.contains("task_completed_ms")) cr.task_completed = from_ms_real(c["task_completed_ms"].get<double>());
      if (c.contains("rated_ms")) cr.rated = from_ms_real(c["rated_ms"].get<double>());
      if (c.contains("abort_reason")) cr.abort_reason = c["abort_reason"].get<std::string>();
      r.conditions.push_back(std::move(cr));
    }
    for (const auto& x : j.at("ratings")) r.ratings.push_back(rating_from_json(x));
    r.finished = j.at("finished").get<bool>();
    if (j.contains("error_detail")) r.error_detail = j["error_detail"].get<std::string>();
  } catch (const std::exception& e) {
    throw Error(Errc::StorageFailure, std::string("bad run record: ") + e.what());
  }
  return r;
}

/// Ratings rows in schedule order; an aborted condition yields one flagged
/// row per participant and no ratings.
inline std::vector<std::string> ratings_csv_rows(const RunRecord& r) {
  std::vector<std::string> rows;
  for (const auto& c : r.conditions) {
    if (c.status == ConditionStatus::Aborted) {
      for (const auto& p : r.participants) rows.push_back(aborted_csv_row(r.pair_id, p, c.condition));
    } else if (c.status == ConditionStatus::Completed) {
      for (const auto& x : r.ratings)
        if (x.condition == c.condition) rows.push_back(rating_csv_row(x));
    }
  }
  return rows;
}

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::StorageFailure, "cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw Error(Errc::StorageFailure, "write failed for " + path.string());
}

}  // namespace detail

struct ExportPaths {
  std::filesystem::path ratings_csv;
  std::filesystem::path session_log;
  std::filesystem::path record_json;
};

/// Writes ratings.csv, session.log.jsonl and record.json under `dir`.
/// Re-exporting the same run produces byte-identical files.
inline ExportPaths export_run(const RunRecord& record, const SessionLog& log, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::StorageFailure, "cannot create " + dir.string() + ": " + ec.message());
  ExportPaths paths{dir / "ratings.csv", dir / "session.log.jsonl", dir / "record.json"};
  std::string csv = std::string(kRatingsCsvHeader) + "\n";
  for (const auto& row : ratings_csv_rows(record)) csv += row + "\n";
  detail::write_file(paths.ratings_csv, csv);
  detail::write_file(paths.session_log, log.to_jsonl());
  detail::write_file(paths.record_json, to_json(record).dump(2) + "\n");
  return paths;
}

inline RunRecord load_run_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::StorageFailure, "cannot open " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::StorageFailure, path.string() + " is not valid JSON");
  return run_record_from_json(j);
}

/// Collects record.json from `run_dir` and its immediate subdirectories (in
/// name order) into one ratings CSV. Returns the number of data rows.
inline std::size_t export_ratings(const std::filesystem::path& run_dir, const std::filesystem::path& out) {
  namespace fs = std::filesystem;
  std::vector<fs::path> records;
  if (fs::exists(run_dir / "record.json")) records.push_back(run_dir / "record.json");
  std::error_code ec;
  if (fs::is_directory(run_dir, ec)) {
    std::vector<fs::path> subdirs;
    for (const auto& e : fs::directory_iterator(run_dir))
      if (e.is_directory() && fs::exists(e.path() / "record.json")) subdirs.push_back(e.path());
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& d : subdirs) records.push_back(d / "record.json");
  }
  if (records.empty()) throw Error(Errc::StorageFailure, "no record.json under " + run_dir.string());
  std::string csv = std::string(kRatingsCsvHeader) + "\n";
  std::size_t rows = 0;
  for (const auto& p : records) {
    for (const auto& row : ratings_csv_rows(load_run_record(p))) {
      csv += row + "\n";
      ++rows;
    }
  }
  detail::write_file(out, csv);
  return rows;
}

}  // namespace wbqoe
