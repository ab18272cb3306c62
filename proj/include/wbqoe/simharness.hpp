#pragma once

// Scripted participants and a runtime that drives them through the real
// relay, engine and injector paths, on either the virtual or the wall clock.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "wbqoe/clock.hpp"
#include "wbqoe/orchestrator.hpp"
#include "wbqoe/protocol.hpp"
#include "wbqoe/schedule.hpp"
#include "wbqoe/session_log.hpp"
#include "wbqoe/templates.hpp"

namespace wbqoe::sim {

enum class FcPolicy { InOrder, ReverseOrder, Random, AdversarialSameSlot };
inline constexpr std::array<std::string_view, 4> kFcPolicyTokens = {"in_order", "reverse_order", "random",
                                                                    "adversarial"};

inline std::optional<FcPolicy> parse_fc_policy(std::string_view s) {
  for (std::size_t i = 0; i < kFcPolicyTokens.size(); ++i)
    if (kFcPolicyTokens[i] == s) return static_cast<FcPolicy>(i);
  return std::nullopt;
}

struct DisconnectPlan {
  std::size_t condition_index = 0;
  Micros after_start{0};
  std::optional<Micros> rejoin_after;
};

struct BotScript {
  std::string id;
  Micros stroke_duration = from_ms(500);
  int points_per_tick = 2;
  // SC always takes the first unclaimed slot in template order.
  FcPolicy fc_policy = FcPolicy::InOrder;
  std::uint64_t seed = 1;
  std::optional<int> fixed_score;  // otherwise seeded-random 1-5
  Micros rating_delay = from_ms(1000);
  bool presence = false;  // one presence update per drawing tick
  bool passive = false;   // never draws
  bool rates = true;
  std::optional<DisconnectPlan> disconnect;
  double tick_rate = 60.0;

  void validate() const {
    if (id.empty()) throw Error(Errc::InvalidConfig, "bot id is empty");
    if (stroke_duration.count() <= 0) throw Error(Errc::InvalidConfig, "stroke_duration must be positive");
    if (points_per_tick < 1 || points_per_tick > static_cast<int>(kMaxPointsPerAppend))
      throw Error(Errc::InvalidConfig, "points_per_tick outside 1-64");
    if (fixed_score && (*fixed_score < 1 || *fixed_score > 5)) throw Error(Errc::InvalidConfig, "score outside 1-5");
    if (!(tick_rate > 0.0)) throw Error(Errc::InvalidConfig, "tick_rate must be positive");
  }
};

/// How a bot reaches the relay.
struct BotLink {
  std::function<void(const Envelope&)> send;
  std::function<void()> disconnect;
  std::function<void()> reconnect;
};

class Bot {
 public:
  Bot(Scheduler& sched, BotScript script, std::string pair_id, TemplateSet templates)
      : sched_(sched), script_(std::move(script)), pair_id_(std::move(pair_id)), templates_(std::move(templates)),
        rng_(script_.seed) {
    script_.validate();
  }

  Bot(const Bot&) = delete;
  Bot& operator=(const Bot&) = delete;
  ~Bot() { cancel_all(); }

  const std::string& id() const { return script_.id; }
  void attach(BotLink link) { link_ = std::move(link); }

  void join() {
    ControlPayload c;
    c.kind = ControlKind::JoinSession;
    send(pair_id_, std::move(c));
  }

  /// Presence update outside the drawing loop.
  void send_presence(Point cursor, bool pen_down = false) {
    send(session_.empty() ? pair_id_ : session_, PresencePayload{cursor, pen_down, {}});
  }

  void send_probe(std::int64_t probe_id) {
    ControlPayload c;
    c.kind = ControlKind::ClockProbe;
    c.probe_id = probe_id;
    c.t_probe = sched_.now();
    send(pair_id_, std::move(c));
  }

  void on_message(const Envelope& env) {
    ++received_;
    if (const auto* c = std::get_if<ControlPayload>(&env.payload)) {
      on_control(env, *c);
    } else if (const auto* s = std::get_if<StrokePayload>(&env.payload)) {
      on_partner_stroke(env, *s);
    }
  }

  const std::vector<Verdict>& verdicts() const { return verdicts_; }
  const std::vector<double>& echo_rtts_ms() const { return rtts_; }
  bool session_complete() const { return done_; }
  std::size_t strokes_completed() const { return strokes_completed_; }
  std::size_t received() const { return received_; }

 private:
  enum class View { Free, Mine, Theirs, Done };

  struct Drawing {
    std::string stroke_id;
    SlotRef slot;
    std::string session;
    std::int64_t begin_seq = 0;
    Micros t0{0};
    double progress = 0.0;
  };

  void send(const std::string& session, Payload p) {
    Envelope e;
    e.seq = ++seq_[session];
    e.sender = script_.id;
    e.session = session;
    e.t_sent = sched_.now();
    e.payload = std::move(p);
    if (link_.send) link_.send(e);
  }

  void on_control(const Envelope& env, const ControlPayload& c) {
    switch (c.kind) {
      case ControlKind::ConditionStart:
        start_condition(env, c);
        break;
      case ControlKind::ConditionEnd:
        if (env.session != session_) break;
        stop_drawing();
        active_ = false;
        if (script_.rates) after(script_.rating_delay, [this, session = session_] { submit_ratings(session); });
        break;
      case ControlKind::TurnGrant:
        if (env.session == session_) turn_owner_ = *c.turn_owner;
        break;
      case ControlKind::ClaimResult:
        verdicts_.push_back(*c.verdict);
        if (drawing_ && env.session == drawing_->session && c.verdict->ref_seq == drawing_->begin_seq &&
            !c.verdict->accepted)
          on_begin_rejected(*c.verdict->reason);
        break;
      case ControlKind::SessionComplete:
        done_ = true;
        active_ = false;
        cancel_all();
        break;
      case ControlKind::ClockEcho:
        rtts_.push_back(to_ms(sched_.now() - *c.t_probe));
        break;
      default:
        break;
    }
  }

  void start_condition(const Envelope& env, const ControlPayload& c) {
    cancel_all();
    drawing_.reset();
    session_ = env.session;
    condition_ = *c.condition;
    index_ = static_cast<std::size_t>(*c.index);
    active_ = true;
    view_.clear();
    order_.clear();
    blocked_.clear();
    partner_strokes_.clear();
    const auto& snap = *c.snapshot;
    partner_ = snap.participants[0] == script_.id ? snap.participants[1] : snap.participants[0];
    turn_owner_ = c.turn_owner.value_or(snap.turn_owner);
    for (const auto& [ref, st] : snap.slots) {
      order_.push_back(ref);
      view_[ref] = st.state == SlotStatus::State::Unclaimed ? View::Free
                   : st.state == SlotStatus::State::Completed ? View::Done
                                                              : View::Theirs;
    }
    if (script_.disconnect && script_.disconnect->condition_index == index_ && !disconnected_once_) {
      disconnected_once_ = true;
      after(script_.disconnect->after_start, [this] { drop_link(); });
    }
    start_next();
  }

  void drop_link() {
    cancel_all();
    drawing_.reset();
    active_ = false;
    seq_.clear();
    if (link_.disconnect) link_.disconnect();
    if (script_.disconnect->rejoin_after) {
      after(*script_.disconnect->rejoin_after, [this] {
        if (link_.reconnect) link_.reconnect();
        join();
      });
    }
  }

  void on_partner_stroke(const Envelope& env, const StrokePayload& s) {
    if (env.sender != partner_ || env.session != session_) return;
    switch (s.kind) {
      case StrokeKind::BeginStroke:
        partner_strokes_[*s.stroke_id] = *s.slot;
        if (view_[*s.slot] != View::Done) view_[*s.slot] = View::Theirs;
        break;
      case StrokeKind::EndStroke: {
        auto it = partner_strokes_.find(*s.stroke_id);
        if (it != partner_strokes_.end()) view_[it->second] = View::Done;
        // The turn passes when the partner's finished stroke becomes visible.
        if (condition_.mode == Mode::SC) {
          turn_owner_ = script_.id;
          start_next();
        }
        break;
      }
      case StrokeKind::Erase: {
        auto it = partner_strokes_.find(*s.stroke_id);
        if (it != partner_strokes_.end()) view_[it->second] = View::Free;
        break;
      }
      default:
        break;
    }
  }

  std::optional<SlotRef> choose() {
    std::vector<SlotRef> free;
    for (const auto& ref : order_) {
      const bool usable = script_.fc_policy == FcPolicy::AdversarialSameSlot && condition_.mode == Mode::FC
                              ? !blocked_.contains(ref)
                              : view_[ref] == View::Free;
      if (usable) free.push_back(ref);
    }
    if (free.empty()) return std::nullopt;
    if (condition_.mode == Mode::SC) return free.front();
    switch (script_.fc_policy) {
      case FcPolicy::ReverseOrder:
        return free.back();
      case FcPolicy::Random:
        return free[rng_.uniform(free.size())];
      default:
        return free.front();
    }
  }

  void start_next() {
    if (script_.passive || !active_ || drawing_) return;
    if (condition_.mode == Mode::SC && turn_owner_ != script_.id) return;
    auto slot = choose();
    if (!slot) return;
    Drawing d;
    d.stroke_id = script_.id + "-" + std::to_string(index_) + "-" + std::to_string(++stroke_counter_);
    d.slot = *slot;
    d.session = session_;
    d.t0 = sched_.now();
    StrokePayload p;
    p.kind = StrokeKind::BeginStroke;
    p.stroke_id = d.stroke_id;
    p.slot = d.slot;
    p.color = PenColor::Black;
    d.begin_seq = seq_[session_] + 1;
    drawing_ = d;
    view_[*slot] = View::Mine;
    blocked_.insert(*slot);
    send(session_, std::move(p));
    schedule_tick(1);
  }

  void schedule_tick(std::int64_t k) {
    const Micros t = drawing_->t0 + tick_offset(k, script_.tick_rate);
    if (t >= drawing_->t0 + script_.stroke_duration) {
      stroke_timer_ = after_at(drawing_->t0 + script_.stroke_duration, [this] { finish_stroke(); });
      return;
    }
    stroke_timer_ = after_at(t, [this, k] {
      draw_tick();
      schedule_tick(k + 1);
    });
  }

  Point along(double f) const {
    const auto& poly = templates_.polyline(drawing_->slot);
    const double pos = std::clamp(f, 0.0, 1.0) * static_cast<double>(poly.size() - 1);
    const auto i = std::min(static_cast<std::size_t>(pos), poly.size() - 2);
    const double u = pos - static_cast<double>(i);
    Point p{poly[i].x + (poly[i + 1].x - poly[i].x) * u, poly[i].y + (poly[i + 1].y - poly[i].y) * u};
    return {std::clamp(p.x, 0.0, 1.0), std::clamp(p.y, 0.0, 1.0)};
  }

  void draw_tick() {
    const double f = static_cast<double>((sched_.now() - drawing_->t0).count()) /
                     static_cast<double>(script_.stroke_duration.count());
    StrokePayload p;
    p.kind = StrokeKind::AppendPoints;
    p.stroke_id = drawing_->stroke_id;
    for (int i = 1; i <= script_.points_per_tick; ++i)
      p.points.push_back(along(drawing_->progress + (f - drawing_->progress) * i / script_.points_per_tick));
    drawing_->progress = f;
    const Point cursor = p.points.back();
    send(drawing_->session, std::move(p));
    if (script_.presence) send(drawing_->session, PresencePayload{cursor, true, {}});
  }

  void finish_stroke() {
    stroke_timer_.reset();
    StrokePayload p;
    p.kind = StrokeKind::EndStroke;
    p.stroke_id = drawing_->stroke_id;
    const SlotRef slot = drawing_->slot;
    send(drawing_->session, std::move(p));
    view_[slot] = View::Done;
    drawing_.reset();
    ++strokes_completed_;
    if (condition_.mode == Mode::SC) {
      turn_owner_ = partner_;
    } else {
      start_next();
    }
  }

  void on_begin_rejected(RejectReason reason) {
    const SlotRef slot = drawing_->slot;
    stop_drawing();
    if (reason == RejectReason::SlotTaken) {
      view_[slot] = View::Theirs;
      start_next();
    } else if (reason == RejectReason::NoActiveCondition || reason == RejectReason::SessionComplete) {
      active_ = false;
    } else {
      view_[slot] = View::Free;
    }
  }

  void stop_drawing() {
    if (stroke_timer_) {
      sched_.cancel(*stroke_timer_);
      timers_.erase(*stroke_timer_);
      stroke_timer_.reset();
    }
    drawing_.reset();
  }

  void submit_ratings(const std::string& session) {
    for (auto dim : kAllDimensions) {
      ControlPayload c;
      c.kind = ControlKind::RatingSubmit;
      RatingRecord r;
      r.pair_id = pair_id_;
      r.participant_id = script_.id;
      r.condition = condition_;
      r.dimension = dim;
      r.score = script_.fixed_score ? *script_.fixed_score : static_cast<int>(rng_.uniform(5)) + 1;
      r.t_submitted = sched_.now();
      c.rating = r;
      send(session, std::move(c));
    }
  }

  Scheduler::TaskId after_at(Micros t, std::function<void()> fn) {
    auto id = std::make_shared<Scheduler::TaskId>(0);
    *id = sched_.at(t, [this, id, fn = std::move(fn)] {
      timers_.erase(*id);
      fn();
    });
    timers_.insert(*id);
    return *id;
  }
  Scheduler::TaskId after(Micros d, std::function<void()> fn) { return after_at(sched_.now() + d, std::move(fn)); }

  void cancel_all() {
    for (auto id : timers_) sched_.cancel(id);
    timers_.clear();
    stroke_timer_.reset();
  }

  Scheduler& sched_;
  BotScript script_;
  std::string pair_id_;
  TemplateSet templates_;
  Rng rng_;
  BotLink link_;

  std::map<std::string, std::int64_t> seq_;
  std::string session_;
  Condition condition_;
  std::size_t index_ = 0;
  bool active_ = false;
  bool done_ = false;
  bool disconnected_once_ = false;
  std::string partner_;
  std::string turn_owner_;
  std::vector<SlotRef> order_;
  std::map<SlotRef, View> view_;
  std::set<SlotRef> blocked_;  // adversarial policy: learned only from own claims and rejections
  std::map<std::string, SlotRef> partner_strokes_;
  std::optional<Drawing> drawing_;
  std::optional<Scheduler::TaskId> stroke_timer_;
  std::set<Scheduler::TaskId> timers_;
  std::size_t stroke_counter_ = 0;
  std::size_t strokes_completed_ = 0;
  std::size_t received_ = 0;
  std::vector<Verdict> verdicts_;
  std::vector<double> rtts_;
};

// ---------------------------------------------------------------------------
// Delay measurement

struct DelayReport {
  std::vector<Micros> delays;  // egress release minus relay arrival
  std::vector<Micros> holds;   // Dt - Di in force for each message
  double tick_rate = 60.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  double mean_ms = 0.0;
  double p99_ms = 0.0;
  std::size_t violations = 0;
  bool conforming = true;

  std::size_t size() const { return delays.size(); }
};

/// Release-time law: hold <= delay < hold + 1/tick_rate.
inline bool delay_conforms(Micros delay, Micros hold, double tick_rate) {
  if (delay < hold) return false;
  return static_cast<long double>((delay - hold).count()) * static_cast<long double>(tick_rate) < 1'000'000.0L;
}

inline DelayReport make_delay_report(std::vector<Micros> delays, std::vector<Micros> holds, double tick_rate) {
  DelayReport r;
  r.tick_rate = tick_rate;
  for (std::size_t i = 0; i < delays.size(); ++i)
    if (!delay_conforms(delays[i], holds[i], tick_rate)) ++r.violations;
  r.conforming = r.violations == 0;
  if (!delays.empty()) {
    std::vector<Micros> sorted = delays;
    std::sort(sorted.begin(), sorted.end());
    r.min_ms = to_ms(sorted.front());
    r.max_ms = to_ms(sorted.back());
    double sum = 0.0;
    for (auto d : sorted) sum += to_ms(d);
    r.mean_ms = sum / static_cast<double>(sorted.size());
    const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(sorted.size())));
    r.p99_ms = to_ms(sorted[std::max<std::size_t>(rank, 1) - 1]);
  }
  r.delays = std::move(delays);
  r.holds = std::move(holds);
  return r;
}

/// Delay report over every egress entry of a run; the hold for each entry
/// comes from the condition its session belongs to.
inline DelayReport delay_report(const std::vector<SessionLogEntry>& log, const RunRecord& record,
                                const ExperimentConfig& config) {
  std::map<std::string, Micros> hold_by_session;
  for (const auto& c : record.conditions)
    hold_by_session[c.session_id] =
        from_ms(c.condition.latency_ms) - from_ms_real(config.inherent_for(c.condition.platform));
  std::vector<Micros> delays, holds;
  for (const auto& e : log) {
    if (e.direction != Direction::Egress || !e.release_delay) continue;
    auto it = hold_by_session.find(e.envelope.session);
    if (it == hold_by_session.end()) continue;
    delays.push_back(*e.release_delay);
    holds.push_back(it->second);
  }
  return make_delay_report(std::move(delays), std::move(holds), config.tick_rate);
}

inline nlohmann::json to_json(const DelayReport& r) {
  return {{"n", r.size()},           {"min_ms", r.min_ms},         {"max_ms", r.max_ms},
          {"mean_ms", r.mean_ms},    {"p99_ms", r.p99_ms},         {"violations", r.violations},
          {"conforming", r.conforming}, {"tick_rate", r.tick_rate}};
}

// ---------------------------------------------------------------------------
// Rule audit

/// Collaboration-rule check over the ingress log of one condition session.
/// SC: completers alternate. FC: every claim burst on a slot (the BeginStroke
/// attempts between two reverts) has exactly one acceptance, and no slot
/// completes twice.
struct RuleAudit {
  std::size_t completions = 0;
  std::size_t claim_bursts = 0;
  std::size_t contested_bursts = 0;  // bursts with more than one attempt
  std::size_t violations = 0;
  std::vector<std::string> notes;

  void violation(std::string what) {
    ++violations;
    if (notes.size() < 10) notes.push_back(std::move(what));
  }
};

inline RuleAudit audit_rules(const std::vector<SessionLogEntry>& log, const std::string& session, Mode mode) {
  struct Burst {
    std::size_t attempts = 0;
    std::size_t accepted = 0;
  };
  RuleAudit a;
  std::map<SlotRef, Burst> open;
  std::map<std::pair<std::string, std::string>, SlotRef> stroke_slot;
  std::set<SlotRef> completed;
  std::string last_completer;
  auto close_burst = [&](const SlotRef& slot) {
    auto it = open.find(slot);
    if (it == open.end()) return;
    ++a.claim_bursts;
    if (it->second.attempts > 1) ++a.contested_bursts;
    if (it->second.accepted != 1)
      a.violation(to_string(slot) + ": " + std::to_string(it->second.accepted) + " accepted claims in one burst");
    open.erase(it);
  };
  for (const auto& e : log) {
    if (e.direction != Direction::Ingress || e.envelope.session != session || !e.verdict) continue;
    const auto* s = std::get_if<StrokePayload>(&e.envelope.payload);
    if (!s) continue;
    const bool ok = e.verdict->accepted;
    const std::string& who = e.envelope.sender;
    switch (s->kind) {
      case StrokeKind::BeginStroke:
        // Only contests for the slot count as claims.
        if (!ok && e.verdict->reason != RejectReason::SlotTaken) break;
        if (completed.contains(*s->slot)) {
          if (ok) a.violation(to_string(*s->slot) + ": claim accepted on a completed slot");
          break;
        }
        ++open[*s->slot].attempts;
        if (ok) {
          ++open[*s->slot].accepted;
          stroke_slot[{who, *s->stroke_id}] = *s->slot;
        }
        break;
      case StrokeKind::EndStroke:
      case StrokeKind::Erase: {
        if (!ok) break;
        auto it = stroke_slot.find({who, *s->stroke_id});
        if (it == stroke_slot.end()) {
          a.violation("accepted " + std::string(token(s->kind)) + " for an unknown stroke");
          break;
        }
        const SlotRef slot = it->second;
        close_burst(slot);
        if (s->kind == StrokeKind::Erase) break;
        if (!completed.insert(slot).second) a.violation(to_string(slot) + ": completed twice");
        ++a.completions;
        if (mode == Mode::SC && !last_completer.empty() && last_completer == who)
          a.violation(to_string(slot) + ": " + who + " completed twice in a row");
        last_completer = who;
        break;
      }
      default:
        break;
    }
  }
  for (auto it = open.begin(); it != open.end();) close_burst((it++)->first);
  return a;
}

// ---------------------------------------------------------------------------
// Pair runtime

enum class ClockKind { Virtual, Real };

struct PairSpec {
  ConditionSchedule schedule;
  PairRunOptions options;
  std::array<BotScript, 2> bots;
  ClockKind clock = ClockKind::Virtual;
  bool codec_roundtrip = true;  // every message passes through encode/decode
};

struct PairOutcome {
  RunRecord record;
  SessionLog log;
  std::array<std::vector<Verdict>, 2> verdicts;
  std::chrono::duration<double> wall{0};
  Micros sim_end{0};
};

/// Two bots and a relay wired through in-process links. Each hop is a
/// scheduler post, so a send never re-enters the receiver.
class SimPair {
 public:
  explicit SimPair(PairSpec spec) : spec_(std::move(spec)) {
    if (spec_.clock == ClockKind::Virtual)
      sched_ = std::make_unique<VirtualScheduler>();
    else
      sched_ = std::make_unique<RealtimeScheduler>();
    run_ = std::make_unique<PairRun>(*sched_, spec_.schedule, spec_.options);
    for (std::size_t i = 0; i < 2; ++i) {
      bots_[i] =
          std::make_unique<Bot>(*sched_, spec_.bots[i], spec_.schedule.pair_id, spec_.options.templates);
      Bot* bot = bots_[i].get();
      const std::string id = bot->id();
      auto deliver = [this, bot](const Envelope& env) {
        sched_->post([this, bot, e = wire(env)] { bot->on_message(e); });
      };
      bot->attach({[this, id](const Envelope& env) {
                     sched_->post([this, id, e = wire(env)] { run_->receive(id, e); });
                   },
                   [this, id] { run_->disconnect(id); },
                   [this, id, deliver] { run_->connect(id, deliver); }});
      run_->connect(id, deliver);
    }
  }

  QueuedScheduler& scheduler() { return *sched_; }
  PairRun& run() { return *run_; }
  Bot& bot(std::size_t i) { return *bots_[i]; }

  void start() {
    for (auto& b : bots_) b->join();
  }

  /// Steps until the run finishes or nothing is left to do.
  void run_to_end() {
    while (!run_->finished() && sched_->step()) {
    }
  }

  PairOutcome outcome() const {
    PairOutcome o;
    o.record = run_->record();
    o.log = run_->log();
    for (std::size_t i = 0; i < 2; ++i) o.verdicts[i] = bots_[i]->verdicts();
    o.sim_end = sched_->now();
    return o;
  }

 private:
  Envelope wire(const Envelope& e) const { return spec_.codec_roundtrip ? decode(encode(e)) : e; }

  PairSpec spec_;
  std::unique_ptr<QueuedScheduler> sched_;
  std::unique_ptr<PairRun> run_;
  std::array<std::unique_ptr<Bot>, 2> bots_;
};

inline PairOutcome run_pair(PairSpec spec) {
  const auto t0 = std::chrono::steady_clock::now();
  SimPair pair(std::move(spec));
  pair.start();
  pair.run_to_end();
  auto out = pair.outcome();
  if (!out.record.finished && !out.record.error) {
    out.record.error = Errc::Deadlock;
    out.record.error_detail = "no pending events before the schedule finished";
  }
  out.wall = std::chrono::steady_clock::now() - t0;
  return out;
}

inline std::array<BotScript, 2> default_bots(std::uint64_t seed = 1) {
  BotScript a, b;
  a.id = "bot-a";
  b.id = "bot-b";
  a.seed = seed * 2 + 1;
  b.seed = seed * 2 + 2;
  b.fc_policy = FcPolicy::ReverseOrder;
  return {a, b};
}

/// Config whose only platform/mode/level are those of `c`, with inherent latency `di_ms`.
inline ExperimentConfig single_condition_config(const Condition& c, double di_ms, double tick_rate = 60.0) {
  ExperimentConfig cfg;
  cfg.latency_levels = {c.latency_ms};
  cfg.platforms = {c.platform};
  cfg.modes = {c.mode};
  cfg.inherent_latency_ms = {{c.platform, di_ms}};
  cfg.tick_rate = tick_rate;
  cfg.validate();
  return cfg;
}

struct ConditionSpec {
  Condition condition;
  double inherent_ms = 0.0;
  TemplateSet templates = default_templates();
  std::optional<std::size_t> task_slots;
  std::array<BotScript, 2> bots = default_bots();
  ClockKind clock = ClockKind::Virtual;
  double tick_rate = 60.0;
  bool codec_roundtrip = true;
  std::optional<Micros> deadlock_after = from_ms(10'000);
};

struct ConditionOutcome {
  PairOutcome pair;
  DelayReport delays;
  std::optional<Micros> task_duration;
};

inline ConditionOutcome run_condition(const ConditionSpec& spec) {
  PairSpec p;
  p.schedule = {"sim", 0, {spec.condition}};
  p.options.config = single_condition_config(spec.condition, spec.inherent_ms, spec.tick_rate);
  p.options.templates = spec.templates;
  p.options.session.task_slots = spec.task_slots;
  p.options.deadlock_after = spec.deadlock_after;
  p.bots = spec.bots;
  p.clock = spec.clock;
  p.codec_roundtrip = spec.codec_roundtrip;
  ConditionOutcome out;
  out.pair = run_pair(std::move(p));
  out.delays = delay_report(out.pair.log.snapshot(), out.pair.record, single_condition_config(spec.condition, spec.inherent_ms, spec.tick_rate));
  if (!out.pair.record.conditions.empty()) out.task_duration = out.pair.record.conditions[0].task_duration();
  return out;
}

/// Presence traffic from both participants at random microsecond gaps; the
/// report covers every message the relay released.
inline DelayReport measure_latency(std::int64_t dt_ms, double di_ms, std::size_t n_messages, std::uint64_t seed = 1,
                                   double tick_rate = 60.0, ClockKind clock = ClockKind::Virtual) {
  const Condition cond{Platform::PC, Mode::FC, dt_ms};
  PairSpec p;
  p.schedule = {"latency", seed, {cond}};
  p.options.config = single_condition_config(cond, di_ms, tick_rate);
  p.bots = default_bots(seed);
  for (auto& b : p.bots) {
    b.passive = true;
    b.rates = false;
  }
  p.clock = clock;
  p.codec_roundtrip = false;
  SimPair pair(p);
  pair.start();
  Rng rng(seed);
  auto& sched = pair.scheduler();
  std::size_t sent = 0;
  std::function<void()> emit = [&] {
    if (sent == n_messages) return;
    Bot& b = pair.bot(rng.uniform(2));
    b.send_presence({rng.unit(), rng.unit()}, rng.uniform(2) == 1);
    ++sent;
    sched.after(Micros{static_cast<std::int64_t>(rng.uniform(40'001))}, emit);
  };
  sched.after(from_ms(1), emit);
  sched.run();
  return delay_report(pair.run().log().snapshot(), pair.run().record(), p.options.config);
}

struct TimingCheck {
  std::size_t slots = 0;
  Micros stroke{0};
  Micros hold{0};
  Micros tick{0};         // nominal tick, rounded up
  Micros predicted{0};    // N d + (N - 1) hold
  Micros lower{0};
  Micros upper{0};        // N d + (N - 1)(hold + tick) + tick
  Micros measured{0};
  bool within = false;
  std::optional<Errc> error;
};

/// SC completion time against its closed form on the virtual clock.
inline TimingCheck sc_timing_check(std::size_t n_slots, Micros stroke, std::int64_t dt_ms, double di_ms,
                                   double tick_rate = 60.0) {
  ConditionSpec spec;
  spec.condition = {Platform::PC, Mode::SC, dt_ms};
  spec.inherent_ms = di_ms;
  spec.templates = n_slots <= default_templates().slot_count() ? default_templates() : uniform_templates(n_slots);
  spec.task_slots = n_slots;
  spec.tick_rate = tick_rate;
  for (auto& b : spec.bots) {
    b.stroke_duration = stroke;
    b.tick_rate = tick_rate;
  }
  spec.codec_roundtrip = false;
  const auto out = run_condition(spec);

  TimingCheck t;
  t.slots = n_slots;
  t.stroke = stroke;
  t.hold = from_ms(dt_ms) - from_ms_real(di_ms);
  t.tick = Micros{static_cast<std::int64_t>(std::ceil(1'000'000.0 / tick_rate))};
  const auto n = static_cast<std::int64_t>(n_slots);
  t.predicted = n * stroke + (n - 1) * t.hold;
  t.lower = t.predicted;
  t.upper = n * stroke + (n - 1) * (t.hold + t.tick) + t.tick;
  t.error = out.pair.record.error;
  if (out.task_duration) {
    t.measured = *out.task_duration;
    t.within = !t.error && t.measured >= t.lower && t.measured <= t.upper;
  }
  return t;
}

/// FC completion time with one bot working forward and the other backward
/// through the slots.
inline std::optional<Micros> fc_completion(std::size_t n_slots, Micros stroke, std::int64_t dt_ms, double di_ms,
                                           double tick_rate = 60.0) {
  ConditionSpec spec;
  spec.condition = {Platform::PC, Mode::FC, dt_ms};
  spec.inherent_ms = di_ms;
  spec.task_slots = n_slots;
  spec.tick_rate = tick_rate;
  spec.bots[0].fc_policy = FcPolicy::InOrder;
  spec.bots[1].fc_policy = FcPolicy::ReverseOrder;
  for (auto& b : spec.bots) {
    b.stroke_duration = stroke;
    b.tick_rate = tick_rate;
  }
  spec.codec_roundtrip = false;
  return run_condition(spec).task_duration;
}

/// Full schedule for one pair with rating bots.
inline PairOutcome run_experiment(const std::string& pair_id, std::uint64_t seed, const ExperimentConfig& config = {},
                                  TemplateSet templates = default_templates(), bool codec_roundtrip = true) {
  PairSpec p;
  p.schedule = generate_schedule(pair_id, config, seed);
  p.options.config = config;
  p.options.templates = std::move(templates);
  p.options.deadlock_after = from_ms(10'000);
  p.bots = default_bots(seed);
  p.codec_roundtrip = codec_roundtrip;
  return run_pair(std::move(p));
}

}  // namespace wbqoe::sim
