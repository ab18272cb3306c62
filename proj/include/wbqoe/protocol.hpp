#pragma once

// Wire format for every message exchanged between clients, bots and the relay.
//
// Frame = 4-byte big-endian body length, then a UTF-8 JSON body with exactly
// the keys v, type, seq, sender, session, t_sent, payload. Object keys are
// emitted in sorted order, so a given envelope has exactly one encoding.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "wbqoe/error.hpp"
#include "wbqoe/types.hpp"

namespace wbqoe {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxPointsPerAppend = 64;
inline constexpr std::uint32_t kMaxFrameBody = 1u << 22;

struct ControlPayload {
  ControlKind kind = ControlKind::JoinSession;
  std::optional<Condition> condition;
  std::optional<RatingRecord> rating;
  std::optional<std::int64_t> probe_id;
  std::optional<Micros> t_probe;
  std::optional<Micros> t_echo;
  // ClaimResult carries the relay's verdict on one of the recipient's own messages.
  std::optional<Verdict> verdict;
  // TurnGrant / ConditionStart: who may draw next in SC.
  std::optional<std::string> turn_owner;
  // ConditionStart / ConditionEnd: position in the pair's schedule.
  std::optional<std::int64_t> index;
  std::optional<BoardSnapshot> snapshot;
  friend bool operator==(const ControlPayload&, const ControlPayload&) = default;
};

enum class MsgType { Stroke, Presence, Control };
inline constexpr std::array<std::string_view, 3> kMsgTypeTokens = {"stroke", "presence", "control"};

using Payload = std::variant<StrokePayload, PresencePayload, ControlPayload>;

struct Envelope {
  int version = kProtocolVersion;
  std::int64_t seq = 1;
  std::string sender;
  std::string session;
  Micros t_sent{0};
  Payload payload;

  MsgType msg_type() const { return static_cast<MsgType>(payload.index()); }
  friend bool operator==(const Envelope&, const Envelope&) = default;
};

using Bytes = std::vector<std::uint8_t>;

// ---------------------------------------------------------------------------
// Validation

namespace detail {

[[noreturn]] inline void invalid(const std::string& what) { throw Error(Errc::InvalidEnvelope, what); }

inline void validate_stroke(const StrokePayload& p) {
  const bool needs_id = p.kind != StrokeKind::ClearBoard && p.kind != StrokeKind::SetColor;
  if (needs_id != p.stroke_id.has_value()) invalid("stroke_id presence does not match kind");
  if (p.stroke_id && p.stroke_id->empty()) invalid("empty stroke_id");
  if ((p.kind == StrokeKind::BeginStroke) != p.slot.has_value())
    invalid("slot_ref is present only on begin_stroke");
  if (p.slot) {
    if (p.slot->template_index < 0 || p.slot->template_index > 5) invalid("template_index out of range");
    if (p.slot->slot_index < 0) invalid("negative slot_index");
  }
  const bool needs_color = p.kind == StrokeKind::BeginStroke || p.kind == StrokeKind::SetColor;
  if (needs_color != p.color.has_value()) invalid("color presence does not match kind");
  if (p.kind == StrokeKind::AppendPoints) {
    if (p.points.empty() || p.points.size() > kMaxPointsPerAppend)
      invalid("append_points carries 1-64 points");
  } else if (!p.points.empty()) {
    invalid("points are only carried by append_points");
  }
  for (const auto& pt : p.points)
    if (!in_unit_square(pt)) invalid("point outside the unit square");
}

inline void validate_rating(const RatingRecord& r) {
  if (r.score < 1 || r.score > 5) invalid("rating score outside 1-5");
  if (r.condition.latency_ms < 0) invalid("negative latency");
  if (r.t_submitted.count() < 0) invalid("negative t_submitted");
}

inline void validate_control(const ControlPayload& c) {
  switch (c.kind) {
    case ControlKind::RatingSubmit:
      if (!c.rating) invalid("rating_submit carries exactly one rating");
      break;
    case ControlKind::ClockProbe:
      if (!c.probe_id || !c.t_probe) invalid("clock_probe needs probe_id and t_probe");
      break;
    case ControlKind::ClockEcho:
      if (!c.probe_id || !c.t_probe || !c.t_echo) invalid("clock_echo needs probe_id, t_probe, t_echo");
      break;
    case ControlKind::ClaimResult:
      if (!c.verdict) invalid("claim_result carries a verdict");
      break;
    case ControlKind::TurnGrant:
      if (!c.turn_owner) invalid("turn_grant names the turn owner");
      break;
    case ControlKind::ConditionStart:
      if (!c.condition || !c.index) invalid("condition_start carries condition and index");
      break;
    default:
      break;
  }
  if (c.rating && c.kind != ControlKind::RatingSubmit) invalid("rating only on rating_submit");
  if (c.rating) validate_rating(*c.rating);
  if (c.verdict && c.verdict->accepted == c.verdict->reason.has_value())
    invalid("verdict has a reason iff rejected");
}

}  // namespace detail

inline void validate(const Envelope& e) {
  if (e.version != kProtocolVersion) detail::invalid("unsupported version");
  if (e.seq < 1) detail::invalid("seq starts at 1");
  if (e.t_sent.count() < 0) detail::invalid("negative t_sent");
  if (e.sender.empty()) detail::invalid("empty sender");
  if (const auto* s = std::get_if<StrokePayload>(&e.payload)) detail::validate_stroke(*s);
  if (const auto* p = std::get_if<PresencePayload>(&e.payload)) {
    if (!in_unit_square(p->cursor)) detail::invalid("cursor outside the unit square");
  }
  if (const auto* c = std::get_if<ControlPayload>(&e.payload)) detail::validate_control(*c);
}

// ---------------------------------------------------------------------------
// JSON mapping

namespace detail {

using nlohmann::json;

struct Bad : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class E>
E enum_from(const json& j, std::optional<E> (*parse)(std::string_view), const char* what) {
  if (!j.is_string()) throw Bad(std::string(what) + " is not a string");
  auto v = parse(j.get<std::string>());
  if (!v) throw Bad(std::string("unknown ") + what + " '" + j.get<std::string>() + "'");
  return *v;
}

inline json ms_json(Micros t) { return to_ms(t); }
inline Micros ms_from(const json& j) {
  if (!j.is_number()) throw Bad("time is not a number");
  return from_ms_real(j.get<double>());
}

inline json point_json(Point p) { return json::array({p.x, p.y}); }
inline Point point_from(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw Bad("point is not [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline std::int64_t int_from(const json& j, const char* what) {
  if (!j.is_number_integer()) throw Bad(std::string(what) + " is not an integer");
  return j.get<std::int64_t>();
}

inline std::string str_from(const json& j, const char* what) {
  if (!j.is_string()) throw Bad(std::string(what) + " is not a string");
  return j.get<std::string>();
}

}  // namespace detail

inline nlohmann::json to_json(const Condition& c) {
  return {{"platform", token(c.platform)}, {"mode", token(c.mode)}, {"latency_ms", c.latency_ms}};
}

inline Condition condition_from_json(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) throw Bad("condition is not an object");
  Condition c;
  c.platform = enum_from<Platform>(j.at("platform"), parse_Platform, "platform");
  c.mode = enum_from<Mode>(j.at("mode"), parse_Mode, "mode");
  c.latency_ms = int_from(j.at("latency_ms"), "latency_ms");
  return c;
}

inline nlohmann::json to_json(const RatingRecord& r) {
  return {{"pair_id", r.pair_id},
          {"participant_id", r.participant_id},
          {"condition", to_json(r.condition)},
          {"dimension", token(r.dimension)},
          {"score", r.score},
          {"t_submitted", detail::ms_json(r.t_submitted)}};
}

inline RatingRecord rating_from_json(const nlohmann::json& j) {
  using namespace detail;
  RatingRecord r;
  r.pair_id = str_from(j.at("pair_id"), "pair_id");
  r.participant_id = str_from(j.at("participant_id"), "participant_id");
  r.condition = condition_from_json(j.at("condition"));
  r.dimension = enum_from<Dimension>(j.at("dimension"), parse_Dimension, "dimension");
  r.score = static_cast<int>(int_from(j.at("score"), "score"));
  r.t_submitted = ms_from(j.at("t_submitted"));
  return r;
}

inline nlohmann::json to_json(const StrokePayload& p) {
  nlohmann::json j = {{"kind", token(p.kind)}};
  if (p.stroke_id) j["stroke_id"] = *p.stroke_id;
  if (p.slot) j["slot"] = nlohmann::json::array({p.slot->template_index, p.slot->slot_index});
  if (!p.points.empty()) {
    auto pts = nlohmann::json::array();
    for (const auto& pt : p.points) pts.push_back(detail::point_json(pt));
    j["points"] = std::move(pts);
  }
  if (p.color) j["color"] = token(*p.color);
  return j;
}

inline StrokePayload stroke_from_json(const nlohmann::json& j) {
  using namespace detail;
  StrokePayload p;
  p.kind = enum_from<StrokeKind>(j.at("kind"), parse_StrokeKind, "stroke kind");
  if (j.contains("stroke_id")) p.stroke_id = str_from(j["stroke_id"], "stroke_id");
  if (j.contains("slot")) {
    const auto& s = j["slot"];
    if (!s.is_array() || s.size() != 2) throw Bad("slot is not [template, slot]");
    p.slot = SlotRef{static_cast<int>(int_from(s[0], "template_index")),
                     static_cast<int>(int_from(s[1], "slot_index"))};
  }
  if (j.contains("points")) {
    if (!j["points"].is_array()) throw Bad("points is not an array");
    for (const auto& pt : j["points"]) p.points.push_back(point_from(pt));
  }
  if (j.contains("color")) p.color = enum_from<PenColor>(j["color"], parse_PenColor, "color");
  return p;
}

inline nlohmann::json to_json(const PresencePayload& p) {
  nlohmann::json j = {{"cursor", detail::point_json(p.cursor)}, {"pen_down", p.pen_down}};
  if (!p.pose_hint.empty()) j["pose_hint"] = p.pose_hint;
  return j;
}

inline PresencePayload presence_from_json(const nlohmann::json& j) {
  using namespace detail;
  PresencePayload p;
  p.cursor = point_from(j.at("cursor"));
  if (!j.at("pen_down").is_boolean()) throw Bad("pen_down is not a boolean");
  p.pen_down = j["pen_down"].get<bool>();
  if (j.contains("pose_hint")) {
    if (!j["pose_hint"].is_array()) throw Bad("pose_hint is not an array");
    for (const auto& v : j["pose_hint"]) {
      if (!v.is_number()) throw Bad("pose_hint entry is not a number");
      p.pose_hint.push_back(v.get<double>());
    }
  }
  return p;
}

inline nlohmann::json to_json(const SlotStatus& s) {
  nlohmann::json j = {{"state", kSlotStateTokens[static_cast<std::size_t>(s.state)]}};
  if (s.state != SlotStatus::State::Unclaimed) {
    j["participant"] = s.participant;
    j["stroke_id"] = s.stroke_id;
  }
  return j;
}

inline SlotStatus slot_status_from_json(const nlohmann::json& j) {
  using namespace detail;
  SlotStatus s;
  const auto st = str_from(j.at("state"), "slot state");
  bool found = false;
  for (std::size_t i = 0; i < kSlotStateTokens.size(); ++i) {
    if (kSlotStateTokens[i] == st) {
      s.state = static_cast<SlotStatus::State>(i);
      found = true;
    }
  }
  if (!found) throw Bad("unknown slot state");
  if (s.state != SlotStatus::State::Unclaimed) {
    s.participant = str_from(j.at("participant"), "participant");
    s.stroke_id = str_from(j.at("stroke_id"), "stroke_id");
  }
  return s;
}

inline nlohmann::json to_json(const BoardSnapshot& b) {
  nlohmann::json slots = nlohmann::json::array();
  for (const auto& [ref, st] : b.slots) {
    auto e = to_json(st);
    e["slot"] = nlohmann::json::array({ref.template_index, ref.slot_index});
    slots.push_back(std::move(e));
  }
  nlohmann::json strokes = nlohmann::json::array();
  for (const auto& ev : b.strokes) strokes.push_back({{"sender", ev.sender}, {"payload", to_json(ev.payload)}});
  return {{"mode", token(b.mode)},
          {"participants", nlohmann::json::array({b.participants[0], b.participants[1]})},
          {"slots", std::move(slots)},
          {"strokes", std::move(strokes)},
          {"turn_owner", b.turn_owner},
          {"complete", b.complete}};
}

inline BoardSnapshot snapshot_from_json(const nlohmann::json& j) {
  using namespace detail;
  BoardSnapshot b;
  b.mode = enum_from<Mode>(j.at("mode"), parse_Mode, "mode");
  const auto& ps = j.at("participants");
  if (!ps.is_array() || ps.size() != 2) throw Bad("participants is not a pair");
  b.participants = {str_from(ps[0], "participant"), str_from(ps[1], "participant")};
  for (const auto& e : j.at("slots")) {
    const auto& s = e.at("slot");
    if (!s.is_array() || s.size() != 2) throw Bad("slot is not [template, slot]");
    b.slots.emplace_back(SlotRef{static_cast<int>(int_from(s[0], "template_index")),
                                 static_cast<int>(int_from(s[1], "slot_index"))},
                         slot_status_from_json(e));
  }
  for (const auto& e : j.at("strokes"))
    b.strokes.push_back({str_from(e.at("sender"), "sender"), stroke_from_json(e.at("payload"))});
  b.turn_owner = str_from(j.at("turn_owner"), "turn_owner");
  if (!j.at("complete").is_boolean()) throw Bad("complete is not a boolean");
  b.complete = j["complete"].get<bool>();
  return b;
}

inline nlohmann::json to_json(const Verdict& v) {
  nlohmann::json j = {{"ref_seq", v.ref_seq}, {"accepted", v.accepted}};
  if (v.reason) j["reason"] = token(*v.reason);
  return j;
}

inline Verdict verdict_from_json(const nlohmann::json& j) {
  using namespace detail;
  Verdict v;
  v.ref_seq = int_from(j.at("ref_seq"), "ref_seq");
  if (!j.at("accepted").is_boolean()) throw Bad("accepted is not a boolean");
  v.accepted = j["accepted"].get<bool>();
  if (j.contains("reason")) v.reason = enum_from<RejectReason>(j["reason"], parse_RejectReason, "reason");
  return v;
}

inline nlohmann::json to_json(const ControlPayload& c) {
  nlohmann::json j = {{"kind", token(c.kind)}};
  if (c.condition) j["condition"] = to_json(*c.condition);
  if (c.rating) j["rating"] = to_json(*c.rating);
  if (c.probe_id) j["probe_id"] = *c.probe_id;
  if (c.t_probe) j["t_probe"] = detail::ms_json(*c.t_probe);
  if (c.t_echo) j["t_echo"] = detail::ms_json(*c.t_echo);
  if (c.verdict) j["verdict"] = to_json(*c.verdict);
  if (c.turn_owner) j["turn_owner"] = *c.turn_owner;
  if (c.index) j["index"] = *c.index;
  if (c.snapshot) j["snapshot"] = to_json(*c.snapshot);
  return j;
}

inline ControlPayload control_from_json(const nlohmann::json& j) {
  using namespace detail;
  ControlPayload c;
  c.kind = enum_from<ControlKind>(j.at("kind"), parse_ControlKind, "control kind");
  if (j.contains("condition")) c.condition = condition_from_json(j["condition"]);
  if (j.contains("rating")) c.rating = rating_from_json(j["rating"]);
  if (j.contains("probe_id")) c.probe_id = int_from(j["probe_id"], "probe_id");
  if (j.contains("t_probe")) c.t_probe = ms_from(j["t_probe"]);
  if (j.contains("t_echo")) c.t_echo = ms_from(j["t_echo"]);
  if (j.contains("verdict")) c.verdict = verdict_from_json(j["verdict"]);
  if (j.contains("turn_owner")) c.turn_owner = str_from(j["turn_owner"], "turn_owner");
  if (j.contains("index")) c.index = int_from(j["index"], "index");
  if (j.contains("snapshot")) c.snapshot = snapshot_from_json(j["snapshot"]);
  return c;
}

inline nlohmann::json to_json(const Envelope& e) {
  nlohmann::json payload = std::visit([](const auto& p) { return to_json(p); }, e.payload);
  return {{"v", e.version},
          {"type", kMsgTypeTokens[static_cast<std::size_t>(e.msg_type())]},
          {"seq", e.seq},
          {"sender", e.sender},
          {"session", e.session},
          {"t_sent", detail::ms_json(e.t_sent)},
          {"payload", std::move(payload)}};
}

/// Parses an envelope body. Throws Error with UnknownVersion, UnknownMsgType
/// or MalformedFrame (which also covers bodies violating type invariants).
inline Envelope envelope_from_json(const nlohmann::json& j) {
  using namespace detail;
  if (!j.is_object()) throw Error(Errc::MalformedFrame, "body is not an object");
  static constexpr std::array<std::string_view, 7> keys = {"v", "type", "seq", "sender",
                                                            "session", "t_sent", "payload"};
  if (j.size() != keys.size()) throw Error(Errc::MalformedFrame, "unexpected key set");
  for (auto k : keys)
    if (!j.contains(std::string(k))) throw Error(Errc::MalformedFrame, "missing key " + std::string(k));
  if (!j["v"].is_number_integer() || j["v"].get<std::int64_t>() != kProtocolVersion)
    throw Error(Errc::UnknownVersion, "version " + j["v"].dump());
  if (!j["type"].is_string()) throw Error(Errc::MalformedFrame, "type is not a string");
  const auto type = j["type"].get<std::string>();
  std::optional<std::size_t> type_index;
  for (std::size_t i = 0; i < kMsgTypeTokens.size(); ++i)
    if (kMsgTypeTokens[i] == type) type_index = i;
  if (!type_index) throw Error(Errc::UnknownMsgType, type);

  Envelope e;
  try {
    e.version = kProtocolVersion;
    e.seq = int_from(j["seq"], "seq");
    e.sender = str_from(j["sender"], "sender");
    e.session = str_from(j["session"], "session");
    e.t_sent = ms_from(j["t_sent"]);
    const auto& p = j["payload"];
    if (!p.is_object()) throw Bad("payload is not an object");
    switch (static_cast<MsgType>(*type_index)) {
      case MsgType::Stroke: e.payload = stroke_from_json(p); break;
      case MsgType::Presence: e.payload = presence_from_json(p); break;
      case MsgType::Control: e.payload = control_from_json(p); break;
    }
    validate(e);
  } catch (const Bad& b) {
    throw Error(Errc::MalformedFrame, b.what());
  } catch (const nlohmann::json::exception& x) {
    throw Error(Errc::MalformedFrame, x.what());
  } catch (const Error& x) {
    if (x.code() == Errc::InvalidEnvelope) throw Error(Errc::MalformedFrame, x.what());
    throw;
  }
  return e;
}

// ---------------------------------------------------------------------------
// Framing

inline void append_frame(Bytes& out, std::string_view body) {
  const auto n = static_cast<std::uint32_t>(body.size());
  out.push_back(static_cast<std::uint8_t>(n >> 24));
  out.push_back(static_cast<std::uint8_t>(n >> 16));
  out.push_back(static_cast<std::uint8_t>(n >> 8));
  out.push_back(static_cast<std::uint8_t>(n));
  out.insert(out.end(), body.begin(), body.end());
}

inline std::string encode_body(const Envelope& e) {
  validate(e);
  return to_json(e).dump();
}

/// Length-prefixed frame for one envelope. Throws InvalidEnvelope.
inline Bytes encode(const Envelope& e) {
  const auto body = encode_body(e);
  if (body.size() > kMaxFrameBody) throw Error(Errc::InvalidEnvelope, "envelope too large");
  Bytes out;
  out.reserve(body.size() + 4);
  append_frame(out, body);
  return out;
}

inline Envelope decode_body(std::string_view body) {
  auto j = nlohmann::json::parse(body.begin(), body.end(), nullptr, false);
  if (j.is_discarded()) throw Error(Errc::MalformedFrame, "body is not valid JSON");
  return envelope_from_json(j);
}

/// Incremental frame splitter for byte streams. Feed arbitrary chunks and
/// pop complete envelopes.
class FrameReader {
 public:
  void feed(std::span<const std::uint8_t> chunk) { buf_.insert(buf_.end(), chunk.begin(), chunk.end()); }

  /// Next complete envelope, or nullopt when more bytes are needed.
  std::optional<Envelope> next() {
    if (buf_.size() - pos_ < 4) return std::nullopt;
    const std::uint32_t n = (std::uint32_t{buf_[pos_]} << 24) | (std::uint32_t{buf_[pos_ + 1]} << 16) |
                            (std::uint32_t{buf_[pos_ + 2]} << 8) | std::uint32_t{buf_[pos_ + 3]};
    if (n > kMaxFrameBody) throw Error(Errc::MalformedFrame, "length prefix exceeds limit");
    if (buf_.size() - pos_ - 4 < n) return std::nullopt;
    std::string_view body(reinterpret_cast<const char*>(buf_.data() + pos_ + 4), n);
    pos_ += 4 + n;
    auto env = decode_body(body);
    if (pos_ == buf_.size()) {
      buf_.clear();
      pos_ = 0;
    }
    return env;
  }

  std::size_t buffered() const { return buf_.size() - pos_; }

 private:
  Bytes buf_;
  std::size_t pos_ = 0;
};

/// Decodes exactly one frame. Throws MalformedFrame on a bad length prefix,
/// truncation or trailing bytes.
inline Envelope decode(std::span<const std::uint8_t> bytes) {
  FrameReader r;
  r.feed(bytes);
  auto e = r.next();
  if (!e) throw Error(Errc::MalformedFrame, "truncated frame");
  if (r.buffered() != 0) throw Error(Errc::MalformedFrame, "trailing bytes after frame");
  return *e;
}

/// Decodes a concatenation of frames.
inline std::vector<Envelope> decode_all(std::span<const std::uint8_t> bytes) {
  FrameReader r;
  r.feed(bytes);
  std::vector<Envelope> out;
  while (auto e = r.next()) out.push_back(std::move(*e));
  if (r.buffered() != 0) throw Error(Errc::MalformedFrame, "truncated frame");
  return out;
}

// ---------------------------------------------------------------------------
// Sequencing

enum class SeqVerdict { Accept, RejectDuplicate, RejectGap };

/// prev_seq is the last accepted seq for (sender, session); 0 before the first.
constexpr SeqVerdict check_sequence(std::int64_t prev_seq, std::int64_t seq) {
  if (seq == prev_seq + 1) return SeqVerdict::Accept;
  return seq <= prev_seq ? SeqVerdict::RejectDuplicate : SeqVerdict::RejectGap;
}

inline SeqVerdict check_sequence(std::int64_t prev_seq, const Envelope& env) {
  return check_sequence(prev_seq, env.seq);
}

}  // namespace wbqoe
