#pragma once

// Per-session whiteboard state and the two collaboration rule sets.
//
// SC: one open stroke session-wide; only the turn owner may begin, and
//     finishing a stroke hands the turn to the partner.
// FC: each participant may hold one open stroke; the first claim on an
//     unclaimed slot (in arrival order) wins.
//
// The engine is transport-agnostic and deterministic: the verdict and the new
// state depend only on (state, sender, payload).

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "wbqoe/error.hpp"
#include "wbqoe/templates.hpp"
#include "wbqoe/types.hpp"

namespace wbqoe {

struct OpenStroke {
  std::string participant;
  std::string stroke_id;
  SlotRef slot;
  friend bool operator==(const OpenStroke&, const OpenStroke&) = default;
};

struct SessionOptions {
  // Restrict the task to the first N slots in template order.
  std::optional<std::size_t> task_slots;
};

struct SessionState {
  std::array<std::string, 2> participants;
  Mode mode = Mode::SC;
  Condition condition;
  std::vector<SlotRef> task;  // template order
  std::map<SlotRef, SlotStatus> slot_status;
  std::vector<StrokeEvent> strokes;  // accepted events, append-only
  std::string turn_owner;            // SC only
  std::map<std::string, OpenStroke> open_strokes;
  std::vector<std::pair<SlotRef, std::string>> completions;  // chronological
  std::set<std::pair<std::string, std::string>> used_stroke_ids;
  bool complete = false;

  const std::string& partner_of(const std::string& p) const {
    return participants[0] == p ? participants[1] : participants[0];
  }
  bool is_participant(const std::string& p) const {
    return participants[0] == p || participants[1] == p;
  }
  std::size_t completed_count() const { return completions.size(); }

  friend bool operator==(const SessionState&, const SessionState&) = default;
};

inline SessionState create_session(std::array<std::string, 2> pair, Mode mode, const TemplateSet& templates,
                                   Condition condition, SessionOptions options = {}) {
  if (pair[0] == pair[1]) throw Error(Errc::DuplicateParticipant, "participants must be distinct");
  if (pair[0].empty() || pair[1].empty()) throw Error(Errc::DuplicateParticipant, "empty participant id");
  validate(templates);
  if (condition.mode != mode) throw Error(Errc::InvalidConfig, "condition mode differs from session mode");

  SessionState s;
  s.participants = std::move(pair);
  s.mode = mode;
  s.condition = condition;
  s.task = templates.slot_refs();
  if (options.task_slots) {
    if (*options.task_slots == 0 || *options.task_slots > s.task.size())
      throw Error(Errc::InvalidTemplateSet, "task_slots outside 1..slot_count");
    s.task.resize(*options.task_slots);
  }
  for (const auto& ref : s.task) s.slot_status.emplace(ref, SlotStatus{});
  s.turn_owner = std::min(s.participants[0], s.participants[1]);
  return s;
}

struct StrokeDelta {
  std::optional<std::pair<SlotRef, SlotStatus>> slot_change;
  std::optional<std::string> turn_owner;  // set when the SC turn passed
  bool completed = false;                 // this event completed the session
  friend bool operator==(const StrokeDelta&, const StrokeDelta&) = default;
};

/// Accepted(delta) when `reason` is empty, Rejected(reason) otherwise.
struct StrokeOutcome {
  std::optional<RejectReason> reason;
  StrokeDelta delta;

  bool accepted() const { return !reason.has_value(); }
  static StrokeOutcome reject(RejectReason r) { return {r, {}}; }
  friend bool operator==(const StrokeOutcome&, const StrokeOutcome&) = default;
};

namespace detail {

inline const OpenStroke* open_stroke_of(const SessionState& s, const std::string& sender,
                                        const std::optional<std::string>& stroke_id) {
  auto it = s.open_strokes.find(sender);
  if (it == s.open_strokes.end() || !stroke_id || it->second.stroke_id != *stroke_id) return nullptr;
  return &it->second;
}

}  // namespace detail

inline StrokeOutcome handle_stroke(SessionState& s, const std::string& sender, const StrokePayload& p) {
  using State = SlotStatus::State;
  if (!s.is_participant(sender)) return StrokeOutcome::reject(RejectReason::ActionNotAllowed);
  if (s.complete) return StrokeOutcome::reject(RejectReason::SessionComplete);

  StrokeOutcome out;
  switch (p.kind) {
    case StrokeKind::BeginStroke: {
      if (!p.slot || !p.stroke_id) return StrokeOutcome::reject(RejectReason::ActionNotAllowed);
      auto slot = s.slot_status.find(*p.slot);
      if (slot == s.slot_status.end()) return StrokeOutcome::reject(RejectReason::UnknownSlot);
      if (s.mode == Mode::SC) {
        if (sender != s.turn_owner) return StrokeOutcome::reject(RejectReason::NotYourTurn);
        if (!s.open_strokes.empty()) return StrokeOutcome::reject(RejectReason::StrokeAlreadyOpen);
      } else if (s.open_strokes.contains(sender)) {
        return StrokeOutcome::reject(RejectReason::StrokeAlreadyOpen);
      }
      if (slot->second.state != State::Unclaimed) return StrokeOutcome::reject(RejectReason::SlotTaken);
      if (s.used_stroke_ids.contains({sender, *p.stroke_id}))
        return StrokeOutcome::reject(RejectReason::ActionNotAllowed);

      slot->second = {State::Claimed, sender, *p.stroke_id};
      s.open_strokes[sender] = {sender, *p.stroke_id, *p.slot};
      s.used_stroke_ids.insert({sender, *p.stroke_id});
      out.delta.slot_change = {*p.slot, slot->second};
      break;
    }
    case StrokeKind::AppendPoints:
      if (!detail::open_stroke_of(s, sender, p.stroke_id)) return StrokeOutcome::reject(RejectReason::NoOpenStroke);
      break;
    case StrokeKind::EndStroke: {
      const auto* open = detail::open_stroke_of(s, sender, p.stroke_id);
      if (!open) return StrokeOutcome::reject(RejectReason::NoOpenStroke);
      const SlotRef ref = open->slot;
      auto& status = s.slot_status.at(ref);
      status.state = State::Completed;
      s.completions.emplace_back(ref, sender);
      s.open_strokes.erase(sender);
      out.delta.slot_change = {ref, status};
      if (s.mode == Mode::SC) {
        s.turn_owner = s.partner_of(sender);
        out.delta.turn_owner = s.turn_owner;
      }
      if (s.completions.size() == s.task.size()) {
        s.complete = true;
        out.delta.completed = true;
      }
      break;
    }
    case StrokeKind::Erase: {
      const auto* open = detail::open_stroke_of(s, sender, p.stroke_id);
      if (!open) return StrokeOutcome::reject(RejectReason::NoOpenStroke);
      const SlotRef ref = open->slot;
      s.slot_status.at(ref) = SlotStatus{};
      s.open_strokes.erase(sender);
      out.delta.slot_change = {ref, SlotStatus{}};
      break;
    }
    case StrokeKind::ClearBoard:
      return StrokeOutcome::reject(RejectReason::ActionNotAllowed);
    case StrokeKind::SetColor:
      break;
  }
  s.strokes.push_back({sender, p});
  return out;
}

inline BoardSnapshot snapshot(const SessionState& s) {
  BoardSnapshot b;
  b.mode = s.mode;
  b.participants = s.participants;
  for (const auto& ref : s.task) b.slots.emplace_back(ref, s.slot_status.at(ref));
  b.strokes = s.strokes;
  b.turn_owner = s.turn_owner;
  b.complete = s.complete;
  return b;
}

/// Rebuilds a session from a snapshot by replaying its accepted strokes.
inline SessionState restore(const BoardSnapshot& b, const TemplateSet& templates, Condition condition,
                            SessionOptions options = {}) {
  auto s = create_session(b.participants, b.mode, templates, condition, options);
  for (const auto& ev : b.strokes) {
    if (!handle_stroke(s, ev.sender, ev.payload).accepted())
      throw Error(Errc::InvalidConfig, "snapshot stroke log does not replay");
  }
  return s;
}

}  // namespace wbqoe
