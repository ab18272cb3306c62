#pragma once

#include <string>

#include "wbqoe/protocol.hpp"
#include "wbqoe/schedule.hpp"

namespace wbqoe::fixtures {

inline std::string random_id(Rng& rng) {
  static constexpr char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789-_\"\\ ";
  std::string s;
  const auto n = 1 + rng.uniform(12);
  for (std::uint64_t i = 0; i < n; ++i) s += kAlphabet[rng.uniform(sizeof kAlphabet - 1)];
  return s;
}

inline Point random_point(Rng& rng) {
  // Mix exact edges with arbitrary doubles.
  auto coord = [&] {
    switch (rng.uniform(6)) {
      case 0: return 0.0;
      case 1: return 1.0;
      default: return rng.unit();
    }
  };
  return {coord(), coord()};
}

inline Condition random_condition(Rng& rng) {
  return {static_cast<Platform>(rng.uniform(3)), static_cast<Mode>(rng.uniform(2)),
          static_cast<std::int64_t>(rng.uniform(5000))};
}

inline StrokePayload random_stroke(Rng& rng) {
  StrokePayload p;
  p.kind = static_cast<StrokeKind>(rng.uniform(6));
  if (p.kind != StrokeKind::ClearBoard && p.kind != StrokeKind::SetColor) p.stroke_id = random_id(rng);
  if (p.kind == StrokeKind::BeginStroke)
    p.slot = SlotRef{static_cast<int>(rng.uniform(6)), static_cast<int>(rng.uniform(10))};
  if (p.kind == StrokeKind::BeginStroke || p.kind == StrokeKind::SetColor)
    p.color = static_cast<PenColor>(rng.uniform(4));
  if (p.kind == StrokeKind::AppendPoints) {
    const auto n = 1 + rng.uniform(kMaxPointsPerAppend);
    for (std::uint64_t i = 0; i < n; ++i) p.points.push_back(random_point(rng));
  }
  return p;
}

inline PresencePayload random_presence(Rng& rng) {
  PresencePayload p{random_point(rng), rng.uniform(2) == 1, {}};
  const auto n = rng.uniform(4);
  for (std::uint64_t i = 0; i < n; ++i) p.pose_hint.push_back((rng.unit() - 0.5) * 1e3);
  return p;
}

inline ControlPayload random_control(Rng& rng) {
  ControlPayload c;
  c.kind = static_cast<ControlKind>(rng.uniform(9));
  switch (c.kind) {
    case ControlKind::RatingSubmit:
      c.rating = RatingRecord{random_id(rng),
                              random_id(rng),
                              random_condition(rng),
                              static_cast<Dimension>(rng.uniform(4)),
                              static_cast<int>(1 + rng.uniform(5)),
                              Micros{static_cast<std::int64_t>(rng.uniform(1'000'000'000))}};
      break;
    case ControlKind::ClockProbe:
    case ControlKind::ClockEcho:
      c.probe_id = static_cast<std::int64_t>(rng.uniform(1000));
      c.t_probe = Micros{static_cast<std::int64_t>(rng.uniform(1'000'000'000))};
      if (c.kind == ControlKind::ClockEcho) c.t_echo = *c.t_probe + Micros{static_cast<std::int64_t>(rng.uniform(1000))};
      break;
    case ControlKind::ClaimResult: {
      const bool ok = rng.uniform(2) == 1;
      c.verdict = Verdict{static_cast<std::int64_t>(1 + rng.uniform(1000)), ok,
                          ok ? std::nullopt : std::optional(static_cast<RejectReason>(rng.uniform(11)))};
      break;
    }
    case ControlKind::TurnGrant:
      c.turn_owner = random_id(rng);
      break;
    case ControlKind::ConditionStart: {
      c.condition = random_condition(rng);
      c.index = static_cast<std::int64_t>(rng.uniform(42));
      c.turn_owner = random_id(rng);
      BoardSnapshot b;
      b.mode = c.condition->mode;
      b.participants = {random_id(rng), random_id(rng)};
      for (int s = 0; s < 3; ++s) {
        SlotStatus st;
        st.state = static_cast<SlotStatus::State>(rng.uniform(3));
        if (st.state != SlotStatus::State::Unclaimed) {
          st.participant = b.participants[rng.uniform(2)];
          st.stroke_id = random_id(rng);
        }
        b.slots.emplace_back(SlotRef{0, s}, st);
      }
      b.strokes.push_back({b.participants[0], random_stroke(rng)});
      b.turn_owner = b.participants[1];
      b.complete = rng.uniform(2) == 1;
      c.snapshot = b;
      break;
    }
    case ControlKind::ConditionEnd:
      c.condition = random_condition(rng);
      c.index = static_cast<std::int64_t>(rng.uniform(42));
      break;
    default:
      break;
  }
  return c;
}

inline Envelope random_envelope(Rng& rng) {
  Envelope e;
  e.seq = static_cast<std::int64_t>(1 + rng.uniform(1u << 30));
  e.sender = random_id(rng);
  e.session = rng.uniform(4) == 0 ? std::string{} : random_id(rng);
  e.t_sent = Micros{static_cast<std::int64_t>(rng.uniform(10'000'000'000ULL))};
  switch (rng.uniform(3)) {
    case 0: e.payload = random_stroke(rng); break;
    case 1: e.payload = random_presence(rng); break;
    default: e.payload = random_control(rng); break;
  }
  return e;
}

}  // namespace wbqoe::fixtures
