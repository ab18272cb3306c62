#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wbqoe/time.hpp"

namespace wbqoe {

// Lowercase wire tokens for every enumeration. parse_* return nullopt on an
// unknown token so callers decide which error to raise.
#define WBQOE_ENUM_TOKENS(Enum, ...)                                              \
  inline constexpr std::array k##Enum##Tokens = {__VA_ARGS__};                     \
  constexpr std::string_view token(Enum v) {                                       \
    return k##Enum##Tokens[static_cast<std::size_t>(v)];                           \
  }                                                                                \
  inline std::optional<Enum> parse_##Enum(std::string_view s) {                    \
    for (std::size_t i = 0; i < k##Enum##Tokens.size(); ++i)                       \
      if (k##Enum##Tokens[i] == s) return static_cast<Enum>(i);                    \
    return std::nullopt;                                                           \
  }

enum class Platform { VRPlus, VR, PC };
WBQOE_ENUM_TOKENS(Platform, std::string_view{"vr_plus"}, std::string_view{"vr"},
                  std::string_view{"pc"})

enum class Mode { SC, FC };
WBQOE_ENUM_TOKENS(Mode, std::string_view{"sc"}, std::string_view{"fc"})

enum class Dimension { Interactivity, Efficiency, Believability, Overall };
WBQOE_ENUM_TOKENS(Dimension, std::string_view{"interactivity"}, std::string_view{"efficiency"},
                  std::string_view{"believability"}, std::string_view{"overall"})

inline constexpr std::array kAllDimensions = {Dimension::Interactivity, Dimension::Efficiency,
                                              Dimension::Believability, Dimension::Overall};

enum class StrokeKind { BeginStroke, AppendPoints, EndStroke, Erase, ClearBoard, SetColor };
WBQOE_ENUM_TOKENS(StrokeKind, std::string_view{"begin_stroke"}, std::string_view{"append_points"},
                  std::string_view{"end_stroke"}, std::string_view{"erase"},
                  std::string_view{"clear_board"}, std::string_view{"set_color"})

enum class PenColor { Black, Red, Green, Blue };
WBQOE_ENUM_TOKENS(PenColor, std::string_view{"black"}, std::string_view{"red"},
                  std::string_view{"green"}, std::string_view{"blue"})

enum class ControlKind {
  JoinSession,
  ConditionStart,
  ConditionEnd,
  TurnGrant,
  ClaimResult,
  SessionComplete,
  RatingSubmit,
  ClockProbe,
  ClockEcho,
};
WBQOE_ENUM_TOKENS(ControlKind, std::string_view{"join_session"},
                  std::string_view{"condition_start"}, std::string_view{"condition_end"},
                  std::string_view{"turn_grant"}, std::string_view{"claim_result"},
                  std::string_view{"session_complete"}, std::string_view{"rating_submit"},
                  std::string_view{"clock_probe"}, std::string_view{"clock_echo"})

enum class RejectReason {
  NotYourTurn,
  SlotTaken,
  NoOpenStroke,
  StrokeAlreadyOpen,
  SessionComplete,
  UnknownSlot,
  ActionNotAllowed,
  SequenceGap,
  NoActiveCondition,
  InvalidRating,
  DuplicateRating,
};
WBQOE_ENUM_TOKENS(RejectReason, std::string_view{"not_your_turn"}, std::string_view{"slot_taken"},
                  std::string_view{"no_open_stroke"}, std::string_view{"stroke_already_open"},
                  std::string_view{"session_complete"}, std::string_view{"unknown_slot"},
                  std::string_view{"action_not_allowed"}, std::string_view{"sequence_gap"},
                  std::string_view{"no_active_condition"}, std::string_view{"invalid_rating"},
                  std::string_view{"duplicate_rating"})

#undef WBQOE_ENUM_TOKENS

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

inline bool in_unit_square(Point p) {
  return p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0;
}

struct SlotRef {
  int template_index = 0;
  int slot_index = 0;
  friend auto operator<=>(const SlotRef&, const SlotRef&) = default;
};

inline std::string to_string(SlotRef s) {
  return "t" + std::to_string(s.template_index) + "s" + std::to_string(s.slot_index);
}

struct Condition {
  Platform platform = Platform::VRPlus;
  Mode mode = Mode::SC;
  std::int64_t latency_ms = 0;
  friend auto operator<=>(const Condition&, const Condition&) = default;
};

/// VRPlus is the only profile that shows the partner's presence cue.
constexpr bool presence_visible(Platform p) { return p == Platform::VRPlus; }

struct RatingRecord {
  std::string pair_id;
  std::string participant_id;
  Condition condition;
  Dimension dimension = Dimension::Overall;
  int score = 0;
  Micros t_submitted{0};
  friend bool operator==(const RatingRecord&, const RatingRecord&) = default;
};

struct StrokePayload {
  StrokeKind kind = StrokeKind::BeginStroke;
  std::optional<std::string> stroke_id;
  std::optional<SlotRef> slot;
  std::vector<Point> points;
  std::optional<PenColor> color;
  friend bool operator==(const StrokePayload&, const StrokePayload&) = default;
};

struct PresencePayload {
  Point cursor;
  bool pen_down = false;
  std::vector<double> pose_hint;
  friend bool operator==(const PresencePayload&, const PresencePayload&) = default;
};

struct SlotStatus {
  enum class State { Unclaimed, Claimed, Completed };
  State state = State::Unclaimed;
  std::string participant;
  std::string stroke_id;
  friend bool operator==(const SlotStatus&, const SlotStatus&) = default;
};

inline constexpr std::array<std::string_view, 3> kSlotStateTokens = {"unclaimed", "claimed",
                                                                      "completed"};

struct StrokeEvent {
  std::string sender;
  StrokePayload payload;
  friend bool operator==(const StrokeEvent&, const StrokeEvent&) = default;
};

/// Serializable board view: enough to rebuild a renderer's board.
struct BoardSnapshot {
  Mode mode = Mode::SC;
  std::array<std::string, 2> participants;
  std::vector<std::pair<SlotRef, SlotStatus>> slots;
  std::vector<StrokeEvent> strokes;
  std::string turn_owner;
  bool complete = false;
  friend bool operator==(const BoardSnapshot&, const BoardSnapshot&) = default;
};

struct Verdict {
  std::int64_t ref_seq = 0;
  bool accepted = false;
  std::optional<RejectReason> reason;
  friend bool operator==(const Verdict&, const Verdict&) = default;
};

}  // namespace wbqoe
