#include <gtest/gtest.h>

#include <set>

#include "wbqoe/schedule.hpp"
#include "wbqoe/session_engine.hpp"

using namespace wbqoe;

namespace {

StrokePayload begin(const std::string& id, SlotRef slot) {
  StrokePayload p;
  p.kind = StrokeKind::BeginStroke;
  p.stroke_id = id;
  p.slot = slot;
  p.color = PenColor::Black;
  return p;
}

StrokePayload simple(StrokeKind kind, const std::string& id) {
  StrokePayload p;
  p.kind = kind;
  p.stroke_id = id;
  if (kind == StrokeKind::AppendPoints) p.points = {{0.25, 0.25}, {0.5, 0.5}};
  return p;
}

SessionState session(Mode mode, std::optional<std::size_t> slots = std::nullopt) {
  return create_session({"bob", "alice"}, mode, default_templates(), {Platform::VR, mode, 300}, {slots});
}

Errc error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return Errc::InvalidConfig;
}

// Random stroke traffic from both participants: mostly plausible moves with
// some deliberately invalid ones mixed in.
StrokePayload random_move(Rng& rng, const SessionState& s, const std::string& who, int& counter) {
  const auto& refs = s.task;
  auto open = s.open_strokes.find(who);
  const auto pick = rng.uniform(10);
  if (open != s.open_strokes.end() && pick < 6) {
    if (pick < 2) return simple(StrokeKind::AppendPoints, open->second.stroke_id);
    if (pick == 2) return simple(StrokeKind::Erase, open->second.stroke_id);
    return simple(StrokeKind::EndStroke, open->second.stroke_id);
  }
  if (pick == 9) return simple(StrokeKind::EndStroke, "ghost");
  return begin(who + std::to_string(counter++), refs[rng.uniform(refs.size())]);
}

}  // namespace

TEST(Session, CreateStartsUnclaimed) {
  const auto s = session(Mode::SC);
  EXPECT_EQ(s.slot_status.size(), default_templates().slot_count());
  for (const auto& [ref, st] : s.slot_status) EXPECT_EQ(st.state, SlotStatus::State::Unclaimed);
  EXPECT_TRUE(s.strokes.empty());
  EXPECT_FALSE(s.complete);
  EXPECT_EQ(s.turn_owner, "alice");
}

TEST(Session, CreateErrors) {
  EXPECT_EQ(error_of([] { create_session({"a", "a"}, Mode::SC, default_templates(), {Platform::VR, Mode::SC, 100}); }),
            Errc::DuplicateParticipant);
  auto five = default_templates();
  five.templates.pop_back();
  EXPECT_EQ(error_of([&] { create_session({"a", "b"}, Mode::SC, five, {Platform::VR, Mode::SC, 100}); }),
            Errc::InvalidTemplateSet);
  auto empty_template = default_templates();
  empty_template.templates[2].slots.clear();
  EXPECT_EQ(error_of([&] { create_session({"a", "b"}, Mode::FC, empty_template, {Platform::VR, Mode::FC, 100}); }),
            Errc::InvalidTemplateSet);
}

TEST(Session, ScRejectsSecondStrokeInARow) {
  auto s = session(Mode::SC);
  ASSERT_TRUE(handle_stroke(s, "alice", begin("a1", {0, 0})).accepted());
  ASSERT_TRUE(handle_stroke(s, "alice", simple(StrokeKind::EndStroke, "a1")).accepted());
  EXPECT_EQ(handle_stroke(s, "alice", begin("a2", {0, 1})).reason, RejectReason::NotYourTurn);
  EXPECT_TRUE(handle_stroke(s, "bob", begin("b1", {0, 1})).accepted());
}

TEST(Session, ScTurnPassesOnEnd) {
  auto s = session(Mode::SC);
  EXPECT_EQ(handle_stroke(s, "bob", begin("b1", {0, 0})).reason, RejectReason::NotYourTurn);
  handle_stroke(s, "alice", begin("a1", {0, 0}));
  EXPECT_EQ(handle_stroke(s, "alice", begin("a2", {0, 1})).reason, RejectReason::StrokeAlreadyOpen);
  const auto end = handle_stroke(s, "alice", simple(StrokeKind::EndStroke, "a1"));
  EXPECT_EQ(end.delta.turn_owner, "bob");
  EXPECT_EQ(end.delta.slot_change->second.state, SlotStatus::State::Completed);
}

TEST(Session, FcFirstClaimWinsInEitherOrder) {
  for (bool alice_first : {true, false}) {
    auto s = session(Mode::FC);
    const SlotRef s3{1, 0};
    const std::string first = alice_first ? "alice" : "bob";
    const std::string second = alice_first ? "bob" : "alice";
    EXPECT_TRUE(handle_stroke(s, first, begin(first + "1", s3)).accepted());
    EXPECT_EQ(handle_stroke(s, second, begin(second + "1", s3)).reason, RejectReason::SlotTaken);
    EXPECT_EQ(s.slot_status.at(s3).participant, first);
  }
}

TEST(Session, FcAllowsParallelStrokes) {
  auto s = session(Mode::FC);
  EXPECT_TRUE(handle_stroke(s, "alice", begin("a1", {0, 0})).accepted());
  EXPECT_TRUE(handle_stroke(s, "bob", begin("b1", {0, 1})).accepted());
  EXPECT_EQ(handle_stroke(s, "bob", begin("b2", {0, 2})).reason, RejectReason::StrokeAlreadyOpen);
  EXPECT_EQ(handle_stroke(s, "bob", simple(StrokeKind::AppendPoints, "a1")).reason, RejectReason::NoOpenStroke);
  EXPECT_TRUE(handle_stroke(s, "bob", simple(StrokeKind::AppendPoints, "b1")).accepted());
}

TEST(Session, EraseRevertsClaimOnly) {
  auto s = session(Mode::FC);
  handle_stroke(s, "alice", begin("a1", {0, 0}));
  EXPECT_TRUE(handle_stroke(s, "alice", simple(StrokeKind::Erase, "a1")).accepted());
  EXPECT_EQ(s.slot_status.at({0, 0}).state, SlotStatus::State::Unclaimed);
  EXPECT_TRUE(handle_stroke(s, "bob", begin("b1", {0, 0})).accepted());
  handle_stroke(s, "bob", simple(StrokeKind::EndStroke, "b1"));
  EXPECT_EQ(handle_stroke(s, "bob", simple(StrokeKind::Erase, "b1")).reason, RejectReason::NoOpenStroke);
  EXPECT_EQ(s.slot_status.at({0, 0}).state, SlotStatus::State::Completed);
}

TEST(Session, UnknownSlotAndClearBoard) {
  auto s = session(Mode::FC, 4);
  EXPECT_EQ(handle_stroke(s, "alice", begin("a1", {5, 3})).reason, RejectReason::UnknownSlot);
  StrokePayload clear;
  clear.kind = StrokeKind::ClearBoard;
  EXPECT_FALSE(handle_stroke(s, "alice", clear).accepted());
  EXPECT_EQ(handle_stroke(s, "mallory", begin("m", {0, 0})).reason, RejectReason::ActionNotAllowed);
}

TEST(Session, LastEndStrokeCompletes) {
  auto s = session(Mode::SC, 3);
  const std::array<std::string, 2> order = {"alice", "bob"};
  for (std::size_t i = 0; i < s.task.size(); ++i) {
    const auto& who = order[i % 2];
    const auto id = who + std::to_string(i);
    ASSERT_TRUE(handle_stroke(s, who, begin(id, s.task[i])).accepted());
    const auto end = handle_stroke(s, who, simple(StrokeKind::EndStroke, id));
    ASSERT_TRUE(end.accepted());
    EXPECT_EQ(end.delta.completed, i + 1 == s.task.size());
  }
  EXPECT_TRUE(s.complete);
  EXPECT_EQ(handle_stroke(s, "bob", begin("late", s.task[0])).reason, RejectReason::SessionComplete);
  const auto snap = snapshot(s);
  EXPECT_TRUE(snap.complete);
  for (const auto& [ref, st] : snap.slots) EXPECT_EQ(st.state, SlotStatus::State::Completed);
}

TEST(Session, FreshSnapshotHasNoStrokes) {
  const auto snap = snapshot(session(Mode::FC));
  EXPECT_TRUE(snap.strokes.empty());
  EXPECT_EQ(snap.slots.size(), default_templates().slot_count());
}

TEST(Session, SnapshotEqualsFoldOfAcceptedEvents) {
  Rng rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    const Mode mode = trial % 2 ? Mode::SC : Mode::FC;
    auto s = session(mode, 8);
    int counter = 0;
    std::size_t cut = rng.uniform(60);
    std::optional<BoardSnapshot> mid;
    for (std::size_t step = 0; step < 120 && !s.complete; ++step) {
      if (step == cut) mid = snapshot(s);
      const auto& who = s.participants[rng.uniform(2)];
      handle_stroke(s, who, random_move(rng, s, who, counter));
    }
    const Condition cond{Platform::VR, mode, 300};
    const auto rebuilt = restore(snapshot(s), default_templates(), cond, {8});
    ASSERT_EQ(rebuilt, s);
    if (mid) {
      // Replaying the snapshot then the later accepted events gives the same state.
      auto resumed = restore(*mid, default_templates(), cond, {8});
      for (std::size_t i = mid->strokes.size(); i < s.strokes.size(); ++i)
        ASSERT_TRUE(handle_stroke(resumed, s.strokes[i].sender, s.strokes[i].payload).accepted());
      ASSERT_EQ(resumed, s);
    }
  }
}

TEST(Session, RandomStreamsKeepInvariants) {
  Rng rng(4242);
  for (int trial = 0; trial < 300; ++trial) {
    const Mode mode = trial % 2 ? Mode::SC : Mode::FC;
    auto s = session(mode, 1 + rng.uniform(24));
    int counter = 0;
    std::set<SlotRef> completed;
    for (int step = 0; step < 400 && !s.complete; ++step) {
      const auto& who = s.participants[rng.uniform(2)];
      const auto before = s.completions.size();
      auto copy = s;
      const auto move = random_move(rng, s, who, counter);
      const auto outcome = handle_stroke(s, who, move);
      // Determinism: same inputs, same verdict and state.
      ASSERT_EQ(handle_stroke(copy, who, move), outcome);
      ASSERT_EQ(copy, s);
      if (!outcome.accepted()) {
        ASSERT_EQ(s.completions.size(), before);
      }
      if (s.completions.size() > before) {
        ASSERT_TRUE(completed.insert(s.completions.back().first).second);
      }
      if (mode == Mode::SC) {
        ASSERT_LE(s.open_strokes.size(), 1u);
      }
    }
    if (mode == Mode::SC) {
      for (std::size_t i = 1; i < s.completions.size(); ++i)
        ASSERT_NE(s.completions[i].second, s.completions[i - 1].second);
    }
    bool all = true;
    for (const auto& [ref, st] : s.slot_status) all &= st.state == SlotStatus::State::Completed;
    ASSERT_EQ(all, s.complete);
  }
}
