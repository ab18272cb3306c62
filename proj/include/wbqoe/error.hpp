#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wbqoe {

enum class Errc {
  InvalidEnvelope,
  MalformedFrame,
  UnknownVersion,
  UnknownMsgType,
  QueueClosed,
  TargetBelowInherent,
  InvalidInjectorConfig,
  InsufficientSamples,
  DuplicateParticipant,
  InvalidTemplateSet,
  InvalidConfig,
  UnknownSession,
  SequenceGap,
  ParticipantDisconnected,
  RatingTimeout,
  InvalidRating,
  DuplicateRating,
  StorageFailure,
  EmptySample,
  OutOfRangeProportion,
  LengthMismatch,
  ConstantSeries,
  MissingCells,
  TooFewLevels,
  Deadlock,
};

constexpr std::string_view to_string(Errc e) {
  switch (e) {
    case Errc::InvalidEnvelope: return "InvalidEnvelope";
    case Errc::MalformedFrame: return "MalformedFrame";
    case Errc::UnknownVersion: return "UnknownVersion";
    case Errc::UnknownMsgType: return "UnknownMsgType";
    case Errc::QueueClosed: return "QueueClosed";
    case Errc::TargetBelowInherent: return "TargetBelowInherent";
    case Errc::InvalidInjectorConfig: return "InvalidInjectorConfig";
    case Errc::InsufficientSamples: return "InsufficientSamples";
    case Errc::DuplicateParticipant: return "DuplicateParticipant";
    case Errc::InvalidTemplateSet: return "InvalidTemplateSet";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::UnknownSession: return "UnknownSession";
    case Errc::SequenceGap: return "SequenceGap";
    case Errc::ParticipantDisconnected: return "ParticipantDisconnected";
    case Errc::RatingTimeout: return "RatingTimeout";
    case Errc::InvalidRating: return "InvalidRating";
    case Errc::DuplicateRating: return "DuplicateRating";
    case Errc::StorageFailure: return "StorageFailure";
    case Errc::EmptySample: return "EmptySample";
    case Errc::OutOfRangeProportion: return "OutOfRangeProportion";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::ConstantSeries: return "ConstantSeries";
    case Errc::MissingCells: return "MissingCells";
    case Errc::TooFewLevels: return "TooFewLevels";
    case Errc::Deadlock: return "Deadlock";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace wbqoe
