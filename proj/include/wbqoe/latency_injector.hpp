#pragma once

// Time-based wait queue that tops the pipeline's inherent latency Di up to a
// target end-to-end latency Dt. Each item is held until
//
//     now - arrival >= Dt - Di
//
// and is checked only on the drain ticks (tick_rate per second, phase starting
// at queue creation). Release is strictly FIFO: an item never overtakes an
// ineligible item ahead of it.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "wbqoe/clock.hpp"
#include "wbqoe/error.hpp"
#include "wbqoe/protocol.hpp"
#include "wbqoe/time.hpp"

namespace wbqoe {

struct InjectorConfig {
  Micros target_latency{0};    // Dt
  Micros inherent_latency{0};  // Di
  double tick_rate = 60.0;     // drains per second

  static InjectorConfig from_ms(double target_ms, double inherent_ms, double tick_rate = 60.0) {
    return {from_ms_real(target_ms), from_ms_real(inherent_ms), tick_rate};
  }

  void validate() const {
    if (inherent_latency.count() < 0) throw Error(Errc::InvalidInjectorConfig, "negative inherent latency");
    if (!(tick_rate > 0.0)) throw Error(Errc::InvalidInjectorConfig, "tick_rate must be positive");
    if (target_latency < inherent_latency)
      throw Error(Errc::TargetBelowInherent, "target latency below inherent latency");
  }

  /// Added hold time Dt - Di.
  Micros hold() const { return target_latency - inherent_latency; }
};

template <class Item>
struct DelayedItem {
  Micros arrival;  // Tr
  Micros hold;     // Dt - Di snapshotted at push time
  Item item;
};

template <class Item = Envelope>
class InjectorQueue {
 public:
  InjectorQueue(const Clock& clock, InjectorConfig config) : clock_(&clock), config_(config) {
    config_.validate();
    origin_ = clock_->now();
  }

  InjectorQueue(const InjectorQueue&) = delete;
  InjectorQueue& operator=(const InjectorQueue&) = delete;

  void push(Item item) {
    std::lock_guard lock(mu_);
    if (closed_) throw Error(Errc::QueueClosed, "push on a closed queue");
    const Micros now = clock_->now();
    queue_.push_back(DelayedItem<Item>{now, config_.hold(), std::move(item)});
  }

  /// Releases the eligible head run, with arrival times and holds.
  std::vector<DelayedItem<Item>> drain() {
    std::lock_guard lock(mu_);
    const Micros now = clock_->now();
    std::vector<DelayedItem<Item>> out;
    while (!queue_.empty() && now - queue_.front().arrival >= queue_.front().hold) {
      out.push_back(std::move(queue_.front()));
      queue_.pop_front();
    }
    return out;
  }

  std::vector<Item> tick() {
    auto released = drain();
    std::vector<Item> out;
    out.reserve(released.size());
    for (auto& d : released) out.push_back(std::move(d.item));
    return out;
  }

  /// Applies to items pushed after the call; queued items keep their hold.
  void set_target(Micros target) {
    std::lock_guard lock(mu_);
    if (target < config_.inherent_latency)
      throw Error(Errc::TargetBelowInherent, "target latency below inherent latency");
    config_.target_latency = target;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
  }

  bool closed() const {
    std::lock_guard lock(mu_);
    return closed_;
  }

  /// Drops everything still queued and returns it.
  std::vector<DelayedItem<Item>> discard() {
    std::lock_guard lock(mu_);
    std::vector<DelayedItem<Item>> out(std::make_move_iterator(queue_.begin()),
                                       std::make_move_iterator(queue_.end()));
    queue_.clear();
    return out;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return queue_.size();
  }
  bool empty() const { return size() == 0; }

  InjectorConfig config() const {
    std::lock_guard lock(mu_);
    return config_;
  }

  Micros origin() const { return origin_; }

  /// Time of drain tick k.
  Micros tick_time(std::int64_t k) const { return origin_ + tick_offset(k, config_.tick_rate); }

  /// First drain tick at or after `t`.
  Micros next_tick_at_or_after(Micros t) const {
    return tick_time(first_tick_at_or_after(t - origin_, config_.tick_rate));
  }

  /// The drain tick at which the current head becomes eligible, if any. Ticks
  /// before it release nothing, so a drain loop may sleep until then.
  std::optional<Micros> next_release_tick() const {
    std::lock_guard lock(mu_);
    if (queue_.empty()) return std::nullopt;
    const auto& head = queue_.front();
    return tick_time(first_tick_at_or_after(head.arrival + head.hold - origin_, config_.tick_rate));
  }

 private:
  const Clock* clock_;
  InjectorConfig config_;
  Micros origin_{0};
  mutable std::mutex mu_;
  std::deque<DelayedItem<Item>> queue_;
  bool closed_ = false;
};

/// Estimates the inherent one-way latency Di from clock-probe round trips:
/// median(rtt) / 2 plus the relay's own processing time.
inline double calibrate_inherent(std::span<const double> probe_rtts_ms, double processing_ms = 0.0) {
  constexpr std::size_t kMinSamples = 10;
  if (probe_rtts_ms.size() < kMinSamples)
    throw Error(Errc::InsufficientSamples, "need at least 10 probe round trips");
  std::vector<double> v(probe_rtts_ms.begin(), probe_rtts_ms.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double median = n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
  return median / 2.0 + processing_ms;
}

}  // namespace wbqoe
