#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <utility>

#include "wbqoe/time.hpp"

namespace wbqoe {

/// Monotonic time source; successive reads never decrease.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Micros now() const = 0;
};

/// Hand-driven clock for unit tests.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Micros start = Micros{0}) : now_(start) {}

  Micros now() const override { return now_; }

  void set(Micros t) {
    if (t < now_) throw std::logic_error("ManualClock cannot move backwards");
    now_ = t;
  }
  void advance(Micros d) { set(now_ + d); }

 private:
  Micros now_;
};

/// Wall clock counted from construction.
class SteadyClock final : public Clock {
 public:
  SteadyClock() : epoch_(std::chrono::steady_clock::now()) {}

  Micros now() const override {
    return std::chrono::duration_cast<Micros>(std::chrono::steady_clock::now() - epoch_);
  }

 private:
  std::chrono::steady_clock::time_point epoch_;
};

/// A clock that can also run callbacks at given times.
class Scheduler : public Clock {
 public:
  using Task = std::function<void()>;
  using TaskId = std::uint64_t;

  virtual TaskId at(Micros t, Task task) = 0;
  virtual void cancel(TaskId id) = 0;

  TaskId after(Micros delay, Task task) { return at(now() + delay, std::move(task)); }
  TaskId post(Task task) { return at(now(), std::move(task)); }
};

/// Ordered task queue shared by the single-threaded schedulers. Tasks at equal
/// times run in the order they were scheduled.
class QueuedScheduler : public Scheduler {
 public:
  TaskId at(Micros t, Task task) override {
    const Micros now_t = now();
    if (t < now_t) t = now_t;
    const TaskId id = next_id_++;
    queue_.emplace(Key{t, id}, std::move(task));
    index_.emplace(id, t);
    return id;
  }

  void cancel(TaskId id) override {
    auto it = index_.find(id);
    if (it == index_.end()) return;
    queue_.erase(Key{it->second, id});
    index_.erase(it);
  }

  bool empty() const { return queue_.empty(); }
  std::size_t pending() const { return queue_.size(); }
  Micros next_time() const { return queue_.begin()->first.first; }

  /// Runs the earliest task. Returns false when nothing is pending.
  bool step() {
    if (queue_.empty()) return false;
    wait_until(next_time());
    auto node = queue_.extract(queue_.begin());
    index_.erase(node.key().second);
    node.mapped()();
    return true;
  }

  void run() {
    while (step()) {
    }
  }

 protected:
  virtual void wait_until(Micros t) = 0;

 private:
  using Key = std::pair<Micros, TaskId>;
  TaskId next_id_ = 1;
  std::map<Key, Task> queue_;
  std::unordered_map<TaskId, Micros> index_;
};

/// Discrete-event scheduler: time jumps to the next pending task.
class VirtualScheduler final : public QueuedScheduler {
 public:
  Micros now() const override { return now_; }

  /// Runs every task scheduled at or before `t`, then sets the clock to `t`.
  void run_until(Micros t) {
    while (!empty() && next_time() <= t) step();
    if (t > now_) now_ = t;
  }

 protected:
  void wait_until(Micros t) override {
    if (t > now_) now_ = t;
  }

 private:
  Micros now_{0};
};

/// Same queue on the wall clock: step() sleeps until the next task is due.
class RealtimeScheduler final : public QueuedScheduler {
 public:
  Micros now() const override { return clock_.now(); }

 protected:
  void wait_until(Micros t) override {
    const auto d = t - clock_.now();
    if (d.count() > 0) std::this_thread::sleep_for(d);
  }

 private:
  SteadyClock clock_;
};

}  // namespace wbqoe
