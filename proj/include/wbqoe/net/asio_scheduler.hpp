#pragma once

#include <chrono>
#include <memory>
#include <unordered_map>

#include <boost/asio/io_context.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/steady_timer.hpp>

#include "wbqoe/clock.hpp"

namespace wbqoe::net {

namespace asio = boost::asio;

/// Wall-clock scheduler on an io_context. Tasks due now are posted, so
/// they run in scheduling order; later tasks use steady timers.
class AsioScheduler final : public Scheduler {
 public:
  explicit AsioScheduler(asio::io_context& io) : io_(io), epoch_(std::chrono::steady_clock::now()) {}

  Micros now() const override {
    return std::chrono::duration_cast<Micros>(std::chrono::steady_clock::now() - epoch_);
  }

  TaskId at(Micros t, Task task) override {
    const TaskId id = next_id_++;
    auto entry = std::make_shared<Entry>();
    tasks_.emplace(id, entry);
    auto run = [this, id, entry, task = std::move(task)] {
      if (entry->cancelled) return;
      tasks_.erase(id);
      task();
    };
    if (t <= now()) {
      asio::post(io_, std::move(run));
    } else {
      entry->timer = std::make_unique<asio::steady_timer>(io_, epoch_ + t);
      entry->timer->async_wait([run = std::move(run)](const boost::system::error_code& ec) {
        if (!ec) run();
      });
    }
    return id;
  }

  void cancel(TaskId id) override {
    auto it = tasks_.find(id);
    if (it == tasks_.end()) return;
    it->second->cancelled = true;
    if (it->second->timer) it->second->timer->cancel();
    tasks_.erase(it);
  }

  std::size_t pending() const { return tasks_.size(); }

 private:
  struct Entry {
    bool cancelled = false;
    std::unique_ptr<asio::steady_timer> timer;
  };

  asio::io_context& io_;
  std::chrono::steady_clock::time_point epoch_;
  TaskId next_id_ = 1;
  std::unordered_map<TaskId, std::shared_ptr<Entry>> tasks_;
};

/// Test-mode loop: network I/O runs on the io_context, and simulated time
/// advances to the next virtual event whenever I/O has been idle for
/// `idle_window`. Returns when `done()` holds or both sides run dry.
template <class Done>
void run_hybrid(asio::io_context& io, VirtualScheduler& sched, Done done,
                std::chrono::milliseconds idle_window = std::chrono::milliseconds(1)) {
  auto guard = asio::make_work_guard(io);
  while (!done() && !io.stopped()) {
    if (io.poll() > 0) continue;
    if (io.run_one_for(idle_window) > 0) continue;
    if (!sched.step() && done()) break;
  }
}

}  // namespace wbqoe::net
